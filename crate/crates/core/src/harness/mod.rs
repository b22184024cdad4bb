//! Scenario runner: step schedules, adversaries, atomicity and incentives.

pub mod atomicity;
pub mod incentives;
pub mod runner;
pub mod scenario;
pub mod trace;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

pub use atomicity::{check_atomicity, Verdict};
pub use incentives::{compute_deposit, IncentiveLedger};
pub use runner::{compare_baselines, enumerate_abort_points, run_scenario, steps, sweep_strategies, RunError, Step};
pub use scenario::{AdversaryStrategy, Engine, RefundSide, Scenario, ScenarioError};
pub use trace::{emit_trace, EventKind, ScenarioTrace, TraceEvent};
