//! Scenario traces and their JSON-lines form.
//!
//! Line one is a `header` record, then one `event` record per event in time
//! order, then one `balance` record per (party, chain), an `incentives`
//! record, and a closing `verdict` record. Field order is fixed, so equal
//! runs produce equal bytes.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conditions::Digest;
use crate::harness::atomicity::{check_atomicity, Verdict};
use crate::harness::incentives::IncentiveLedger;
use crate::harness::scenario::{AdversaryStrategy, Engine};
use crate::harness::Party;
use crate::ledger::ChainId;
use crate::swap::Deltas;
use crate::tx::{Amount, SimTime, TxId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// A protocol step ran.
    Step,
    /// A protocol step was attempted and rejected.
    StepFailed,
    /// The adversary stopped initiating steps.
    Abort,
    Broadcast,
    Confirm,
    Evict,
    /// A preimage became public on a ledger.
    Reveal,
    /// A new co-signed channel state.
    ChannelUpdate,
    Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceChange {
    pub party: Party,
    pub delta: i128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: SimTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainId>,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_id: Option<TxId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revealed_digest: Option<Digest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_seq: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fee: Option<Amount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payer: Option<Party>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub changes: Vec<BalanceChange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl TraceEvent {
    pub fn new(time: SimTime, kind: EventKind) -> Self {
        TraceEvent {
            time,
            chain: None,
            kind,
            step: None,
            tx_id: None,
            phase: None,
            revealed_digest: None,
            state_seq: None,
            fee: None,
            payer: None,
            changes: Vec::new(),
            detail: None,
        }
    }

    pub fn on(mut self, chain: &ChainId) -> Self {
        self.chain = Some(chain.clone());
        self
    }

    pub fn step(mut self, name: &str) -> Self {
        self.step = Some(name.to_string());
        self
    }

    pub fn tx(mut self, id: TxId) -> Self {
        self.tx_id = Some(id);
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

/// Starting and final balance of one party on one chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceRecord {
    pub party: Party,
    pub chain: ChainId,
    pub initial: Amount,
    #[serde(rename = "final")]
    pub final_: Amount,
    pub fees_paid: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub engine: Engine,
    pub strategy: AdversaryStrategy,
    pub seed: u64,
    pub n1: Amount,
    pub n2: Amount,
    pub events: Vec<TraceEvent>,
    /// Order: alice on A, alice on B, bob on A, bob on B.
    pub balances: Vec<BalanceRecord>,
    pub deviator: Option<Party>,
    pub incentives: IncentiveLedger,
    pub verdict: Verdict,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record<'a> {
    Header {
        engine: Engine,
        strategy: &'a AdversaryStrategy,
        seed: u64,
        n1: Amount,
        n2: Amount,
    },
    Event(&'a TraceEvent),
    Balance(&'a BalanceRecord),
    Incentives(&'a IncentiveLedger),
    Verdict {
        #[serde(flatten)]
        verdict: &'a Verdict,
        deviator: Option<Party>,
    },
}

impl ScenarioTrace {
    pub fn deltas(&self) -> Deltas {
        let v: Vec<i128> = self.balances.iter().map(|b| b.final_.signed() - b.initial.signed()).collect();
        Deltas { alice_a: v[0], alice_b: v[1], bob_a: v[2], bob_b: v[3] }
    }

    pub fn fees(&self) -> Deltas {
        let v: Vec<i128> = self.balances.iter().map(|b| b.fees_paid.signed()).collect();
        Deltas { alice_a: v[0], alice_b: v[1], bob_a: v[2], bob_b: v[3] }
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn is_time_ordered(&self) -> bool {
        self.events.windows(2).all(|w| w[0].time <= w[1].time)
    }

    /// Recomputes deltas and fees from `confirm` events alone and classifies
    /// them.
    pub fn verdict_from_events(&self) -> Verdict {
        let chain_a = &self.balances[0].chain;
        let mut deltas = [0i128; 4];
        let mut fees = [0i128; 4];
        for e in self.events_of(EventKind::Confirm) {
            let on_b = e.chain.as_ref() != Some(chain_a);
            let slot = |p: Party| match p {
                Party::Alice => usize::from(on_b),
                Party::Bob => 2 + usize::from(on_b),
            };
            for c in &e.changes {
                deltas[slot(c.party)] += c.delta;
            }
            if let (Some(fee), Some(p)) = (e.fee, e.payer) {
                fees[slot(p)] += fee.signed();
            }
        }
        check_atomicity(&Deltas::between([0; 4], deltas), &Deltas::between([0; 4], fees), self.n1, self.n2)
    }

    /// The JSON-lines encoding.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut line = |r: Record<'_>| {
            out.push_str(&serde_json::to_string(&r).expect("trace records serialize"));
            out.push('\n');
        };
        line(Record::Header { engine: self.engine, strategy: &self.strategy, seed: self.seed, n1: self.n1, n2: self.n2 });
        for e in &self.events {
            line(Record::Event(e));
        }
        for b in &self.balances {
            line(Record::Balance(b));
        }
        line(Record::Incentives(&self.incentives));
        line(Record::Verdict { verdict: &self.verdict, deviator: self.deviator });
        out
    }
}

pub fn emit_trace(trace: &ScenarioTrace, path: &Path) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(trace.to_jsonl().as_bytes())?;
    f.flush()
}
