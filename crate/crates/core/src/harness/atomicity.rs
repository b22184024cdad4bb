//! The all-or-nothing predicate over final balance changes.

use serde::{Deserialize, Serialize};

use crate::swap::Deltas;
use crate::tx::Amount;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Verdict {
    SwapCompleted,
    BothRefunded,
    /// Fee-adjusted deltas match neither safe outcome.
    Unsafe {
        deltas: Deltas,
    },
}

impl Verdict {
    pub fn is_safe(&self) -> bool {
        !matches!(self, Verdict::Unsafe { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::SwapCompleted => "swap_completed",
            Verdict::BothRefunded => "both_refunded",
            Verdict::Unsafe { .. } => "unsafe",
        }
    }
}

/// Classifies `deltas` after adding back `fees` (what each party paid per
/// chain). The swap outcome is `(-n1, +n2, +n1, -n2)` in the order
/// alice_a, alice_b, bob_a, bob_b; the null outcome is all zeros.
pub fn check_atomicity(deltas: &Deltas, fees: &Deltas, n1: Amount, n2: Amount) -> Verdict {
    let d = deltas.as_array();
    let f = fees.as_array();
    let adjusted = Deltas { alice_a: d[0] + f[0], alice_b: d[1] + f[1], bob_a: d[2] + f[2], bob_b: d[3] + f[3] };
    let (n1, n2) = (n1.signed(), n2.signed());
    if adjusted.as_array() == [-n1, n2, n1, -n2] {
        Verdict::SwapCompleted
    } else if adjusted.is_zero() {
        Verdict::BothRefunded
    } else {
        Verdict::Unsafe { deltas: adjusted }
    }
}
