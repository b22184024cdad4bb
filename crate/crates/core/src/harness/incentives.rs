//! Security deposits, spam-deterrent fees, and reputation.
//!
//! Each party posts a deposit of 112.5% of what they give when the swap
//! starts. A completed swap returns both deposits; otherwise the party who
//! deviated loses theirs to the counterparty.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::atomicity::Verdict;
use crate::harness::Party;
use crate::tx::Amount;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IncentiveError {
    #[error("deposit overflows")]
    Overflow,
}

/// `ceil(trade * 1125 / 1000)`.
pub fn compute_deposit(trade: Amount) -> Result<Amount, IncentiveError> {
    let scaled = u128::from(trade.0) * 1125;
    let d = scaled.div_ceil(1000);
    u64::try_from(d).map(Amount).map_err(|_| IncentiveError::Overflow)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyIncentives {
    /// Deposit currently posted.
    pub deposit_held: Amount,
    pub fees_paid: Amount,
    pub reputation: i64,
    /// Deposit flows only: posted (-), returned (+), won or lost.
    pub net: i128,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncentiveLedger {
    pub alice: PartyIncentives,
    pub bob: PartyIncentives,
}

impl IncentiveLedger {
    /// Both parties post deposits sized by what each gives.
    pub fn open(n1: Amount, n2: Amount) -> Result<Self, IncentiveError> {
        let (da, db) = (compute_deposit(n1)?, compute_deposit(n2)?);
        Ok(IncentiveLedger {
            alice: PartyIncentives { deposit_held: da, net: -da.signed(), ..Default::default() },
            bob: PartyIncentives { deposit_held: db, net: -db.signed(), ..Default::default() },
        })
    }

    pub fn party(&self, p: Party) -> &PartyIncentives {
        match p {
            Party::Alice => &self.alice,
            Party::Bob => &self.bob,
        }
    }

    fn party_mut(&mut self, p: Party) -> &mut PartyIncentives {
        match p {
            Party::Alice => &mut self.alice,
            Party::Bob => &mut self.bob,
        }
    }

    pub fn held(&self) -> Amount {
        Amount(self.alice.deposit_held.0 + self.bob.deposit_held.0)
    }

    /// Deposit flows net to zero: what the parties are down is exactly what
    /// is still held.
    pub fn is_conserved(&self) -> bool {
        self.alice.net + self.bob.net + self.held().signed() == 0
    }

    pub fn charge_spam_fee(&mut self, party: Party, fee: Amount) -> Result<(), IncentiveError> {
        let p = self.party_mut(party);
        p.fees_paid = p.fees_paid.checked_add(fee).ok_or(IncentiveError::Overflow)?;
        Ok(())
    }

    /// Releases deposits according to the verdict. `deviator` is ignored on
    /// a completed swap.
    pub fn settle(&mut self, verdict: &Verdict, deviator: Option<Party>) {
        match (verdict, deviator) {
            (Verdict::SwapCompleted, _) | (_, None) => {
                for p in [Party::Alice, Party::Bob] {
                    let s = self.party_mut(p);
                    s.net += s.deposit_held.signed();
                    s.deposit_held = Amount::ZERO;
                    if verdict == &Verdict::SwapCompleted {
                        s.reputation += 1;
                    }
                }
            }
            (_, Some(cheat)) => {
                let forfeit = self.party(cheat).deposit_held;
                let c = self.party_mut(cheat);
                c.deposit_held = Amount::ZERO;
                c.reputation -= 1;
                let honest = self.party_mut(cheat.other());
                honest.net += honest.deposit_held.signed() + forfeit.signed();
                honest.deposit_held = Amount::ZERO;
            }
        }
    }
}
