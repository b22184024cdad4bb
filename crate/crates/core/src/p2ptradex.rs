//! Illustrative model of a P2PTradeX-style trade, kept only to show its
//! asymmetry. This is not a reconstruction of the original proposal.
//!
//! Alice moves `alice_amount` into an escrow output that only Bob can spend,
//! and only by presenting the id of his chain-B payment as a preimage. There
//! is no refund path. Chain A cannot see chain B, so nothing forces Bob to
//! pay: a Bob who never pays leaves Alice's coins stranded.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{hash_commit, KeyPair, Preimage, SpendCondition, Witness};
use crate::ledger::{ChainError, Ledger};
use crate::swap::Deltas;
use crate::tx::{Amount, Outpoint, SimTime, Transaction, TxId, TxInput, TxOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeXOffer {
    pub alice_amount: Amount,
    pub bob_amount: Amount,
    /// After this Alice stops waiting for proof. Her escrow stays locked.
    pub proof_deadline: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BobStrategy {
    Honest,
    Deny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TradeXPhase {
    Init,
    Escrowed,
    BobPaid,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TradeXError {
    #[error("{op} not allowed in phase {phase:?}")]
    WrongPhase { op: &'static str, phase: TradeXPhase },
    #[error("amounts must be positive and above the fee")]
    InvalidOffer,
    #[error("insufficient funds on {chain}")]
    InsufficientFunds { chain: String },
    #[error("payment not confirmed on chain B")]
    PaymentNotConfirmed,
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Clone)]
pub struct TradeXSession {
    offer: TradeXOffer,
    bob: KeyPair,
    fee: Amount,
    payment: Transaction,
    escrow: Transaction,
    phase: TradeXPhase,
}

fn pay(ledger: &Ledger, from: &KeyPair, to: SpendCondition, amount: Amount, fee: Amount) -> Result<Transaction, TradeXError> {
    let target = amount.checked_add(fee).ok_or(ChainError::Overflow)?;
    let mut total = Amount::ZERO;
    let mut inputs = Vec::new();
    for (op, a) in ledger.owned_outputs(&from.public()) {
        if total >= target {
            break;
        }
        inputs.push(TxInput::new(op));
        total = total.checked_add(a).ok_or(ChainError::Overflow)?;
    }
    if total < target {
        return Err(TradeXError::InsufficientFunds { chain: ledger.chain_id().to_string() });
    }
    let mut outputs = vec![TxOutput { amount, condition: to }];
    let change = total.checked_sub(target).expect("covered");
    if !change.is_zero() {
        outputs.push(TxOutput { amount: change, condition: SpendCondition::SignedBy(from.public()) });
    }
    let mut tx = Transaction { inputs, outputs, locktime: SimTime::ZERO, nonce: 0 };
    tx.set_witnesses(&Witness::new().with_signature(from.public(), from.sign(&tx)));
    Ok(tx)
}

fn proof_of(payment: TxId) -> Preimage {
    Preimage(*payment.as_bytes())
}

impl TradeXSession {
    /// Bob prepares his payment and tells Alice its id; Alice prepares the
    /// escrow bound to that id. Nothing is broadcast.
    pub fn new(
        offer: TradeXOffer,
        alice: KeyPair,
        bob: KeyPair,
        fee: Amount,
        ledger_a: &Ledger,
        ledger_b: &Ledger,
    ) -> Result<Self, TradeXError> {
        if offer.alice_amount <= fee || offer.bob_amount <= fee {
            return Err(TradeXError::InvalidOffer);
        }
        let payment = pay(ledger_b, &bob, SpendCondition::SignedBy(alice.public()), offer.bob_amount, fee)?;
        let lock = SpendCondition::And(vec![
            SpendCondition::SignedBy(bob.public()),
            SpendCondition::PreimageOf(hash_commit(&proof_of(payment.tx_id()))),
        ]);
        let escrow = pay(ledger_a, &alice, lock, offer.alice_amount, fee)?;
        Ok(TradeXSession { offer, bob, fee, payment, escrow, phase: TradeXPhase::Init })
    }

    pub fn phase(&self) -> TradeXPhase {
        self.phase
    }

    pub fn offer(&self) -> &TradeXOffer {
        &self.offer
    }

    pub fn escrow_tx(&self) -> &Transaction {
        &self.escrow
    }

    pub fn payment_tx(&self) -> &Transaction {
        &self.payment
    }

    fn expect(&self, op: &'static str, phase: TradeXPhase) -> Result<(), TradeXError> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(TradeXError::WrongPhase { op, phase: self.phase })
        }
    }

    /// Alice's irreversible commitment.
    pub fn alice_escrow(&mut self, ledger_a: &mut Ledger) -> Result<TxId, TradeXError> {
        self.expect("alice_escrow", TradeXPhase::Init)?;
        let id = ledger_a.broadcast(self.escrow.clone())?;
        self.phase = TradeXPhase::Escrowed;
        Ok(id)
    }

    pub fn bob_pay(&mut self, ledger_b: &mut Ledger) -> Result<TxId, TradeXError> {
        self.expect("bob_pay", TradeXPhase::Escrowed)?;
        let id = ledger_b.broadcast(self.payment.clone())?;
        self.phase = TradeXPhase::BobPaid;
        Ok(id)
    }

    /// Bob spends the escrow with his payment id as proof.
    pub fn bob_claim_escrow(&mut self, ledger_a: &mut Ledger, ledger_b: &Ledger) -> Result<TxId, TradeXError> {
        self.expect("bob_claim_escrow", TradeXPhase::BobPaid)?;
        let payment_id = self.payment.tx_id();
        if !ledger_b.is_confirmed(&payment_id) {
            return Err(TradeXError::PaymentNotConfirmed);
        }
        let mut claim = Transaction {
            inputs: vec![TxInput::new(Outpoint { tx_id: self.escrow.tx_id(), index: 0 })],
            outputs: vec![TxOutput {
                amount: self.offer.alice_amount.checked_sub(self.fee).expect("checked at new"),
                condition: SpendCondition::SignedBy(self.bob.public()),
            }],
            locktime: SimTime::ZERO,
            nonce: 0,
        };
        let w = Witness::new().with_preimage(proof_of(payment_id)).with_signature(self.bob.public(), self.bob.sign(&claim));
        claim.set_witnesses(&w);
        let id = ledger_a.broadcast(claim)?;
        self.phase = TradeXPhase::Completed;
        Ok(id)
    }
}

/// Plays one trade on copies of the ledgers and returns each party's
/// balance change once everything has settled.
pub fn run_p2ptradex(
    offer: TradeXOffer,
    strategy: BobStrategy,
    alice: &KeyPair,
    bob: &KeyPair,
    fee: Amount,
    ledger_a: &Ledger,
    ledger_b: &Ledger,
) -> Result<Deltas, TradeXError> {
    let (mut a, mut b) = (ledger_a.clone(), ledger_b.clone());
    let before = balances(&a, &b, alice, bob);
    let mut s = TradeXSession::new(offer, alice.clone(), bob.clone(), fee, &a, &b)?;
    s.alice_escrow(&mut a)?;
    settle(&mut a, &mut b);
    if strategy == BobStrategy::Honest {
        s.bob_pay(&mut b)?;
        settle(&mut a, &mut b);
        s.bob_claim_escrow(&mut a, &b)?;
    }
    let t = offer.proof_deadline.max(a.clock()).max(b.clock());
    a.advance_to(t);
    b.advance_to(t);
    settle(&mut a, &mut b);
    Ok(Deltas::between(before, balances(&a, &b, alice, bob)))
}

fn settle(a: &mut Ledger, b: &mut Ledger) {
    let dt = a.confirmation_delay().max(b.confirmation_delay());
    a.advance_time(dt);
    b.advance_time(dt);
}

fn balances(a: &Ledger, b: &Ledger, alice: &KeyPair, bob: &KeyPair) -> [i128; 4] {
    [
        a.query_balance(&alice.public()).signed(),
        b.query_balance(&alice.public()).signed(),
        a.query_balance(&bob.public()).signed(),
        b.query_balance(&bob.public()).signed(),
    ]
}
