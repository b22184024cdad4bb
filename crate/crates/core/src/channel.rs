//! Two-party payment channels and a swap across two of them.
//!
//! A channel is funded by one on-chain transaction into a 2-of-2 output and
//! closed by one settlement transaction paying the latest co-signed
//! balances. Everything in between is an off-chain state update signed by
//! both parties, numbered by a strictly increasing `seq`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{
    gen_secret, hash_commit, sha256, Digest, KeyPair, Preimage, PublicKey, Signature, SpendCondition, Witness,
};
use crate::ledger::{ChainError, ChainId, Ledger};
use crate::tx::{Amount, Outpoint, SimTime, Transaction, TxId, TxInput, TxOutput};

/// Which end of a channel. `A` is the opener.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingHtlc {
    pub digest: Digest,
    pub amount: Amount,
    pub offerer: Side,
    pub expiry: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelState {
    pub seq: u64,
    pub balance_a: Amount,
    pub balance_b: Amount,
    pub pending: Option<PendingHtlc>,
}

/// A state with both parties' signatures over [`ChannelState::digest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignedState {
    pub state: ChannelState,
    pub sig_a: Signature,
    pub sig_b: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("channel capacity is zero")]
    ZeroCapacity,
    #[error("insufficient on-chain funds on {0}")]
    InsufficientFunds(ChainId),
    #[error("offerer balance {available} below {needed}")]
    InsufficientChannelBalance { needed: Amount, available: Amount },
    #[error("an HTLC is already pending")]
    HtlcAlreadyPending,
    #[error("no HTLC pending")]
    NoPendingHtlc,
    #[error("preimage does not match the pending digest")]
    WrongPreimage,
    #[error("HTLC expired at {expiry}, now {now}")]
    Expired { now: SimTime, expiry: SimTime },
    #[error("HTLC not expired until {expiry}, now {now}")]
    NotExpired { now: SimTime, expiry: SimTime },
    #[error("cannot close with a pending HTLC")]
    PendingHtlc,
    #[error("state {got} is not newer than {current}")]
    StaleState { got: u64, current: u64 },
    #[error("state signature invalid")]
    BadSignature,
    #[error("state does not conserve capacity")]
    NotConserved,
    #[error("channel is closed")]
    Closed,
    #[error("channels are not between the same two parties")]
    PartyMismatch,
    #[error("fee exceeds channel capacity")]
    FeeTooHigh,
    #[error(transparent)]
    Chain(#[from] ChainError),
}

impl ChannelState {
    /// Message both parties sign; binds the state to one funding outpoint.
    pub fn digest(&self, funding: &Outpoint) -> Digest {
        let mut buf = Vec::with_capacity(128);
        buf.extend_from_slice(funding.tx_id.as_bytes());
        buf.extend_from_slice(&funding.index.to_be_bytes());
        buf.extend_from_slice(&self.seq.to_be_bytes());
        buf.extend_from_slice(&self.balance_a.0.to_be_bytes());
        buf.extend_from_slice(&self.balance_b.0.to_be_bytes());
        match &self.pending {
            None => buf.push(0),
            Some(h) => {
                buf.push(1);
                buf.extend_from_slice(h.digest.as_bytes());
                buf.extend_from_slice(&h.amount.0.to_be_bytes());
                buf.push(matches!(h.offerer, Side::B) as u8);
                buf.extend_from_slice(&h.expiry.0.to_be_bytes());
            }
        }
        Digest(sha256(&[b"chan", &buf]))
    }

    pub fn pending_amount(&self) -> Amount {
        self.pending.map_or(Amount::ZERO, |h| h.amount)
    }

    pub fn total(&self) -> Option<Amount> {
        self.balance_a.checked_add(self.balance_b)?.checked_add(self.pending_amount())
    }

    fn balance_mut(&mut self, side: Side) -> &mut Amount {
        match side {
            Side::A => &mut self.balance_a,
            Side::B => &mut self.balance_b,
        }
    }

    pub fn balance(&self, side: Side) -> Amount {
        match side {
            Side::A => self.balance_a,
            Side::B => self.balance_b,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Channel {
    chain: ChainId,
    a: KeyPair,
    b: KeyPair,
    funding_tx: TxId,
    capacity: Amount,
    fee: Amount,
    latest: SignedState,
    closed: Option<TxId>,
}

/// Opens a channel funded by `contrib_a` from `a` and `contrib_b` from `b`.
/// The funding fee is paid by `a`, or by `b` when `a` contributes nothing.
pub fn open_channel(
    ledger: &mut Ledger,
    a: &KeyPair,
    b: &KeyPair,
    contrib_a: Amount,
    contrib_b: Amount,
    fee: Amount,
) -> Result<Channel, ChannelError> {
    let capacity = contrib_a.checked_add(contrib_b).ok_or(ChainError::Overflow)?;
    if capacity.is_zero() {
        return Err(ChannelError::ZeroCapacity);
    }
    if fee >= capacity {
        return Err(ChannelError::FeeTooHigh);
    }
    let mut inputs = Vec::new();
    let mut outputs = vec![TxOutput { amount: capacity, condition: SpendCondition::multisig(a.public(), b.public()) }];
    let (need_a, need_b) = if contrib_a.is_zero() {
        (contrib_a, contrib_b.checked_add(fee).ok_or(ChainError::Overflow)?)
    } else {
        (contrib_a.checked_add(fee).ok_or(ChainError::Overflow)?, contrib_b)
    };
    for (key, need) in [(a, need_a), (b, need_b)] {
        if need.is_zero() {
            continue;
        }
        let mut total = Amount::ZERO;
        for (op, amount) in ledger.owned_outputs(&key.public()) {
            if total >= need {
                break;
            }
            inputs.push(TxInput::new(op));
            total = total.checked_add(amount).ok_or(ChainError::Overflow)?;
        }
        if total < need {
            return Err(ChannelError::InsufficientFunds(ledger.chain_id().clone()));
        }
        let change = total.checked_sub(need).expect("covered");
        if !change.is_zero() {
            outputs.push(TxOutput { amount: change, condition: SpendCondition::SignedBy(key.public()) });
        }
    }
    let mut tx = Transaction { inputs, outputs, locktime: SimTime::ZERO, nonce: 0 };
    cosign(&mut tx, a, b);
    let funding_tx = ledger.broadcast(tx)?;

    let funding = Outpoint { tx_id: funding_tx, index: 0 };
    let state = ChannelState { seq: 0, balance_a: contrib_a, balance_b: contrib_b, pending: None };
    let latest = sign_state(&state, &funding, a, b);
    Ok(Channel { chain: ledger.chain_id().clone(), a: a.clone(), b: b.clone(), funding_tx, capacity, fee, latest, closed: None })
}

fn cosign(tx: &mut Transaction, a: &KeyPair, b: &KeyPair) {
    let w = Witness::new().with_signature(a.public(), a.sign(tx)).with_signature(b.public(), b.sign(tx));
    tx.set_witnesses(&w);
}

fn sign_state(state: &ChannelState, funding: &Outpoint, a: &KeyPair, b: &KeyPair) -> SignedState {
    let d = state.digest(funding);
    SignedState { state: *state, sig_a: a.sign_digest(&d), sig_b: b.sign_digest(&d) }
}

impl Channel {
    pub fn chain(&self) -> &ChainId {
        &self.chain
    }

    pub fn parties(&self) -> (PublicKey, PublicKey) {
        (self.a.public(), self.b.public())
    }

    pub fn funding_outpoint(&self) -> Outpoint {
        Outpoint { tx_id: self.funding_tx, index: 0 }
    }

    pub fn capacity(&self) -> Amount {
        self.capacity
    }

    pub fn state(&self) -> &ChannelState {
        &self.latest.state
    }

    pub fn signed_state(&self) -> &SignedState {
        &self.latest
    }

    pub fn seq(&self) -> u64 {
        self.latest.state.seq
    }

    pub fn pending(&self) -> Option<PendingHtlc> {
        self.latest.state.pending
    }

    pub fn is_closed(&self) -> bool {
        self.closed.is_some()
    }

    pub fn is_conserved(&self) -> bool {
        self.latest.state.total() == Some(self.capacity)
    }

    /// Checks both signatures, conservation, and that `update` is newer than
    /// the current state, then adopts it.
    pub fn accept(&mut self, update: SignedState) -> Result<(), ChannelError> {
        self.ensure_open()?;
        if update.state.seq <= self.seq() {
            return Err(ChannelError::StaleState { got: update.state.seq, current: self.seq() });
        }
        let d = update.state.digest(&self.funding_outpoint());
        if self.a.sign_digest(&d) != update.sig_a || self.b.sign_digest(&d) != update.sig_b {
            return Err(ChannelError::BadSignature);
        }
        if update.state.total() != Some(self.capacity) {
            return Err(ChannelError::NotConserved);
        }
        self.latest = update;
        Ok(())
    }

    fn ensure_open(&self) -> Result<(), ChannelError> {
        if self.closed.is_some() {
            return Err(ChannelError::Closed);
        }
        Ok(())
    }

    fn update(&mut self, next: ChannelState) -> Result<u64, ChannelError> {
        let signed = sign_state(&next, &self.funding_outpoint(), &self.a, &self.b);
        self.accept(signed)?;
        Ok(self.seq())
    }

    /// Moves `amount` from `offerer`'s balance into a pending HTLC.
    pub fn add_htlc(&mut self, offerer: Side, digest: Digest, amount: Amount, expiry: SimTime) -> Result<u64, ChannelError> {
        self.ensure_open()?;
        let mut next = *self.state();
        if next.pending.is_some() {
            return Err(ChannelError::HtlcAlreadyPending);
        }
        let available = next.balance(offerer);
        *next.balance_mut(offerer) =
            available.checked_sub(amount).ok_or(ChannelError::InsufficientChannelBalance { needed: amount, available })?;
        next.pending = Some(PendingHtlc { digest, amount, offerer, expiry });
        next.seq += 1;
        self.update(next)
    }

    /// Pays the pending HTLC to the recipient; requires `now < expiry`.
    pub fn fulfill_htlc(&mut self, preimage: &Preimage, now: SimTime) -> Result<u64, ChannelError> {
        self.ensure_open()?;
        let mut next = *self.state();
        let h = next.pending.ok_or(ChannelError::NoPendingHtlc)?;
        if hash_commit(preimage) != h.digest {
            return Err(ChannelError::WrongPreimage);
        }
        if now >= h.expiry {
            return Err(ChannelError::Expired { now, expiry: h.expiry });
        }
        let to = next.balance_mut(h.offerer.other());
        *to = to.checked_add(h.amount).ok_or(ChainError::Overflow)?;
        next.pending = None;
        next.seq += 1;
        self.update(next)
    }

    /// Returns the pending HTLC to its offerer; requires `now >= expiry`.
    pub fn fail_htlc(&mut self, now: SimTime) -> Result<u64, ChannelError> {
        self.ensure_open()?;
        let mut next = *self.state();
        let h = next.pending.ok_or(ChannelError::NoPendingHtlc)?;
        if now < h.expiry {
            return Err(ChannelError::NotExpired { now, expiry: h.expiry });
        }
        let back = next.balance_mut(h.offerer);
        *back = back.checked_add(h.amount).ok_or(ChainError::Overflow)?;
        next.pending = None;
        next.seq += 1;
        self.update(next)
    }

    /// Payouts the settlement would make: `a`'s share carries the fee unless
    /// it is too small, then `b`'s does.
    pub fn settlement_payouts(&self) -> Result<(Amount, Amount), ChannelError> {
        let s = self.state();
        if s.pending.is_some() {
            return Err(ChannelError::PendingHtlc);
        }
        match s.balance_a.checked_sub(self.fee) {
            Some(a) => Ok((a, s.balance_b)),
            None => Ok((s.balance_a, s.balance_b.checked_sub(self.fee).ok_or(ChannelError::FeeTooHigh)?)),
        }
    }

    /// Broadcasts one settlement paying the latest co-signed balances.
    pub fn close_channel(&mut self, ledger: &mut Ledger) -> Result<TxId, ChannelError> {
        self.ensure_open()?;
        if ledger.chain_id() != &self.chain {
            return Err(ChainError::UnknownChain(ledger.chain_id().clone()).into());
        }
        let (pay_a, pay_b) = self.settlement_payouts()?;
        let outputs = [(self.a.public(), pay_a), (self.b.public(), pay_b)]
            .into_iter()
            .filter(|(_, amt)| !amt.is_zero())
            .map(|(k, amount)| TxOutput { amount, condition: SpendCondition::SignedBy(k) })
            .collect();
        let mut tx = Transaction {
            inputs: vec![TxInput::new(self.funding_outpoint())],
            outputs,
            locktime: SimTime::ZERO,
            nonce: self.seq(),
        };
        cosign(&mut tx, &self.a, &self.b);
        let id = ledger.broadcast(tx)?;
        self.closed = Some(id);
        Ok(id)
    }
}

/// Swaps `n1` on `chan_a` (Alice at side A pays Bob) for `n2` on `chan_b`
/// (Bob at side B pays Alice) under one preimage, entirely off-chain. The
/// chain-A HTLC outlives the chain-B one.
pub fn swap_across_channels(
    chan_a: &mut Channel,
    chan_b: &mut Channel,
    n1: Amount,
    n2: Amount,
    seed: u64,
    now: SimTime,
    (expiry_a, expiry_b): (SimTime, SimTime),
) -> Result<(), ChannelError> {
    if chan_a.parties() != chan_b.parties() {
        return Err(ChannelError::PartyMismatch);
    }
    let x = gen_secret(seed);
    let h = hash_commit(&x);
    let (mut a, mut b) = (chan_a.clone(), chan_b.clone());
    a.add_htlc(Side::A, h, n1, now + expiry_a)?;
    b.add_htlc(Side::B, h, n2, now + expiry_b)?;
    b.fulfill_htlc(&x, now)?;
    a.fulfill_htlc(&x, now)?;
    *chan_a = a;
    *chan_b = b;
    Ok(())
}
