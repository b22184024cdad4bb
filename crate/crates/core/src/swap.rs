//! Two-party hashed-timelock swap over two ledgers.
//!
//! Alice locks `n1` on chain A in a contract claimable by Bob with the
//! preimage `x`, or by both signatures together. Before she broadcasts it,
//! Bob co-signs her refund (TX2), timelocked `timelock_a` into the future.
//! Once the lock (TX1) confirms, Bob locks `n2` on chain B under the same
//! digest (TX3), with a refund (TX4) Alice co-signs, timelocked
//! `timelock_b < timelock_a`. Alice claims on B, which publishes `x`; Bob
//! reads `x` from chain B and claims on A.
//!
//! Every operation checks its phase first and returns
//! [`SwapError::WrongPhase`] without touching the session or the ledgers.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{gen_secret, hash_commit, Digest, KeyPair, Preimage, PublicKey, SpendCondition, Witness};
use crate::ledger::{ChainError, ChainId, Ledger};
use crate::tx::{Amount, Outpoint, SimTime, Transaction, TxId, TxInput, TxOutput};

/// Alice's refund delay.
pub const DEFAULT_TIMELOCK_A: SimTime = SimTime::hours(48);
/// Bob's refund delay.
pub const DEFAULT_TIMELOCK_B: SimTime = SimTime::hours(24);

#[derive(Debug, Clone)]
pub struct SwapParams {
    pub chain_a: ChainId,
    pub chain_b: ChainId,
    /// Alice gives this on chain A.
    pub n1: Amount,
    /// Bob gives this on chain B.
    pub n2: Amount,
    pub alice: KeyPair,
    pub bob: KeyPair,
    pub timelock_a: SimTime,
    pub timelock_b: SimTime,
    pub seed: u64,
    /// Fee paid by every transaction the engine builds.
    pub fee: Amount,
    /// How long before a refund opens a claim is still attempted. `None`
    /// means twice the confirmation delay of the chain being claimed on.
    pub claim_margin: Option<SimTime>,
}

impl SwapParams {
    pub fn new(chain_a: ChainId, chain_b: ChainId, n1: Amount, n2: Amount, alice: KeyPair, bob: KeyPair, seed: u64) -> Self {
        SwapParams {
            chain_a,
            chain_b,
            n1,
            n2,
            alice,
            bob,
            timelock_a: DEFAULT_TIMELOCK_A,
            timelock_b: DEFAULT_TIMELOCK_B,
            seed,
            fee: Amount::ZERO,
            claim_margin: None,
        }
    }

    pub fn claim_margin(&self, ledger: &Ledger) -> SimTime {
        self.claim_margin.unwrap_or(SimTime(ledger.confirmation_delay().0.saturating_mul(2)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    RefundACosigned,
    Tx1Broadcast,
    Tx3Built,
    RefundBCosigned,
    Tx3Broadcast,
    AliceClaimed,
    BobClaimed,
    RefundedA,
    RefundedB,
    Completed,
    Aborted,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("phase serializes");
        f.write_str(s.as_str().expect("phase is a string"))
    }
}

/// One unmet cross-chain requirement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "violation")]
pub enum Violation {
    HashFunction { chain_a: String, chain_b: String },
    Timelock { chain: ChainId },
    Scripts { chain: ChainId },
}

impl Violation {
    pub fn name(&self) -> &'static str {
        match self {
            Violation::HashFunction { .. } => "hash function",
            Violation::Timelock { .. } => "timelock",
            Violation::Scripts { .. } => "scripts",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::HashFunction { chain_a, chain_b } => {
                write!(f, "hash function mismatch ({chain_a} vs {chain_b})")
            }
            Violation::Timelock { chain } => write!(f, "timelock unsupported on {chain}"),
            Violation::Scripts { chain } => write!(f, "scripts unsupported on {chain}"),
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(Violation::to_string).collect::<Vec<_>>().join("; ")
}

/// Lists every requirement the pair fails: same commitment hash, timelocks
/// on both, scripts on both.
pub fn check_compatibility(a: &Ledger, b: &Ledger) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    let (fa, fb) = (a.features(), b.features());
    if fa.hash_algo_id != fb.hash_algo_id {
        v.push(Violation::HashFunction { chain_a: fa.hash_algo_id.clone(), chain_b: fb.hash_algo_id.clone() });
    }
    for l in [a, b] {
        if !l.features().supports_timelock {
            v.push(Violation::Timelock { chain: l.chain_id().clone() });
        }
    }
    for l in [a, b] {
        if !l.features().supports_scripts {
            v.push(Violation::Scripts { chain: l.chain_id().clone() });
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SwapError {
    #[error("{op} not allowed in phase {phase}")]
    WrongPhase { op: &'static str, phase: Phase },
    #[error("incompatible chains: {}", join_violations(.0))]
    IncompatibleChains(Vec<Violation>),
    #[error("insufficient funds on {chain}: need {needed}, have {available}")]
    InsufficientFunds { chain: ChainId, needed: Amount, available: Amount },
    #[error("timelock_b {timelock_b} must be below timelock_a {timelock_a} by at least {required_gap}")]
    TimelockOrderingViolation { timelock_a: SimTime, timelock_b: SimTime, required_gap: SimTime },
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("expected ledger {expected}, got {got}")]
    WrongLedger { expected: ChainId, got: ChainId },
    #[error("TX1 not confirmed")]
    Tx1NotConfirmed,
    #[error("TX3 not confirmed")]
    Tx3NotConfirmed,
    #[error("too late: now {now}, deadline {deadline}")]
    TooLate { now: SimTime, deadline: SimTime },
    #[error("too early: now {now}, locktime {locktime}")]
    TooEarly { now: SimTime, locktime: SimTime },
    #[error("preimage not revealed on chain")]
    PreimageNotRevealed,
    #[error("contract output already spent")]
    AlreadySpent,
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Balance change per (party, chain) in signed base units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deltas {
    pub alice_a: i128,
    pub alice_b: i128,
    pub bob_a: i128,
    pub bob_b: i128,
}

impl Deltas {
    /// `before` and `after` in the order alice_a, alice_b, bob_a, bob_b.
    pub fn between(before: [i128; 4], after: [i128; 4]) -> Self {
        Deltas {
            alice_a: after[0] - before[0],
            alice_b: after[1] - before[1],
            bob_a: after[2] - before[2],
            bob_b: after[3] - before[3],
        }
    }

    pub fn as_array(&self) -> [i128; 4] {
        [self.alice_a, self.alice_b, self.bob_a, self.bob_b]
    }

    pub fn is_zero(&self) -> bool {
        self.as_array() == [0; 4]
    }
}

/// Message from Alice to Bob carrying the digest and her lock's id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Announcement {
    pub digest: Digest,
    pub tx1_id: TxId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapEventKind {
    SetUp,
    RefundACosigned,
    Tx1Broadcast,
    Tx3Built,
    RefundBCosigned,
    Tx3Broadcast,
    AliceClaimBroadcast,
    BobClaimBroadcast,
    RefundABroadcast,
    RefundBBroadcast,
    PhaseChanged,
}

/// Emitted on every phase transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapEvent {
    pub time: SimTime,
    pub chain: Option<ChainId>,
    pub kind: SwapEventKind,
    pub tx_id: Option<TxId>,
    pub phase: Phase,
    pub revealed_digest: Option<Digest>,
}

#[derive(Debug, Clone)]
pub struct SwapSession {
    params: SwapParams,
    secret: Preimage,
    commitment: Digest,
    tx1: Transaction,
    tx2: Transaction,
    tx3: Option<Transaction>,
    tx4: Option<Transaction>,
    /// The digest Bob locked TX3 under, taken from Alice's announcement.
    bob_digest: Option<Digest>,
    alice_claim: Option<Transaction>,
    bob_claim: Option<Transaction>,
    tx1_sent: bool,
    tx3_sent: bool,
    refund_a_sent: bool,
    refund_b_sent: bool,
    phase: Phase,
    /// Latest ledger time this session has observed.
    now: SimTime,
    revealed: Option<Preimage>,
    events: Vec<SwapEvent>,
}

fn ensure_ledger(ledger: &Ledger, expected: &ChainId) -> Result<(), SwapError> {
    if ledger.chain_id() != expected {
        return Err(SwapError::WrongLedger { expected: expected.clone(), got: ledger.chain_id().clone() });
    }
    Ok(())
}

/// Picks simple-ownership outputs of `key` in outpoint order until `target`
/// is covered.
fn select_coins(ledger: &Ledger, key: &PublicKey, target: Amount) -> Result<(Vec<Outpoint>, Amount), SwapError> {
    let mut picked = Vec::new();
    let mut total = Amount::ZERO;
    for (op, amount) in ledger.owned_outputs(key) {
        if total >= target {
            break;
        }
        picked.push(op);
        total = total.checked_add(amount).ok_or(ChainError::Overflow)?;
    }
    if total < target {
        return Err(SwapError::InsufficientFunds {
            chain: ledger.chain_id().clone(),
            needed: target,
            available: ledger.query_balance(key),
        });
    }
    Ok((picked, total))
}

/// Builds and signs a transaction locking `amount` into `condition`, with
/// change back to `owner`.
fn build_lock(
    ledger: &Ledger,
    owner: &KeyPair,
    amount: Amount,
    fee: Amount,
    condition: SpendCondition,
) -> Result<Transaction, SwapError> {
    let target = amount.checked_add(fee).ok_or(ChainError::Overflow)?;
    let (inputs, total) = select_coins(ledger, &owner.public(), target)?;
    let mut outputs = vec![TxOutput { amount, condition }];
    let change = total.checked_sub(target).expect("selection covers target");
    if !change.is_zero() {
        outputs.push(TxOutput { amount: change, condition: SpendCondition::SignedBy(owner.public()) });
    }
    let mut tx =
        Transaction { inputs: inputs.into_iter().map(TxInput::new).collect(), outputs, locktime: SimTime::ZERO, nonce: 0 };
    let w = Witness::new().with_signature(owner.public(), owner.sign(&tx));
    tx.set_witnesses(&w);
    Ok(tx)
}

/// Unsigned spend of a contract output to `to`.
fn build_spend(from: Outpoint, amount: Amount, fee: Amount, to: PublicKey, locktime: SimTime) -> Transaction {
    Transaction {
        inputs: vec![TxInput::new(from)],
        outputs: vec![TxOutput {
            amount: amount.checked_sub(fee).expect("fee below amount checked at setup"),
            condition: SpendCondition::SignedBy(to),
        }],
        locktime,
        nonce: 0,
    }
}

fn add_signature(tx: &mut Transaction, key: &KeyPair) {
    let sig = key.sign(tx);
    for input in &mut tx.inputs {
        input.witness.signatures.insert(key.public(), sig);
    }
}

impl SwapSession {
    /// Alice picks `x`, builds the lock (TX1) and its refund (TX2).
    /// Nothing is broadcast.
    pub fn setup(params: SwapParams, ledger_a: &Ledger, ledger_b: &Ledger) -> Result<Self, SwapError> {
        ensure_ledger(ledger_a, &params.chain_a)?;
        ensure_ledger(ledger_b, &params.chain_b)?;
        if params.chain_a == params.chain_b {
            return Err(SwapError::InvalidParams("chain_a and chain_b must differ"));
        }
        if params.n1.is_zero() || params.n2.is_zero() {
            return Err(SwapError::InvalidParams("amounts must be positive"));
        }
        if params.fee >= params.n1 || params.fee >= params.n2 {
            return Err(SwapError::InvalidParams("fee must be below both amounts"));
        }
        if params.alice.public() == params.bob.public() {
            return Err(SwapError::InvalidParams("alice and bob must use distinct keys"));
        }
        check_compatibility(ledger_a, ledger_b).map_err(SwapError::IncompatibleChains)?;

        // Bob's earliest commit is one confirmation after Alice's; from there
        // a last-instant claim by Alice must still leave Bob time to claim.
        let (m_a, m_b) = (params.claim_margin(ledger_a), params.claim_margin(ledger_b));
        let required_gap = (ledger_a.confirmation_delay() + ledger_b.confirmation_delay() + m_a).saturating_sub(m_b);
        if params.timelock_b >= params.timelock_a || params.timelock_a.0 - params.timelock_b.0 < required_gap.0 {
            return Err(SwapError::TimelockOrderingViolation {
                timelock_a: params.timelock_a,
                timelock_b: params.timelock_b,
                required_gap: required_gap.max(SimTime(1)),
            });
        }
        let bob_needs = params.n2.checked_add(params.fee).ok_or(ChainError::Overflow)?;
        let bob_has = ledger_b.query_balance(&params.bob.public());
        if bob_has < bob_needs {
            return Err(SwapError::InsufficientFunds { chain: params.chain_b.clone(), needed: bob_needs, available: bob_has });
        }

        let secret = gen_secret(params.seed);
        let commitment = hash_commit(&secret);
        let (alice, bob) = (params.alice.public(), params.bob.public());
        let tx1 = build_lock(ledger_a, &params.alice, params.n1, params.fee, SpendCondition::htlc(commitment, bob, alice))?;
        let locktime_a = ledger_a.clock() + params.timelock_a;
        let mut tx2 = build_spend(tx1.outpoint(0), params.n1, params.fee, alice, locktime_a);
        add_signature(&mut tx2, &params.alice);

        let mut session = SwapSession {
            params,
            secret,
            commitment,
            tx1,
            tx2,
            tx3: None,
            tx4: None,
            bob_digest: None,
            alice_claim: None,
            bob_claim: None,
            tx1_sent: false,
            tx3_sent: false,
            refund_a_sent: false,
            refund_b_sent: false,
            phase: Phase::Init,
            now: SimTime::ZERO,
            revealed: None,
            events: Vec::new(),
        };
        session.observe(ledger_a.clock().max(ledger_b.clock()));
        session.emit(None, SwapEventKind::SetUp, None);
        Ok(session)
    }

    pub fn params(&self) -> &SwapParams {
        &self.params
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn commitment(&self) -> Digest {
        self.commitment
    }

    /// Alice's secret. Only Alice-side steps read this.
    pub fn secret(&self) -> Preimage {
        self.secret
    }

    pub fn revealed(&self) -> Option<Preimage> {
        self.revealed
    }

    pub fn tx1(&self) -> &Transaction {
        &self.tx1
    }

    pub fn tx2(&self) -> &Transaction {
        &self.tx2
    }

    pub fn tx3(&self) -> Option<&Transaction> {
        self.tx3.as_ref()
    }

    pub fn tx4(&self) -> Option<&Transaction> {
        self.tx4.as_ref()
    }

    pub fn alice_claim_tx(&self) -> Option<&Transaction> {
        self.alice_claim.as_ref()
    }

    pub fn bob_claim_tx(&self) -> Option<&Transaction> {
        self.bob_claim.as_ref()
    }

    pub fn locktime_a(&self) -> SimTime {
        self.tx2.locktime
    }

    pub fn locktime_b(&self) -> Option<SimTime> {
        self.tx4.as_ref().map(|t| t.locktime)
    }

    pub fn tx1_broadcast(&self) -> bool {
        self.tx1_sent
    }

    pub fn tx3_broadcast(&self) -> bool {
        self.tx3_sent
    }

    pub fn refund_a_sent(&self) -> bool {
        self.refund_a_sent
    }

    pub fn refund_b_sent(&self) -> bool {
        self.refund_b_sent
    }

    /// The honest hash-and-lock message Alice sends Bob.
    pub fn announcement(&self) -> Announcement {
        Announcement { digest: self.commitment, tx1_id: self.tx1.tx_id() }
    }

    pub fn take_events(&mut self) -> Vec<SwapEvent> {
        std::mem::take(&mut self.events)
    }

    fn observe(&mut self, t: SimTime) {
        self.now = self.now.max(t);
    }

    fn emit(&mut self, chain: Option<&ChainId>, kind: SwapEventKind, tx_id: Option<TxId>) {
        let time = self.now;
        let revealed_digest = match kind {
            SwapEventKind::AliceClaimBroadcast | SwapEventKind::BobClaimBroadcast => Some(self.commitment),
            _ => None,
        };
        self.events.push(SwapEvent { time, chain: chain.cloned(), kind, tx_id, phase: self.phase, revealed_digest });
    }

    fn expect_phase(&self, op: &'static str, allowed: &[Phase]) -> Result<(), SwapError> {
        if allowed.contains(&self.phase) {
            Ok(())
        } else {
            Err(SwapError::WrongPhase { op, phase: self.phase })
        }
    }

    /// Bob co-signs Alice's refund. Nothing touches either ledger.
    pub fn bob_cosign_refund_a(&mut self) -> Result<(), SwapError> {
        self.expect_phase("bob_cosign_refund_a", &[Phase::Init])?;
        add_signature(&mut self.tx2, &self.params.bob);
        self.phase = Phase::RefundACosigned;
        self.emit(None, SwapEventKind::RefundACosigned, None);
        Ok(())
    }

    /// Alice broadcasts TX1 on chain A.
    pub fn alice_commit(&mut self, ledger_a: &mut Ledger) -> Result<TxId, SwapError> {
        self.expect_phase("alice_commit", &[Phase::RefundACosigned])?;
        ensure_ledger(ledger_a, &self.params.chain_a)?;
        let id = ledger_a.broadcast(self.tx1.clone())?;
        self.tx1_sent = true;
        self.phase = Phase::Tx1Broadcast;
        self.observe(ledger_a.clock());
        let chain = self.params.chain_a.clone();
        self.emit(Some(&chain), SwapEventKind::Tx1Broadcast, Some(id));
        Ok(id)
    }

    /// Bob checks TX1 is confirmed and builds TX3 under the announced digest
    /// plus its refund TX4, which he hands to Alice for co-signing.
    pub fn bob_build_tx3(&mut self, ledger_a: &Ledger, ledger_b: &Ledger, announced: &Announcement) -> Result<(), SwapError> {
        self.expect_phase("bob_build_tx3", &[Phase::Tx1Broadcast])?;
        ensure_ledger(ledger_a, &self.params.chain_a)?;
        ensure_ledger(ledger_b, &self.params.chain_b)?;
        if !ledger_a.is_confirmed(&announced.tx1_id) {
            return Err(SwapError::Tx1NotConfirmed);
        }
        let locktime_b = ledger_b.clock() + self.params.timelock_b;
        // Last safe claim by Alice, plus its confirmation, plus Bob's own margin.
        let bob_deadline = locktime_b.saturating_sub(self.params.claim_margin(ledger_b))
            + ledger_b.confirmation_delay()
            + self.params.claim_margin(ledger_a);
        if bob_deadline > self.locktime_a() {
            return Err(SwapError::TooLate { now: ledger_b.clock(), deadline: self.locktime_a() });
        }
        let (alice, bob) = (self.params.alice.public(), self.params.bob.public());
        let tx3 = build_lock(
            ledger_b,
            &self.params.bob,
            self.params.n2,
            self.params.fee,
            SpendCondition::htlc(announced.digest, alice, bob),
        )?;
        let mut tx4 = build_spend(tx3.outpoint(0), self.params.n2, self.params.fee, bob, locktime_b);
        add_signature(&mut tx4, &self.params.bob);
        let tx3_id = tx3.tx_id();
        self.tx3 = Some(tx3);
        self.tx4 = Some(tx4);
        self.bob_digest = Some(announced.digest);
        self.phase = Phase::Tx3Built;
        self.observe(ledger_b.clock());
        let chain = self.params.chain_b.clone();
        self.emit(Some(&chain), SwapEventKind::Tx3Built, Some(tx3_id));
        Ok(())
    }

    /// Alice co-signs Bob's refund TX4.
    pub fn alice_cosign_refund_b(&mut self) -> Result<(), SwapError> {
        self.expect_phase("alice_cosign_refund_b", &[Phase::Tx3Built])?;
        let tx4 = self.tx4.as_mut().expect("TX4 built in Tx3Built");
        add_signature(tx4, &self.params.alice);
        self.phase = Phase::RefundBCosigned;
        self.emit(None, SwapEventKind::RefundBCosigned, None);
        Ok(())
    }

    /// Bob broadcasts TX3 on chain B.
    pub fn bob_commit(&mut self, ledger_b: &mut Ledger) -> Result<TxId, SwapError> {
        self.expect_phase("bob_commit", &[Phase::RefundBCosigned])?;
        ensure_ledger(ledger_b, &self.params.chain_b)?;
        let tx3 = self.tx3.clone().expect("TX3 built before RefundBCosigned");
        let id = ledger_b.broadcast(tx3)?;
        self.tx3_sent = true;
        self.phase = Phase::Tx3Broadcast;
        self.observe(ledger_b.clock());
        let chain = self.params.chain_b.clone();
        self.emit(Some(&chain), SwapEventKind::Tx3Broadcast, Some(id));
        Ok(id)
    }

    /// TX3 construction, Alice's co-signature on TX4, and TX3 broadcast in
    /// one go. Leaves the session untouched on failure.
    pub fn bob_build_and_commit(
        &mut self,
        ledger_a: &Ledger,
        ledger_b: &mut Ledger,
        announced: &Announcement,
    ) -> Result<TxId, SwapError> {
        let mut next = self.clone();
        next.bob_build_tx3(ledger_a, ledger_b, announced)?;
        next.alice_cosign_refund_b()?;
        let id = next.bob_commit(ledger_b)?;
        *self = next;
        Ok(id)
    }

    /// Alice spends TX3 with `x` and her signature, publishing `x` on chain B.
    pub fn alice_claim(&mut self, ledger_b: &mut Ledger) -> Result<TxId, SwapError> {
        self.expect_phase("alice_claim", &[Phase::Tx3Broadcast])?;
        ensure_ledger(ledger_b, &self.params.chain_b)?;
        let tx3_id = self.tx3.as_ref().expect("TX3 built").tx_id();
        if !ledger_b.is_confirmed(&tx3_id) {
            return Err(SwapError::Tx3NotConfirmed);
        }
        let locktime_b = self.locktime_b().expect("TX4 built");
        let deadline = locktime_b.saturating_sub(self.params.claim_margin(ledger_b));
        if ledger_b.clock() > deadline {
            return Err(SwapError::TooLate { now: ledger_b.clock(), deadline });
        }
        let outpoint = Outpoint { tx_id: tx3_id, index: 0 };
        if ledger_b.spender_of(&outpoint).is_some() || ledger_b.has_pending_spend(&outpoint) {
            return Err(SwapError::AlreadySpent);
        }
        let alice = &self.params.alice;
        let mut claim = build_spend(outpoint, self.params.n2, self.params.fee, alice.public(), SimTime::ZERO);
        let w = Witness::new().with_preimage(self.secret).with_signature(alice.public(), alice.sign(&claim));
        claim.set_witnesses(&w);
        let id = ledger_b.broadcast(claim.clone()).map_err(map_spent)?;
        self.alice_claim = Some(claim);
        self.revealed = Some(self.secret);
        self.phase = Phase::AliceClaimed;
        self.observe(ledger_b.clock());
        let chain = self.params.chain_b.clone();
        self.emit(Some(&chain), SwapEventKind::AliceClaimBroadcast, Some(id));
        Ok(id)
    }

    /// Bob learns `x` from a confirmed witness on chain B and spends TX1.
    pub fn bob_claim(&mut self, ledger_a: &mut Ledger, ledger_b: &Ledger) -> Result<TxId, SwapError> {
        self.expect_phase("bob_claim", &[Phase::AliceClaimed])?;
        ensure_ledger(ledger_a, &self.params.chain_a)?;
        ensure_ledger(ledger_b, &self.params.chain_b)?;
        let digest = self.bob_digest.expect("Bob's digest recorded at TX3 build");
        let x = ledger_b.scan_witnesses(&digest).ok_or(SwapError::PreimageNotRevealed)?;
        let deadline = self.locktime_a().saturating_sub(self.params.claim_margin(ledger_a));
        if ledger_a.clock() > deadline {
            return Err(SwapError::TooLate { now: ledger_a.clock(), deadline });
        }
        let outpoint = self.tx1.outpoint(0);
        if ledger_a.spender_of(&outpoint).is_some() || ledger_a.has_pending_spend(&outpoint) {
            return Err(SwapError::AlreadySpent);
        }
        let bob = &self.params.bob;
        let mut claim = build_spend(outpoint, self.params.n1, self.params.fee, bob.public(), SimTime::ZERO);
        let w = Witness::new().with_preimage(x).with_signature(bob.public(), bob.sign(&claim));
        claim.set_witnesses(&w);
        let id = ledger_a.broadcast(claim.clone()).map_err(map_spent)?;
        self.bob_claim = Some(claim);
        self.phase = Phase::BobClaimed;
        self.observe(ledger_a.clock());
        let chain = self.params.chain_a.clone();
        self.emit(Some(&chain), SwapEventKind::BobClaimBroadcast, Some(id));
        Ok(id)
    }

    /// Alice broadcasts the co-signed TX2 once its locktime has passed.
    pub fn refund_alice(&mut self, ledger_a: &mut Ledger) -> Result<TxId, SwapError> {
        const OP: &str = "refund_alice";
        if !self.tx1_broadcast() || self.refund_a_sent || self.phase == Phase::Completed {
            return Err(SwapError::WrongPhase { op: OP, phase: self.phase });
        }
        ensure_ledger(ledger_a, &self.params.chain_a)?;
        let tx2 = self.tx2.clone();
        refund_checks(ledger_a, &tx2)?;
        let id = ledger_a.broadcast(tx2).map_err(map_spent)?;
        self.refund_a_sent = true;
        self.observe(ledger_a.clock());
        let chain = self.params.chain_a.clone();
        self.emit(Some(&chain), SwapEventKind::RefundABroadcast, Some(id));
        Ok(id)
    }

    /// Bob broadcasts the co-signed TX4 once its locktime has passed.
    pub fn refund_bob(&mut self, ledger_b: &mut Ledger) -> Result<TxId, SwapError> {
        const OP: &str = "refund_bob";
        if !self.tx3_broadcast() || self.refund_b_sent || self.phase == Phase::Completed {
            return Err(SwapError::WrongPhase { op: OP, phase: self.phase });
        }
        ensure_ledger(ledger_b, &self.params.chain_b)?;
        let tx4 = self.tx4.clone().expect("TX4 exists once TX3 is broadcast");
        refund_checks(ledger_b, &tx4)?;
        let id = ledger_b.broadcast(tx4).map_err(map_spent)?;
        self.refund_b_sent = true;
        self.observe(ledger_b.clock());
        let chain = self.params.chain_b.clone();
        self.emit(Some(&chain), SwapEventKind::RefundBBroadcast, Some(id));
        Ok(id)
    }

    /// Moves to a terminal phase once the deciding transactions confirm.
    pub fn sync(&mut self, ledger_a: &Ledger, ledger_b: &Ledger) {
        let confirmed = |l: &Ledger, tx: Option<&Transaction>| tx.is_some_and(|t| l.is_confirmed(&t.tx_id()));
        let a_refunded = self.refund_a_sent && confirmed(ledger_a, Some(&self.tx2));
        let b_refunded = self.refund_b_sent && confirmed(ledger_b, self.tx4.as_ref());
        let b_open = self.tx3_broadcast() && !b_refunded;
        let next = if confirmed(ledger_a, self.bob_claim.as_ref()) {
            Phase::Completed
        } else if a_refunded && !b_open {
            Phase::Aborted
        } else if a_refunded {
            Phase::RefundedA
        } else if b_refunded {
            Phase::RefundedB
        } else {
            self.phase
        };
        self.observe(ledger_a.clock().max(ledger_b.clock()));
        if next != self.phase {
            self.phase = next;
            self.emit(None, SwapEventKind::PhaseChanged, None);
        }
    }

    /// Ends a session that never put funds on chain.
    pub fn abandon(&mut self) {
        if self.phase < Phase::Tx1Broadcast {
            self.phase = Phase::Aborted;
            self.emit(None, SwapEventKind::PhaseChanged, None);
        }
    }
}

fn refund_checks(ledger: &Ledger, refund: &Transaction) -> Result<(), SwapError> {
    let contract = refund.inputs[0].outpoint;
    if ledger.spender_of(&contract).is_some() || ledger.has_pending_spend(&contract) {
        return Err(SwapError::AlreadySpent);
    }
    if ledger.clock() < refund.locktime {
        return Err(SwapError::TooEarly { now: ledger.clock(), locktime: refund.locktime });
    }
    Ok(())
}

fn map_spent(e: ChainError) -> SwapError {
    match e {
        ChainError::DoubleSpend(_) => SwapError::AlreadySpent,
        other => SwapError::Chain(other),
    }
}
