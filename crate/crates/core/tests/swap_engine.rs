use std::sync::Arc;

use swapsim_core::conditions::{evaluate, gen_secret, hash_commit};
use swapsim_core::ledger::{Features, Ledger, LedgerConfig};
use swapsim_core::swap::{check_compatibility, Announcement, Phase, SwapError, SwapParams, SwapSession, Violation};
use swapsim_core::{Amount, ChainError, ChainId, KeyPair, KeyRegistry, SimTime};

const N: Amount = Amount(12_345_000);

struct World {
    alice: KeyPair,
    bob: KeyPair,
    a: Ledger,
    b: Ledger,
}

impl World {
    fn advance(&mut self, dt: u64) {
        self.a.advance_time(SimTime(dt));
        self.b.advance_time(SimTime(dt));
    }

    fn advance_to(&mut self, t: u64) {
        self.a.advance_to(SimTime(t));
        self.b.advance_to(SimTime(t));
    }

    fn params(&self) -> SwapParams {
        SwapParams::new(self.a.chain_id().clone(), self.b.chain_id().clone(), N, N, self.alice.clone(), self.bob.clone(), 42)
    }

    fn balances(&self) -> [u64; 4] {
        [
            self.a.query_balance(&self.alice.public()).0,
            self.b.query_balance(&self.alice.public()).0,
            self.a.query_balance(&self.bob.public()).0,
            self.b.query_balance(&self.bob.public()).0,
        ]
    }
}

fn world_with(alice_a: u64, fa: Features, fb: Features) -> World {
    let alice = KeyPair::derive("alice", 1);
    let bob = KeyPair::derive("bob", 1);
    let mut reg = KeyRegistry::new();
    reg.register(&alice).unwrap();
    reg.register(&bob).unwrap();
    let keys = Arc::new(reg);
    let a = Ledger::new(
        LedgerConfig::new(ChainId::new("BTC-sim").unwrap(), SimTime(600)).with_features(fa),
        &[(alice.public(), Amount(alice_a))],
        keys.clone(),
    )
    .unwrap();
    let b = Ledger::new(
        LedgerConfig::new(ChainId::new("XRP-sim").unwrap(), SimTime(5)).with_features(fb),
        &[(bob.public(), N)],
        keys,
    )
    .unwrap();
    World { alice, bob, a, b }
}

fn world() -> World {
    world_with(N.0, Features::default(), Features::default())
}

/// Runs set-up and commitment; returns the session at Tx3Broadcast with TX3
/// confirmed (clock 605).
fn committed(w: &mut World) -> SwapSession {
    let mut s = SwapSession::setup(w.params(), &w.a, &w.b).unwrap();
    s.bob_cosign_refund_a().unwrap();
    s.alice_commit(&mut w.a).unwrap();
    w.advance(600);
    let ann = s.announcement();
    s.bob_build_and_commit(&w.a, &mut w.b, &ann).unwrap();
    w.advance(5);
    s
}

#[test]
fn compatibility_gate() {
    let w = world();
    assert_eq!(check_compatibility(&w.a, &w.b), Ok(()));

    let no_tl = Features { supports_timelock: false, ..Features::default() };
    let w = world_with(N.0, Features::default(), no_tl);
    let v = check_compatibility(&w.a, &w.b).unwrap_err();
    assert_eq!(v.iter().map(Violation::name).collect::<Vec<_>>(), ["timelock"]);

    let blake = Features { hash_algo_id: "blake2b".into(), ..Features::default() };
    let w = world_with(N.0, Features::default(), blake);
    let v = check_compatibility(&w.a, &w.b).unwrap_err();
    assert_eq!(v.iter().map(Violation::name).collect::<Vec<_>>(), ["hash function"]);

    let all_bad = Features { hash_algo_id: "x".into(), supports_timelock: false, supports_scripts: false };
    let w = world_with(N.0, Features::default(), all_bad);
    let v = check_compatibility(&w.a, &w.b).unwrap_err();
    assert_eq!(v.iter().map(Violation::name).collect::<Vec<_>>(), ["hash function", "timelock", "scripts"]);
    assert!(matches!(
        SwapSession::setup(w.params(), &w.a, &w.b),
        Err(SwapError::IncompatibleChains(v)) if v.len() == 3
    ));
}

#[test]
fn setup_defaults_and_errors() {
    let w = world();
    let s = SwapSession::setup(w.params(), &w.a, &w.b).unwrap();
    assert_eq!(s.phase(), Phase::Init);
    assert_eq!(s.commitment(), hash_commit(&gen_secret(42)));
    assert_eq!(s.locktime_a(), SimTime(172_800));
    assert_eq!(s.tx2().locktime, SimTime(172_800));
    assert_eq!(w.a.mempool_len(), 0);

    let mut p = w.params();
    p.timelock_b = p.timelock_a;
    assert!(matches!(SwapSession::setup(p, &w.a, &w.b), Err(SwapError::TimelockOrderingViolation { .. })));

    let poor = world_with(N.0 - 1, Features::default(), Features::default());
    assert!(matches!(SwapSession::setup(poor.params(), &poor.a, &poor.b), Err(SwapError::InsufficientFunds { .. })));

    let mut p = w.params();
    p.n1 = Amount::ZERO;
    assert!(matches!(SwapSession::setup(p, &w.a, &w.b), Err(SwapError::InvalidParams(_))));
}

#[test]
fn cosign_refund_is_offchain() {
    let w = world();
    let log_a = w.a.confirmed_log_bytes();
    let log_b = w.b.confirmed_log_bytes();
    let mut s = SwapSession::setup(w.params(), &w.a, &w.b).unwrap();
    s.bob_cosign_refund_a().unwrap();
    assert_eq!(s.phase(), Phase::RefundACosigned);

    let contract = &s.tx1().outputs[0].condition;
    assert!(evaluate(contract, &s.tx2().inputs[0].witness, s.tx2(), w.a.keys()));
    assert!(s.tx2().inputs[0].witness.preimages.is_empty());

    assert_eq!(s.bob_cosign_refund_a(), Err(SwapError::WrongPhase { op: "bob_cosign_refund_a", phase: Phase::RefundACosigned }));
    assert_eq!(w.a.confirmed_log_bytes(), log_a);
    assert_eq!(w.b.confirmed_log_bytes(), log_b);
    assert_eq!(w.a.mempool_len() + w.b.mempool_len(), 0);
}

#[test]
fn happy_path_hand_trace() {
    let mut w = world();
    let before = w.balances();
    assert_eq!(before, [N.0, 0, 0, N.0]);

    let mut s = committed(&mut w);
    assert_eq!(s.phase(), Phase::Tx3Broadcast);
    assert_eq!(s.locktime_b(), Some(SimTime(600 + 86_400)));
    assert!(w.a.is_confirmed(&s.tx1().tx_id()));
    assert!(w.b.is_confirmed(&s.tx3().unwrap().tx_id()));
    assert_eq!(w.b.clock(), SimTime(605));

    let claim_id = s.alice_claim(&mut w.b).unwrap();
    assert_eq!(s.phase(), Phase::AliceClaimed);
    assert_eq!(s.revealed(), Some(s.secret()));
    assert_eq!(s.bob_claim(&mut w.a, &w.b), Err(SwapError::PreimageNotRevealed));
    w.advance(5);
    assert_eq!(w.b.confirmed_tx(&claim_id).unwrap().confirmed_at, SimTime(610));
    assert_eq!(w.b.scan_witnesses(&s.commitment()), Some(s.secret()));

    let bob_id = s.bob_claim(&mut w.a, &w.b).unwrap();
    assert_eq!(s.phase(), Phase::BobClaimed);
    w.advance(600);
    s.sync(&w.a, &w.b);
    assert_eq!(s.phase(), Phase::Completed);
    assert_eq!(w.a.confirmed_tx(&bob_id).unwrap().confirmed_at, SimTime(1210));

    // Bob ends with n1 on A, Alice with n2 on B.
    assert_eq!(w.balances(), [0, N.0, N.0, 0]);
    assert!(w.a.is_conserved() && w.b.is_conserved());
}

#[test]
fn out_of_phase_calls_mutate_nothing() {
    let mut w = world();
    let mut s = SwapSession::setup(w.params(), &w.a, &w.b).unwrap();
    let ann = s.announcement();
    assert!(matches!(s.alice_commit(&mut w.a), Err(SwapError::WrongPhase { .. })));
    assert!(matches!(s.alice_claim(&mut w.b), Err(SwapError::WrongPhase { .. })));
    assert!(matches!(s.bob_claim(&mut w.a, &w.b), Err(SwapError::WrongPhase { .. })));
    assert!(matches!(s.bob_build_tx3(&w.a, &w.b, &ann), Err(SwapError::WrongPhase { .. })));
    assert!(matches!(s.refund_alice(&mut w.a), Err(SwapError::WrongPhase { .. })));
    assert!(matches!(s.refund_bob(&mut w.b), Err(SwapError::WrongPhase { .. })));
    assert!(matches!(s.alice_cosign_refund_b(), Err(SwapError::WrongPhase { .. })));
    assert_eq!(s.phase(), Phase::Init);
    assert_eq!(w.a.mempool_len() + w.b.mempool_len(), 0);
}

#[test]
fn bob_waits_for_tx1_confirmation() {
    let mut w = world();
    let mut s = SwapSession::setup(w.params(), &w.a, &w.b).unwrap();
    s.bob_cosign_refund_a().unwrap();
    s.alice_commit(&mut w.a).unwrap();
    w.advance(599);
    let ann = s.announcement();
    assert_eq!(s.bob_build_and_commit(&w.a, &mut w.b, &ann), Err(SwapError::Tx1NotConfirmed));
    assert_eq!(s.phase(), Phase::Tx1Broadcast);
    w.advance(1);
    s.bob_build_and_commit(&w.a, &mut w.b, &ann).unwrap();
}

#[test]
fn bob_refuses_commit_when_window_too_short() {
    let mut w = world();
    let mut s = SwapSession::setup(w.params(), &w.a, &w.b).unwrap();
    s.bob_cosign_refund_a().unwrap();
    s.alice_commit(&mut w.a).unwrap();
    // Latest safe commit: t + 86400 - 10 + 5 + 1200 <= 172800  =>  t <= 85205.
    w.advance_to(85_205);
    let mut probe = s.clone();
    assert!(probe.bob_build_tx3(&w.a, &w.b, &s.announcement()).is_ok());
    w.advance(1);
    assert!(matches!(s.bob_build_tx3(&w.a, &w.b, &s.announcement()), Err(SwapError::TooLate { .. })));
}

#[test]
fn refund_after_abort_restores_alice() {
    let mut w = world();
    let before = w.balances();
    let mut s = SwapSession::setup(w.params(), &w.a, &w.b).unwrap();
    s.bob_cosign_refund_a().unwrap();
    s.alice_commit(&mut w.a).unwrap();
    w.advance(600);
    assert_eq!(w.balances()[0], 0);

    w.advance_to(172_799);
    assert_eq!(s.refund_alice(&mut w.a), Err(SwapError::TooEarly { now: SimTime(172_799), locktime: SimTime(172_800) }));
    w.advance(1);
    s.refund_alice(&mut w.a).unwrap();
    w.advance(600);
    s.sync(&w.a, &w.b);
    assert_eq!(s.phase(), Phase::Aborted);
    assert_eq!(w.balances(), before);
}

#[test]
fn refund_bob_after_alice_claimed_is_already_spent() {
    let mut w = world();
    let mut s = committed(&mut w);
    s.alice_claim(&mut w.b).unwrap();
    w.advance(5);
    assert_eq!(s.refund_bob(&mut w.b), Err(SwapError::AlreadySpent));
    w.advance_to(87_000);
    assert_eq!(s.refund_bob(&mut w.b), Err(SwapError::AlreadySpent));
}

#[test]
fn alice_claim_margin_boundary() {
    // TX4 locktime 87000, margin 2 * 5 s.
    let mut w = world();
    let s0 = committed(&mut w);
    w.advance_to(86_990);
    let mut s = s0.clone();
    assert!(s.alice_claim(&mut w.b).is_ok());

    let mut w = world();
    let mut s = committed(&mut w);
    w.advance_to(86_991);
    assert_eq!(s.alice_claim(&mut w.b), Err(SwapError::TooLate { now: SimTime(86_991), deadline: SimTime(86_990) }));
}

#[test]
fn last_instant_claim_leaves_bob_time() {
    let mut w = world();
    let mut s = committed(&mut w);
    w.advance_to(86_990);
    s.alice_claim(&mut w.b).unwrap();
    w.advance(5);
    s.bob_claim(&mut w.a, &w.b).unwrap();
    w.advance(600);
    s.refund_bob(&mut w.b).unwrap_err();
    w.advance_to(200_000);
    s.sync(&w.a, &w.b);
    assert_eq!(s.phase(), Phase::Completed);
    assert_eq!(w.balances(), [0, N.0, N.0, 0]);
}

#[test]
fn wrong_digest_leaves_both_whole() {
    let mut w = world();
    let before = w.balances();
    let mut s = SwapSession::setup(w.params(), &w.a, &w.b).unwrap();
    s.bob_cosign_refund_a().unwrap();
    s.alice_commit(&mut w.a).unwrap();
    w.advance(600);
    let bogus = Announcement { digest: hash_commit(&gen_secret(999)), ..s.announcement() };
    s.bob_build_and_commit(&w.a, &mut w.b, &bogus).unwrap();
    w.advance(5);
    assert_eq!(s.alice_claim(&mut w.b), Err(SwapError::Chain(ChainError::WitnessRejected(0))));
    assert_eq!(s.phase(), Phase::Tx3Broadcast);

    w.advance_to(87_000);
    s.refund_bob(&mut w.b).unwrap();
    w.advance_to(172_800);
    s.refund_alice(&mut w.a).unwrap();
    w.advance(600);
    s.sync(&w.a, &w.b);
    assert_eq!(s.phase(), Phase::Aborted);
    assert_eq!(w.balances(), before);
}

#[test]
fn fees_are_paid_by_each_transaction_owner() {
    let mut w = world_with(N.0 + 10, Features::default(), Features::default());
    w.b = Ledger::new(
        LedgerConfig::new(ChainId::new("XRP-sim").unwrap(), SimTime(5)),
        &[(w.bob.public(), Amount(N.0 + 10))],
        Arc::new({
            let mut r = KeyRegistry::new();
            r.register(&w.alice).unwrap();
            r.register(&w.bob).unwrap();
            r
        }),
    )
    .unwrap();
    let mut p = w.params();
    p.fee = Amount(10);
    let mut s = SwapSession::setup(p, &w.a, &w.b).unwrap();
    s.bob_cosign_refund_a().unwrap();
    s.alice_commit(&mut w.a).unwrap();
    w.advance(600);
    let ann = s.announcement();
    s.bob_build_and_commit(&w.a, &mut w.b, &ann).unwrap();
    w.advance(5);
    s.alice_claim(&mut w.b).unwrap();
    w.advance(5);
    s.bob_claim(&mut w.a, &w.b).unwrap();
    w.advance(600);
    assert_eq!(w.balances(), [0, N.0 - 10, N.0 - 10, 0]);
    assert_eq!(w.a.cumulative_fees(), Amount(20));
    assert!(w.a.is_conserved() && w.b.is_conserved());
}
