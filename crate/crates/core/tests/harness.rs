use sha2::{Digest as _, Sha256};
use swapsim_core::harness::runner::last_safe_claim_delay;
use swapsim_core::harness::{
    compare_baselines, enumerate_abort_points, run_scenario, sweep_strategies, AdversaryStrategy, Engine, EventKind, Party,
    RefundSide, RunError, Scenario, ScenarioTrace, Verdict,
};
use swapsim_core::swap::SwapError;
use swapsim_core::{Amount, SimTime};

const N: i128 = 12_345_000;

fn times(t: &ScenarioTrace, kind: EventKind, step: &str) -> Vec<u64> {
    t.events_of(kind).filter(|e| e.step.as_deref() == Some(step)).map(|e| e.time.0).collect()
}

#[test]
fn honest_default_hand_trace() {
    let t = run_scenario(&Scenario::default_htlc(42)).unwrap();
    assert_eq!(t.verdict, Verdict::SwapCompleted);
    assert_eq!(t.deltas().as_array(), [-N, N, N, -N]);
    assert_eq!(t.deviator, None);
    assert_eq!(times(&t, EventKind::Confirm, "alice_commit"), [600]);
    assert_eq!(times(&t, EventKind::Confirm, "bob_commit"), [605]);
    assert_eq!(times(&t, EventKind::Confirm, "alice_claim"), [610]);
    assert_eq!(times(&t, EventKind::Confirm, "bob_claim"), [1210]);
    let first_reveal = t.events_of(EventKind::Reveal).next().unwrap();
    assert_eq!(first_reveal.chain.as_ref().unwrap().as_str(), "XRP-sim");
    assert!(first_reveal.time < SimTime(1210));
}

#[test]
fn honest_default_trace_is_frozen() {
    // Digest of the JSON-lines trace, computed with sha256sum.
    let t = run_scenario(&Scenario::default_htlc(42)).unwrap();
    let jsonl = t.to_jsonl();
    assert_eq!(jsonl.len(), 3482);
    assert_eq!(hex::encode(Sha256::digest(jsonl.as_bytes())), "bcfbeb66fe5cab5aa201d72350c408bee142b8568b7f856206cb0c32b98ed8a2");
}

#[test]
fn abort_after_alice_commit_refunds_at_locktime() {
    let sc = Scenario::default_htlc(42).with_adversary(AdversaryStrategy::AbortAfterStep { k: 3 });
    let t = run_scenario(&sc).unwrap();
    assert_eq!(t.verdict, Verdict::BothRefunded);
    assert!(t.deltas().is_zero());
    assert_eq!(t.deviator, Some(Party::Bob));
    assert_eq!(times(&t, EventKind::Broadcast, "refund_alice"), [172_800]);
    assert_eq!(times(&t, EventKind::Confirm, "refund_alice"), [173_400]);
    let on_b = t.events_of(EventKind::Broadcast).filter(|e| e.chain.as_ref().unwrap().as_str() == "XRP-sim").count();
    assert_eq!(on_b, 0);
}

#[test]
fn setup_errors_surface() {
    let mut sc = Scenario::default_htlc(1);
    sc.swap.timelock_b = sc.swap.timelock_a;
    assert!(matches!(run_scenario(&sc), Err(RunError::Swap(SwapError::TimelockOrderingViolation { .. }))));
    sc.swap.timelock_b = sc.swap.timelock_a + 1;
    assert!(matches!(run_scenario(&sc), Err(RunError::Swap(SwapError::TimelockOrderingViolation { .. }))));
}

#[test]
fn sweep_covers_required_points() {
    let sc = Scenario::default_htlc(42);
    let all = sweep_strategies(&sc);
    assert!(all.len() >= 10);
    assert!(all.contains(&AdversaryStrategy::WrongDigest));
    assert!(all.contains(&AdversaryStrategy::RefuseCosign { which: RefundSide::RefundA }));
    assert!(all.contains(&AdversaryStrategy::RefuseCosign { which: RefundSide::RefundB }));
    assert_eq!(last_safe_claim_delay(&sc), 86_385);
}

#[test]
fn sweep_is_safe_for_htlc_and_channel() {
    for engine in [Engine::HtlcOnchain, Engine::ChannelOffchain] {
        let sc = Scenario::default_htlc(42).with_engine(engine);
        for (st, t) in enumerate_abort_points(&sc).unwrap() {
            assert!(t.verdict.is_safe(), "{engine:?} {st:?} {:?}", t.verdict);
        }
    }
}

#[test]
fn last_instant_claim_completes_and_one_second_later_refunds() {
    let sc = Scenario::default_htlc(42);
    let dt = last_safe_claim_delay(&sc);
    let on_time = run_scenario(&sc.clone().with_adversary(AdversaryStrategy::DelayStep { k: 7, dt })).unwrap();
    assert_eq!(on_time.verdict, Verdict::SwapCompleted);
    assert_eq!(times(&on_time, EventKind::Broadcast, "alice_claim"), [86_990]);
    // Bob's claim lands well before Alice's refund opens.
    assert_eq!(times(&on_time, EventKind::Confirm, "bob_claim"), [87_595]);

    let late = run_scenario(&sc.with_adversary(AdversaryStrategy::DelayStep { k: 7, dt: dt + 1 })).unwrap();
    assert_eq!(late.verdict, Verdict::BothRefunded);
    assert_eq!(late.events_of(EventKind::StepFailed).count(), 1);
}

#[test]
fn bob_offline_past_his_deadline_loses() {
    // The protocol assumes each party acts before its own deadline. Bob
    // sleeping through his is not covered.
    let sc = Scenario::default_htlc(42).with_adversary(AdversaryStrategy::DelayStep { k: 8, dt: 172_800 });
    let t = run_scenario(&sc).unwrap();
    assert_eq!(t.verdict, Verdict::Unsafe { deltas: swapsim_core::swap::Deltas::between([0; 4], [0, N, 0, -N]) });
    assert_eq!(t.deviator, Some(Party::Bob));
}

#[test]
fn baseline_sweep_has_unsafe_point() {
    let sc = Scenario::default_htlc(42).with_engine(Engine::P2ptradex);
    let unsafe_points: Vec<_> =
        enumerate_abort_points(&sc).unwrap().into_iter().filter(|(_, t)| !t.verdict.is_safe()).map(|(st, _)| st).collect();
    assert_eq!(unsafe_points, [AdversaryStrategy::AbortAfterStep { k: 1 }, AdversaryStrategy::Deny]);
}

#[test]
fn compare_baselines_contrast() {
    let rows = compare_baselines(&Scenario::default_htlc(42)).unwrap();
    let key: Vec<_> = rows.iter().map(|t| (t.engine, t.strategy, t.verdict.name())).collect();
    assert_eq!(
        key,
        [
            (Engine::P2ptradex, AdversaryStrategy::Honest, "swap_completed"),
            (Engine::P2ptradex, AdversaryStrategy::Deny, "unsafe"),
            (Engine::HtlcOnchain, AdversaryStrategy::Honest, "swap_completed"),
            (Engine::HtlcOnchain, AdversaryStrategy::Deny, "both_refunded"),
        ]
    );
    assert_eq!(rows[1].deltas().alice_a, -N);
    assert!(rows[3].deltas().is_zero());
    assert_eq!(rows[0].deltas(), rows[2].deltas());
}

#[test]
fn traces_are_ordered_and_self_describing() {
    for engine in [Engine::HtlcOnchain, Engine::ChannelOffchain, Engine::P2ptradex] {
        let mut sc = Scenario::default_htlc(5).with_engine(engine);
        sc.fee = Amount(7);
        sc.chain_a.alice = Amount(12_345_100);
        sc.chain_b.bob = Amount(12_345_100);
        for (st, t) in enumerate_abort_points(&sc).unwrap() {
            assert!(t.is_time_ordered(), "{engine:?} {st:?}");
            assert_eq!(t.verdict_from_events(), t.verdict, "{engine:?} {st:?}");
        }
    }
}

#[test]
fn incentives_settle_and_conserve() {
    let sc = Scenario::default_htlc(42);
    let honest = run_scenario(&sc).unwrap();
    assert_eq!((honest.incentives.alice.reputation, honest.incentives.bob.reputation), (1, 1));
    assert_eq!((honest.incentives.alice.net, honest.incentives.bob.net), (0, 0));

    let deny = run_scenario(&sc.clone().with_adversary(AdversaryStrategy::Deny)).unwrap();
    assert_eq!(deny.incentives.bob.reputation, -1);
    assert_eq!(deny.incentives.bob.net, -13_888_125);
    assert_eq!(deny.incentives.alice.net, 13_888_125);

    for engine in [Engine::HtlcOnchain, Engine::ChannelOffchain, Engine::P2ptradex] {
        for (_, t) in enumerate_abort_points(&sc.clone().with_engine(engine)).unwrap() {
            assert!(t.incentives.is_conserved());
            assert_eq!(t.incentives.held(), Amount::ZERO);
        }
    }
}

#[test]
fn spam_fee_is_charged_to_both() {
    let mut sc = Scenario::default_htlc(42);
    sc.spam_fee = Amount(1_000);
    let t = run_scenario(&sc).unwrap();
    assert_eq!(t.incentives.alice.fees_paid, Amount(1_000));
    assert_eq!(t.incentives.bob.fees_paid, Amount(1_000));
}

#[test]
fn determinism() {
    for engine in [Engine::HtlcOnchain, Engine::ChannelOffchain, Engine::P2ptradex] {
        let sc = Scenario::default_htlc(77).with_engine(engine).with_adversary(AdversaryStrategy::AbortAfterStep { k: 2 });
        assert_eq!(run_scenario(&sc).unwrap().to_jsonl(), run_scenario(&sc).unwrap().to_jsonl());
    }
    let a = run_scenario(&Scenario::default_htlc(1)).unwrap().to_jsonl();
    let b = run_scenario(&Scenario::default_htlc(2)).unwrap().to_jsonl();
    assert_ne!(a, b);
}

#[test]
fn channel_swap_touches_ledgers_only_to_open_and_close() {
    let t = run_scenario(&Scenario::default_htlc(42).with_engine(Engine::ChannelOffchain)).unwrap();
    assert_eq!(t.verdict, Verdict::SwapCompleted);
    let steps: Vec<_> = t.events_of(EventKind::Confirm).map(|e| e.step.as_deref().unwrap()).collect();
    assert_eq!(steps, ["open_channel", "open_channel", "close_channel", "close_channel"]);
    let seqs: Vec<_> = t.events_of(EventKind::ChannelUpdate).map(|e| e.state_seq.unwrap()).collect();
    assert_eq!(seqs, [0, 0, 1, 1, 2, 2]);
}
