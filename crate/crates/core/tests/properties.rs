use proptest::prelude::*;
use swapsim_core::harness::{run_scenario, sweep_strategies, AdversaryStrategy, Engine, Scenario, Verdict};
use swapsim_core::Amount;

fn scenario(engine: Engine, seed: u64, fee: u64, d: (u64, u64), tl_b: u64, gap: u64, n: (u64, u64)) -> Scenario {
    let mut sc = Scenario::default_htlc(seed).with_engine(engine);
    sc.fee = Amount(fee);
    sc.chain_a.confirmation_delay = d.0;
    sc.chain_b.confirmation_delay = d.1;
    sc.swap.n1 = Amount(n.0);
    sc.swap.n2 = Amount(n.1);
    sc.chain_a.alice = Amount(n.0 + 20 * fee);
    sc.chain_b.bob = Amount(n.1 + 20 * fee);
    sc.swap.timelock_b = tl_b;
    sc.swap.timelock_a = tl_b + 3 * d.0 + d.1 + gap;
    sc
}

/// Strategies that keep every party online before its own deadline.
fn covered(sc: &Scenario) -> Vec<AdversaryStrategy> {
    let last_step = sc.step_count();
    std::iter::once(AdversaryStrategy::Honest)
        .chain(sweep_strategies(sc))
        .filter(|s| !matches!(s, AdversaryStrategy::DelayStep { k, .. } if *k == last_step))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn htlc_and_channel_never_unsafe(
        seed in any::<u64>(),
        fee in 0..50u64,
        d in (1..1200u64, 1..1200u64),
        tl_b in 20_000..200_000u64,
        gap in 0..50_000u64,
        n in (1..1_000_000u64, 1..1_000_000u64),
        channel in any::<bool>(),
    ) {
        let engine = if channel { Engine::ChannelOffchain } else { Engine::HtlcOnchain };
        let base = scenario(engine, seed, fee, d, tl_b, gap, n);
        for st in covered(&base) {
            let t = run_scenario(&base.clone().with_adversary(st)).unwrap();
            prop_assert!(t.verdict.is_safe(), "{:?} {:?}", st, t.verdict);
            prop_assert!(t.is_time_ordered());
            prop_assert_eq!(t.verdict_from_events(), t.verdict);
            prop_assert!(t.incentives.is_conserved());
            if st == AdversaryStrategy::Honest {
                prop_assert_eq!(t.verdict, Verdict::SwapCompleted);
            }
        }
    }

    #[test]
    fn random_delays_before_the_last_step_are_safe(
        seed in any::<u64>(),
        k in 1..8usize,
        dt in 0..400_000u64,
        channel in any::<bool>(),
    ) {
        let engine = if channel { Engine::ChannelOffchain } else { Engine::HtlcOnchain };
        let base = Scenario::default_htlc(seed).with_engine(engine);
        let k = 1 + (k - 1) % (base.step_count() - 1);
        let t = run_scenario(&base.with_adversary(AdversaryStrategy::DelayStep { k, dt })).unwrap();
        prop_assert!(t.verdict.is_safe(), "k={} dt={} {:?}", k, dt, t.verdict);
    }

    #[test]
    fn same_seed_same_bytes(seed in any::<u64>(), k in 0..9usize) {
        let sc = Scenario::default_htlc(seed).with_adversary(AdversaryStrategy::AbortAfterStep { k });
        prop_assert_eq!(run_scenario(&sc).unwrap().to_jsonl(), run_scenario(&sc).unwrap().to_jsonl());
    }
}
