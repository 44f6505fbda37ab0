use proptest::prelude::*;

use nnpart::arena::{build_learner, run_episode, Environment, LearnerSettings, LossLedger, Metric, QuerySource};
use nnpart::numerics::sampling::SamplerConfig;

fn settings() -> LearnerSettings {
    LearnerSettings {
        sampler: SamplerConfig::new(512, 64),
        ..LearnerSettings::default()
    }
}

fn episode(metric: Metric, k: usize, d: usize, rounds: usize, source: QuerySource, seed: u64) -> LossLedger {
    let env = Environment::random(metric, k, d, 1.0, 0.0, seed).unwrap();
    let mut learner = build_learner(metric, k, d, 1.0, rounds, &settings(), seed).unwrap();
    run_episode(learner.as_mut(), &env, &source, rounds, seed, 0.05).unwrap()
}

fn check_ledger(l: &LossLedger) {
    let mut cum = 0.0;
    for r in &l.records {
        assert!(r.loss >= 0.0);
        if r.mistake {
            assert!(r.loss <= r.loss_bound + 1e-9, "round {}: {} > {}", r.round, r.loss, r.loss_bound);
        } else {
            assert_eq!(r.loss, 0.0);
            assert!(!r.robust_mistake);
        }
        assert!(r.cum_loss >= cum);
        cum = r.cum_loss;
    }
    assert_eq!(l.mistakes, l.records.iter().filter(|r| r.mistake).count());
    assert!(0.05 * l.robust_mistakes as f64 <= l.total_loss + 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ledgers_satisfy_their_invariants(
        seed in any::<u64>(),
        k in 2usize..5,
        d in 1usize..4,
        metric in prop_oneof![Just(Metric::InnerProduct), Just(Metric::L2), Just(Metric::Lp(4.0))],
        adaptive in any::<bool>(),
    ) {
        let source = if adaptive {
            QuerySource::AdaptiveWidth { candidates: 8 }
        } else {
            QuerySource::UniformBall
        };
        let l = episode(metric, k, d, 150, source, seed);
        prop_assert_eq!(l.rounds(), 150);
        check_ledger(&l);
    }
}

#[test]
fn prefix_of_a_longer_run_is_the_shorter_run() {
    let short = episode(Metric::InnerProduct, 3, 2, 200, QuerySource::UniformBall, 5);
    let long = episode(Metric::InnerProduct, 3, 2, 400, QuerySource::UniformBall, 5);
    assert_eq!(&long.records[..200], &short.records[..]);
    assert!(long.total_loss >= short.total_loss);
}

#[test]
fn same_seed_same_ledger() {
    for metric in [Metric::InnerProduct, Metric::L2, Metric::Lp(2.0)] {
        let a = episode(metric, 3, 3, 200, QuerySource::AdaptiveWidth { candidates: 16 }, 11);
        let b = episode(metric, 3, 3, 200, QuerySource::AdaptiveWidth { candidates: 16 }, 11);
        assert_eq!(a, b);
    }
}

#[test]
fn empty_episode() {
    let l = episode(Metric::InnerProduct, 2, 2, 0, QuerySource::UniformBall, 1);
    assert_eq!(l.rounds(), 0);
    assert_eq!(l.total_loss, 0.0);
}
