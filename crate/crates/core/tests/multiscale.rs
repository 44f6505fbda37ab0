use std::collections::BTreeMap;

use nnpart::arena::{run_episode, Environment, Metric, QuerySource, TwoPoint};
use nnpart::multiscale::{MultiscaleConfig, MultiscaleLearner, Selection};
use nnpart::numerics::sampling::{rng_from, uniform_in_ball, SamplerConfig};
use nnpart::pairwise::{Side, TwoCenterLearner};

#[test]
fn paper_constants_keep_the_truth_and_start_at_scale_one() {
    let env = Environment::random(Metric::Lp(2.5), 2, 1, 1.0, 0.5, 3).unwrap();
    let cfg = MultiscaleConfig {
        separation: Some(0.5),
        i_cap: 2,
        sampler: SamplerConfig::new(256, 32),
        ..MultiscaleConfig::new(2.5, 1, 4).unwrap()
    };
    let mut learner = MultiscaleLearner::new(cfg).unwrap();
    let mut rng = rng_from(5);
    let mut seen = BTreeMap::new();
    for _ in 0..25 {
        let q = uniform_in_ball(&mut rng, 1);
        let truth = if env.nearest(&q) == 0 { Side::First } else { Side::Second };
        let sel = learner.predict_detail(&q).unwrap().selection;
        assert_eq!(sel, Selection::Scale(1));
        let guess = learner.predict(&q).unwrap();
        learner.observe(&q, guess, truth).unwrap();
        let v = learner.new_truth_violation(&env.centers[0], &env.centers[1], &mut seen).unwrap();
        assert!(v <= 0.0, "violation {v}");
    }
}

#[test]
fn desk_episode_losses_stay_under_bounds() {
    let env = Environment::random(Metric::Lp(3.5), 2, 1, 1.0, 0.4, 8).unwrap();
    let cfg = MultiscaleConfig {
        p: 3.5,
        d: 1,
        alpha: 1.0,
        c_scale: 2.0,
        selection_constant: 1.0,
        slack_constant: 3.0,
        i_cap: 3,
        separation: Some(0.4),
        sampler: SamplerConfig::new(512, 64),
        seed: 9,
    };
    let mut learner = TwoPoint(MultiscaleLearner::new(cfg).unwrap());
    let ledger = run_episode(&mut learner, &env, &QuerySource::UniformBall, 300, 10, 0.0).unwrap();
    assert!(ledger.bound_violations(1e-9).is_empty());
    assert!(learner.0.truth_violation(&env.centers[0], &env.centers[1]).unwrap() <= 0.0);
    assert!(learner.0.updates() > 0);
}
