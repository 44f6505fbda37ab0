use nnpart::arena::{LowerBoundAdversary, LowerBoundEpisode, RandomGuesser, TwoPoint};
use nnpart::knowledge::ScaleSchedule;
use nnpart::numerics::norm;
use nnpart::numerics::sampling::SamplerConfig;
use nnpart::pairwise::PairwiseLearner;

#[test]
fn full_episode_packs_the_sphere() {
    let mut adv = LowerBoundAdversary::new(6, 256, 21).unwrap();
    while adv.points().len() < 256 {
        adv.step().unwrap();
    }
    let pts = adv.points();
    for (i, p) in pts.iter().enumerate() {
        assert!((norm(p) - 1.0).abs() < 1e-12);
        for q in &pts[..i] {
            let d: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(d >= adv.eps());
        }
    }
    let certified = adv.certified_steps();
    assert!(certified >= 100, "only {certified} certified steps");
    assert!(adv.margins()[..certified].iter().all(|&m| m > 0.0));
    // Margins shrink as points are added.
    assert!(adv.margins()[certified - 1] < adv.margins()[0]);
}

#[test]
fn cones_are_disjoint_early_on() {
    let mut adv = LowerBoundAdversary::new(6, 256, 22).unwrap();
    for _ in 0..30 {
        adv.step().unwrap();
    }
    assert!(adv.cone_overlap().unwrap() <= 1e-9);
    let (h, m) = adv.separating_hyperplane().unwrap();
    assert!(m > 0.0);
    assert!((adv.signed_margin(&h) - m).abs() < 1e-9);
}

#[test]
fn every_mistake_pays_the_floor() {
    let ep = LowerBoundEpisode::generate(6, 256, 23).unwrap();
    let ledger = ep.play(&mut RandomGuesser::new(2, 1)).unwrap();
    assert_eq!(ledger.rounds(), 254);
    assert!(ledger.mistakes > 0);
    for r in ledger.records.iter().filter(|r| r.mistake) {
        assert!(r.loss >= ep.loss_floor() - 1e-9);
    }
}

#[test]
fn a_potential_learner_can_play() {
    let ep = LowerBoundEpisode::generate(6, 120, 24).unwrap();
    let schedule = ScaleSchedule::for_horizon(6, 1.0, 118).unwrap();
    let learner = PairwiseLearner::new(schedule, SamplerConfig::new(512, 64), 3).unwrap();
    let ledger = ep.play(&mut TwoPoint(learner)).unwrap();
    assert_eq!(ledger.rounds(), 118);
    assert!(ledger.total_loss >= ledger.mistakes as f64 * (ep.loss_floor() - 1e-9));
}
