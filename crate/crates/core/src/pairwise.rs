//! Two-center sign learners.
//!
//! With similarity `-⟨q, x⟩`, the first center is nearest iff
//! `⟨q, w⟩ ≥ 0` for `w = x₁ - x₂`, so deciding the label is contextual
//! search for `w` with only the sign revealed. The learner guesses the first
//! center when the contextual-search guess is nonnegative and updates only
//! when it was wrong, where the sign of `⟨q, w⟩` is known to contradict the
//! guess. Every cut passes on the far side of the origin, so the origin stays
//! in the knowledge set and the width bounds `|⟨q, w⟩|`.

use crate::csearch::{CSearchState, Feedback};
use crate::error::{check_dim, Result};
use crate::kernels::{self, EvenPKernel};
use crate::knowledge::{PotentialEstimate, ScaleSchedule};
use crate::numerics::sampling::SamplerConfig;

/// One of the two centers of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    First,
    Second,
}

impl Side {
    pub fn flip(self) -> Self {
        match self {
            Side::First => Side::Second,
            Side::Second => Side::First,
        }
    }
}

/// The interface the k-center reduction needs from a two-center learner.
///
/// `loss_bound` bounds the loss of a wrong answer on `q` in the units the
/// environment reports; `drop_bound` is the guaranteed potential drop if
/// `hypothetical` turned out to be the truth.
pub trait TwoCenterLearner {
    /// Dimension of the queries the learner accepts.
    fn query_dim(&self) -> usize;

    /// Predicts a side without changing the learned state.
    fn predict(&mut self, q: &[f64]) -> Result<Side>;

    /// Absorbs the true side for a query previously passed to `predict`.
    fn observe(&mut self, q: &[f64], predicted: Side, truth: Side) -> Result<()>;

    fn loss_bound(&mut self, q: &[f64]) -> Result<f64>;

    /// `loss_bound` when `hypothetical` differs from the prediction, else 0.
    fn drop_bound(&mut self, q: &[f64], hypothetical: Side) -> Result<f64> {
        let predicted = self.predict(q)?;
        if predicted != hypothetical {
            self.loss_bound(q)
        } else {
            Ok(0.0)
        }
    }

    /// Scale index the learner would use for `q`, if it has one.
    fn scale_index(&mut self, q: &[f64]) -> Result<Option<i32>>;

    /// Number of state updates applied so far.
    fn updates(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq)]
struct Proposal {
    query: Vec<f64>,
    side: Side,
    guess: f64,
    index: i32,
}

/// Inner-product two-center learner over the difference vector `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseLearner {
    cs: CSearchState,
    alpha: f64,
    proposal: Option<Proposal>,
    updates: usize,
}

impl PairwiseLearner {
    pub fn new(schedule: ScaleSchedule, sampler: SamplerConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            alpha: schedule.alpha,
            cs: CSearchState::new(schedule, sampler, seed)?,
            proposal: None,
            updates: 0,
        })
    }

    pub fn search(&self) -> &CSearchState {
        &self.cs
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The proposal for `q`: when the knowledge set lies on one side of the
    /// hyperplane `⟨q, ·⟩ = 0` the side is decided without sampling.
    fn propose(&mut self, q: &[f64]) -> Result<Proposal> {
        check_dim("query", self.cs.knowledge().dim(), q.len())?;
        if let Some(p) = &self.proposal {
            if p.query == q {
                return Ok(p.clone());
            }
        }
        let (lo, hi) = self.cs.knowledge().range(q)?;
        let (side, guess, index) = if lo >= 0.0 {
            (Side::First, 0.0, self.cs.index_for(q)?)
        } else if hi <= 0.0 {
            (Side::Second, 0.0, self.cs.index_for(q)?)
        } else {
            let (g, i) = self.cs.guess(q)?;
            let side = if g >= 0.0 { Side::First } else { Side::Second };
            (side, g, i)
        };
        let p = Proposal {
            query: q.to_vec(),
            side,
            guess,
            index,
        };
        self.proposal = Some(p.clone());
        Ok(p)
    }

    /// The contextual-search guess behind the last prediction on `q`.
    pub fn guess(&mut self, q: &[f64]) -> Result<(f64, i32)> {
        let p = self.propose(q)?;
        Ok((p.guess, p.index))
    }

    pub fn width(&self, q: &[f64]) -> Result<f64> {
        self.cs.width(q)
    }

    pub fn potential(&self, n: usize, seed: u64) -> Result<PotentialEstimate> {
        self.cs.knowledge().potential(self.cs.schedule(), n, seed)
    }
}

impl TwoCenterLearner for PairwiseLearner {
    fn query_dim(&self) -> usize {
        self.cs.knowledge().dim()
    }

    fn predict(&mut self, q: &[f64]) -> Result<Side> {
        Ok(self.propose(q)?.side)
    }

    fn observe(&mut self, q: &[f64], predicted: Side, truth: Side) -> Result<()> {
        if predicted == truth {
            self.proposal = None;
            return Ok(());
        }
        let p = self.propose(q)?;
        self.proposal = None;
        let feedback = match truth {
            Side::First => Feedback::Low,
            Side::Second => Feedback::High,
        };
        self.cs.feedback(q, p.guess, feedback)?;
        self.updates += 1;
        Ok(())
    }

    fn loss_bound(&mut self, q: &[f64]) -> Result<f64> {
        Ok(self.cs.width(q)?.powf(self.alpha))
    }

    fn scale_index(&mut self, q: &[f64]) -> Result<Option<i32>> {
        Ok(Some(self.propose(q)?.index))
    }

    fn updates(&self) -> usize {
        self.updates
    }
}

impl<T: TwoCenterLearner + ?Sized> TwoCenterLearner for Box<T> {
    fn query_dim(&self) -> usize {
        (**self).query_dim()
    }

    fn predict(&mut self, q: &[f64]) -> Result<Side> {
        (**self).predict(q)
    }

    fn observe(&mut self, q: &[f64], predicted: Side, truth: Side) -> Result<()> {
        (**self).observe(q, predicted, truth)
    }

    fn loss_bound(&mut self, q: &[f64]) -> Result<f64> {
        (**self).loss_bound(q)
    }

    fn drop_bound(&mut self, q: &[f64], hypothetical: Side) -> Result<f64> {
        (**self).drop_bound(q, hypothetical)
    }

    fn scale_index(&mut self, q: &[f64]) -> Result<Option<i32>> {
        (**self).scale_index(q)
    }

    fn updates(&self) -> usize {
        (**self).updates()
    }
}

/// Maps queries into a lifted space where nearest centers maximize an inner
/// product, and converts lifted loss bounds back to distance units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QueryLift {
    /// L² distance through the paraboloid lift.
    Euclidean { d: usize },
    /// Even-p L^p distance through the monomial lift, queries scaled by
    /// `query_scale` and negated.
    EvenP(EvenPKernel),
}

impl QueryLift {
    pub fn input_dim(&self) -> usize {
        match self {
            QueryLift::Euclidean { d } => *d,
            QueryLift::EvenP(k) => k.d,
        }
    }

    pub fn lifted_dim(&self) -> usize {
        match self {
            QueryLift::Euclidean { d } => d + 1,
            QueryLift::EvenP(k) => k.lifted_dim(),
        }
    }

    pub fn lift_query(&self, q: &[f64]) -> Result<Vec<f64>> {
        match self {
            QueryLift::Euclidean { .. } => kernels::l2_lift_query(q),
            QueryLift::EvenP(k) => {
                let s = k.query_scale();
                Ok(k.lift_query(q)?.into_iter().map(|v| -s * v).collect())
            }
        }
    }

    pub fn lift_center(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            QueryLift::Euclidean { .. } => kernels::l2_lift_center(x),
            QueryLift::EvenP(k) => k.lift_center(x),
        }
    }

    /// Distance-loss bound implied by a lifted inner-product loss bound.
    pub fn loss_from_lifted(&self, lifted: f64) -> f64 {
        match self {
            QueryLift::Euclidean { .. } => kernels::l2_loss_from_lifted(lifted),
            QueryLift::EvenP(k) => k.loss_from_lifted(lifted),
        }
    }
}

/// A pairwise learner running in a lifted space. Loss bounds are reported in
/// original distance units raised to `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPairwise {
    inner: PairwiseLearner,
    lift: QueryLift,
    alpha: f64,
    cached: Option<(Vec<f64>, Vec<f64>)>,
}

impl LiftedPairwise {
    /// `schedule` is over the lifted dimension with unit exponent; `alpha`
    /// applies to the original distance loss.
    pub fn new(
        lift: QueryLift,
        schedule: ScaleSchedule,
        sampler: SamplerConfig,
        alpha: f64,
        seed: u64,
    ) -> Result<Self> {
        check_dim("lifted schedule", lift.lifted_dim(), schedule.d)?;
        Ok(Self {
            inner: PairwiseLearner::new(schedule, sampler, seed)?,
            lift,
            alpha,
            cached: None,
        })
    }

    pub fn inner(&self) -> &PairwiseLearner {
        &self.inner
    }

    pub fn lift(&self) -> &QueryLift {
        &self.lift
    }

    fn lifted(&mut self, q: &[f64]) -> Result<Vec<f64>> {
        if let Some((raw, lifted)) = &self.cached {
            if raw == q {
                return Ok(lifted.clone());
            }
        }
        let lifted = self.lift.lift_query(q)?;
        self.cached = Some((q.to_vec(), lifted.clone()));
        Ok(lifted)
    }
}

impl TwoCenterLearner for LiftedPairwise {
    fn query_dim(&self) -> usize {
        self.lift.input_dim()
    }

    fn predict(&mut self, q: &[f64]) -> Result<Side> {
        let l = self.lifted(q)?;
        self.inner.predict(&l)
    }

    fn observe(&mut self, q: &[f64], predicted: Side, truth: Side) -> Result<()> {
        let l = self.lifted(q)?;
        self.inner.observe(&l, predicted, truth)
    }

    fn loss_bound(&mut self, q: &[f64]) -> Result<f64> {
        let l = self.lifted(q)?;
        let width = self.inner.width(&l)?;
        Ok(self.lift.loss_from_lifted(width).powf(self.alpha))
    }

    fn scale_index(&mut self, q: &[f64]) -> Result<Option<i32>> {
        let l = self.lifted(q)?;
        self.inner.scale_index(&l)
    }

    fn updates(&self) -> usize {
        self.inner.updates()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dot;
    use crate::numerics::lp::Relation;
    use crate::numerics::sampling::{rng_from, uniform_in_ball};

    fn learner(d: usize, alpha: f64, seed: u64) -> PairwiseLearner {
        let schedule = ScaleSchedule::for_horizon(d, alpha, 1000).unwrap();
        PairwiseLearner::new(schedule, SamplerConfig::new(2048, 128), seed).unwrap()
    }

    #[test]
    fn fresh_learner_ties_to_first() {
        let mut l = learner(1, 1.0, 1);
        // A fresh 1-D set [-2, 2] has median 0 up to sampling error; the
        // decision follows the sign of the guess.
        let (g, _) = l.guess(&[1.0]).unwrap();
        let side = l.predict(&[1.0]).unwrap();
        assert_eq!(side, if g >= 0.0 { Side::First } else { Side::Second });
        assert!(g.abs() < 0.2);
    }

    #[test]
    fn positive_interval_predicts_first() {
        let mut l = learner(1, 1.0, 2);
        l.cs.feedback(&[1.0], 0.5, Feedback::Low).unwrap();
        l.cs.feedback(&[1.0], 1.0, Feedback::High).unwrap();
        assert_eq!(l.predict(&[1.0]).unwrap(), Side::First);
        assert_eq!(l.predict(&[-1.0]).unwrap(), Side::Second);
    }

    #[test]
    fn correct_rounds_roll_back() {
        let mut l = learner(3, 1.0, 3);
        let before = l.search().knowledge().clone();
        let q = [0.3, -0.2, 0.5];
        let side = l.predict(&q).unwrap();
        l.observe(&q, side, side).unwrap();
        assert_eq!(l.search().knowledge(), &before);
        assert_eq!(l.updates(), 0);
    }

    #[test]
    fn mistakes_cut_in_the_truthful_direction() {
        let mut l = learner(3, 1.0, 4);
        let q = [1.0, 0.0, 0.0];
        let side = l.predict(&q).unwrap();
        let (g, _) = l.guess(&q).unwrap();
        l.observe(&q, side, side.flip()).unwrap();
        let cut = &l.search().knowledge().cut_log()[0];
        assert_eq!(cut.offset, g);
        let expect = match side.flip() {
            Side::First => Relation::Ge,
            Side::Second => Relation::Le,
        };
        assert_eq!(cut.relation, expect);
        let q2 = [0.0, 1.0, 0.0];
        let side2 = l.predict(&q2).unwrap();
        l.observe(&q2, side2, side2.flip()).unwrap();
        assert_eq!(l.search().knowledge().cut_log().len(), 2);
        // Both cuts keep the origin.
        assert!(l.search().knowledge().contains(&[0.0; 3]).unwrap());
    }

    #[test]
    fn loss_bounds() {
        let mut l = learner(3, 1.0, 5);
        assert!((l.loss_bound(&[1.0, 0.0, 0.0]).unwrap() - 4.0).abs() < 1e-12);
        let mut h = learner(3, 0.5, 5);
        assert!((h.loss_bound(&[1.0, 0.0, 0.0]).unwrap() - 2.0).abs() < 1e-12);
        let mut flat = learner(1, 1.0, 6);
        flat.cs.feedback(&[1.0], 0.25, Feedback::Low).unwrap();
        flat.cs.feedback(&[1.0], 0.25, Feedback::High).unwrap();
        assert!(flat.loss_bound(&[1.0]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn drop_bounds_split_the_loss_bound() {
        let mut l = learner(2, 1.0, 7);
        let q = [0.6, -0.8];
        let predicted = l.predict(&q).unwrap();
        let lb = l.loss_bound(&q).unwrap();
        assert_eq!(l.drop_bound(&q, predicted.flip()).unwrap(), lb);
        assert_eq!(l.drop_bound(&q, predicted).unwrap(), 0.0);
    }

    #[test]
    fn honest_episode_invariants() {
        let mut rng = rng_from(8);
        let x1 = uniform_in_ball(&mut rng, 2);
        let x2 = uniform_in_ball(&mut rng, 2);
        let w: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
        let mut l = learner(2, 1.0, 9);
        let probe = [0.8, 0.6];
        let mut last_bound = l.loss_bound(&probe).unwrap();
        for _ in 0..300 {
            let q = uniform_in_ball(&mut rng, 2);
            let predicted = l.predict(&q).unwrap();
            let value = dot(&q, &w);
            let truth = if value >= 0.0 { Side::First } else { Side::Second };
            if predicted != truth {
                assert!(value.abs() <= l.loss_bound(&q).unwrap() + 1e-9);
            }
            l.observe(&q, predicted, truth).unwrap();
            assert!(l.search().knowledge().contains(&w).unwrap());
            let bound = l.loss_bound(&probe).unwrap();
            assert!(bound <= last_bound + 1e-9);
            last_bound = bound;
        }
        assert!(l.updates() > 0);
    }

    #[test]
    fn lifted_euclidean_learner_tracks_nearest_center() {
        let mut rng = rng_from(10);
        let x1 = [0.3, -0.4];
        let x2 = [-0.5, 0.1];
        let lift = QueryLift::Euclidean { d: 2 };
        let schedule = ScaleSchedule::for_horizon(3, 1.0, 500).unwrap();
        let mut l = LiftedPairwise::new(lift, schedule, SamplerConfig::new(1024, 64), 1.0, 11).unwrap();
        let w: Vec<f64> = lift
            .lift_center(&x1)
            .unwrap()
            .iter()
            .zip(&lift.lift_center(&x2).unwrap())
            .map(|(a, b)| a - b)
            .collect();
        for _ in 0..200 {
            let q = uniform_in_ball(&mut rng, 2);
            let d1 = kernels::lp_distance(&q, &x1, 2.0);
            let d2 = kernels::lp_distance(&q, &x2, 2.0);
            let truth = if d1 <= d2 { Side::First } else { Side::Second };
            let predicted = l.predict(&q).unwrap();
            if predicted != truth {
                assert!((d1 - d2).abs() <= l.loss_bound(&q).unwrap() + 1e-9);
            }
            l.observe(&q, predicted, truth).unwrap();
            assert!(l.inner().search().knowledge().contains(&w).unwrap());
        }
    }
}
