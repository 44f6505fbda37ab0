//! The sphere-packing adversary for general convex regions.
//!
//! Points are placed on the unit sphere, each on a hyperplane through the
//! origin that strictly separates the label-0 points from the label-1 points,
//! and at least `ε = T^(-1/(d-2))` from every earlier point. Labels are fair
//! coin flips. The regions are the convex hulls of each label's points; a
//! wrong guess costs the distance to the guessed region, which is at least
//! `ε²/2` because every other point lies below the cap of depth `ε²/2`
//! around the query.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::lp::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::numerics::minnorm::distance_to_hull;
use crate::numerics::sampling::rng_from;
use crate::numerics::{dot, mix_seed, norm};

use super::episode::OnlineLearner;
use super::ledger::{LossLedger, RoundRecord};

/// Rejection-sampling budget for one packing point.
pub const PACKING_TRIES: usize = 100_000;
/// Margins at or below this are treated as numerically zero.
pub const MARGIN_TOL: f64 = 1e-12;
/// The cone-overlap LP is only trusted while the margin exceeds this; below
/// it the LP's feasibility tolerance can report a spurious overlap.
const CONE_CHECK_MARGIN: f64 = 1e-6;
const CONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LowerBoundAdversary {
    d: usize,
    horizon: usize,
    eps: f64,
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    /// Separation margin before each step.
    margins: Vec<f64>,
    last_normal: Option<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl LowerBoundAdversary {
    /// Starts from `e₁` (label 0) and `-e₁` (label 1). `horizon` counts
    /// every point, the two starting ones included.
    pub fn new(d: usize, horizon: usize, seed: u64) -> Result<Self> {
        if d < 5 {
            return Err(Error::Config(format!("lower-bound adversary needs d >= 5, got {d}")));
        }
        if horizon < 2 {
            return Err(Error::Config("horizon must cover the two starting points".into()));
        }
        let eps = (horizon as f64).powf(-1.0 / (d as f64 - 2.0));
        let mut e1 = vec![0.0; d];
        e1[0] = 1.0;
        let minus: Vec<f64> = e1.iter().map(|x| -x).collect();
        Ok(Self {
            d,
            horizon,
            eps,
            points: vec![e1, minus],
            labels: vec![0, 1],
            margins: Vec::new(),
            last_normal: None,
            rng: rng_from(seed),
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Per-mistake loss floor `ε²/2`.
    pub fn loss_floor(&self) -> f64 {
        self.eps * self.eps / 2.0
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Separation margin of the label sets before each step so far.
    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    /// Max-margin hyperplane through the origin: maximize `s` subject to
    /// `⟨h, x⟩ ≥ s` on label 0, `⟨h, x⟩ ≤ -s` on label 1, `‖h‖∞ ≤ 1`.
    /// Returns the unit normal and the margin, which is positive exactly when
    /// the two label sets are strictly separated.
    pub fn separating_hyperplane(&self) -> Result<(Vec<f64>, f64)> {
        max_margin(self.d, &self.points, &self.labels)
    }

    /// `max Σλ + Σμ` subject to `Σ λ_a a = Σ μ_b b`, `λ, μ ≥ 0`,
    /// `Σλ + Σμ ≤ 1`: zero exactly when the two cones meet only at the
    /// origin (and neither contains a line).
    pub fn cone_overlap(&self) -> Result<f64> {
        let n = self.points.len();
        let mut lp = LinearProgram::new(vec![1.0; n]).with_bounds(vec![(0.0, f64::INFINITY); n]);
        for c in 0..self.d {
            let row = self
                .points
                .iter()
                .zip(&self.labels)
                .map(|(x, &l)| if l == 0 { x[c] } else { -x[c] })
                .collect();
            lp.constrain(row, Relation::Eq, 0.0);
        }
        lp.constrain(vec![1.0; n], Relation::Le, 1.0);
        match solve_lp(&lp, Sense::Maximize)? {
            LpStatus::Optimal { value, .. } => Ok(value),
            other => Err(Error::SolverFailure(format!("cone LP: {other:?}"))),
        }
    }

    /// Number of leading steps whose label sets were certified strictly
    /// separated (margin above [`MARGIN_TOL`]).
    pub fn certified_steps(&self) -> usize {
        self.margins.iter().take_while(|&&m| m > MARGIN_TOL).count()
    }

    /// Smallest signed distance of the points to the hyperplane with unit
    /// normal `h`, label-1 points counted on the negative side.
    pub fn signed_margin(&self, h: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(&self.labels)
            .map(|(x, &l)| if l == 0 { dot(x, h) } else { -dot(x, h) })
            .fold(f64::INFINITY, f64::min)
    }

    /// Places the next point and draws its label.
    ///
    /// Each step roughly halves the set of separating directions, so after a
    /// few hundred steps the margin falls below what `f64` can certify. From
    /// then on the last certified hyperplane is kept for every remaining
    /// step; new points lie on it, so it still separates the label sets up to
    /// rounding.
    pub fn step(&mut self) -> Result<(Vec<f64>, usize)> {
        if self.points.len() >= self.horizon {
            return Err(Error::AdversaryExhausted(format!(
                "all {} packing points used",
                self.horizon
            )));
        }
        let certified = self.certified_steps() == self.margins.len();
        let fresh = if certified {
            match self.separating_hyperplane() {
                // Record the margin the normal actually achieves, not the LP
                // value.
                Ok((h, _)) => {
                    let m = self.signed_margin(&h);
                    Some((h, m))
                }
                Err(Error::AdversaryExhausted(_) | Error::SolverFailure(_)) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let (h, margin) = match (fresh, &self.last_normal) {
            (Some((h, m)), prev) if m > MARGIN_TOL || prev.is_none() => (h, m),
            (_, Some(prev)) => {
                let h = prev.clone();
                let m = self.signed_margin(&h);
                (h, m)
            }
            (_, None) => {
                return Err(Error::AdversaryExhausted("no separating hyperplane".into()))
            }
        };
        if certified && margin >= CONE_CHECK_MARGIN {
            let overlap = self.cone_overlap()?;
            if overlap > CONE_TOL {
                return Err(Error::InvariantViolation(format!(
                    "label cones share a nonzero point (overlap {overlap:.3e})"
                )));
            }
        }
        self.margins.push(margin);
        self.last_normal = Some(h.clone());
        let mut x = None;
        for _ in 0..PACKING_TRIES {
            let g: Vec<f64> = (0..self.d).map(|_| self.rng.sample(StandardNormal)).collect();
            let t = dot(&g, &h);
            let mut c: Vec<f64> = g.iter().zip(&h).map(|(a, b)| a - t * b).collect();
            let n = norm(&c);
            if n < 1e-9 {
                continue;
            }
            c.iter_mut().for_each(|v| *v /= n);
            if self.points.iter().all(|p| distance(p, &c) >= self.eps) {
                x = Some(c);
                break;
            }
        }
        let Some(x) = x else {
            return Err(Error::AdversaryExhausted(format!(
                "no point at distance {} from {} predecessors after {PACKING_TRIES} tries",
                self.eps,
                self.points.len()
            )));
        };
        let label = self.rng.random_range(0..2usize);
        self.points.push(x.clone());
        self.labels.push(label);
        Ok((x, label))
    }
}

/// Max-margin hyperplane through the origin (see
/// [`LowerBoundAdversary::separating_hyperplane`]).
fn max_margin(d: usize, points: &[Vec<f64>], labels: &[usize]) -> Result<(Vec<f64>, f64)> {
    let mut objective = vec![0.0; d + 1];
    objective[d] = 1.0;
    let mut bounds = vec![(-1.0, 1.0); d];
    bounds.push((-1.0, 1.0));
    let mut lp = LinearProgram::new(objective).with_bounds(bounds);
    for (x, &l) in points.iter().zip(labels) {
        let mut row: Vec<f64> = x.clone();
        if l == 0 {
            row.push(-1.0);
            lp.constrain(row, Relation::Ge, 0.0);
        } else {
            row.push(1.0);
            lp.constrain(row, Relation::Le, 0.0);
        }
    }
    let (value, point) = match solve_lp(&lp, Sense::Maximize)? {
        LpStatus::Optimal { value, point } => (value, point),
        other => return Err(Error::SolverFailure(format!("separation LP: {other:?}"))),
    };
    let h = &point[..d];
    let n = norm(h);
    if n <= MARGIN_TOL {
        return Err(Error::AdversaryExhausted(format!(
            "separation LP returned no hyperplane (margin {value:.3e})"
        )));
    }
    Ok((h.iter().map(|x| x / n).collect(), value / n))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A pregenerated adversary run: the two starting points followed by the
/// queried points.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundEpisode {
    pub eps: f64,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Leading steps placed on a certified strictly separating hyperplane.
    pub certified_steps: usize,
}

impl LowerBoundEpisode {
    pub fn generate(d: usize, horizon: usize, seed: u64) -> Result<Self> {
        let mut adv = LowerBoundAdversary::new(d, horizon, seed)?;
        while adv.points().len() < horizon {
            adv.step()?;
        }
        Ok(Self {
            eps: adv.eps(),
            certified_steps: adv.certified_steps(),
            points: adv.points,
            labels: adv.labels,
        })
    }

    pub fn loss_floor(&self) -> f64 {
        self.eps * self.eps / 2.0
    }

    /// Queried points and their labels (the two starting points excluded).
    pub fn queries(&self) -> impl Iterator<Item = (&Vec<f64>, usize)> {
        self.points.iter().zip(self.labels.iter().copied()).skip(2)
    }

    /// Smallest distance between any two points.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in 0..i {
                m = m.min(distance(&self.points[i], &self.points[j]));
            }
        }
        m
    }

    /// Distance from `q` to the convex hull of the points labelled `label`.
    pub fn region_distance(&self, q: &[f64], label: usize) -> Result<f64> {
        let region: Vec<Vec<f64>> = self
            .points
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == label)
            .map(|(p, _)| p.clone())
            .collect();
        Ok(distance_to_hull(&region, q)?.0)
    }

    /// Plays the queried points against `learner`. A wrong guess costs the
    /// distance to the guessed label's region.
    pub fn play(&self, learner: &mut dyn OnlineLearner) -> Result<LossLedger> {
        if learner.labels() != 2 {
            return Err(Error::Config("the lower-bound episode has two labels".into()));
        }
        let mut ledger = LossLedger::new();
        for (t, (q, truth)) in self.queries().enumerate() {
            let guess = learner.predict(q)?;
            let loss_bound = learner.loss_bound_for(q, guess)?;
            let scale_index = learner.scale_index(q, guess, truth)?;
            learner.observe(q, guess, truth)?;
            let mistake = guess != truth;
            let loss = if mistake { self.region_distance(q, guess)? } else { 0.0 };
            ledger.push(RoundRecord {
                round: t + 1,
                query: q.clone(),
                guess,
                truth,
                loss,
                loss_bound,
                mistake,
                robust_mistake: false,
                scale_index,
                cum_loss: 0.0,
            })?;
        }
        Ok(ledger)
    }
}

/// Guesses uniformly at random and never learns.
#[derive(Debug, Clone)]
pub struct RandomGuesser {
    k: usize,
    rng: ChaCha8Rng,
}

impl RandomGuesser {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            rng: rng_from(mix_seed(seed, 0x5eed)),
        }
    }
}

impl OnlineLearner for RandomGuesser {
    fn labels(&self) -> usize {
        self.k
    }

    fn predict(&mut self, _q: &[f64]) -> Result<usize> {
        Ok(self.rng.random_range(0..self.k))
    }

    fn observe(&mut self, _q: &[f64], _guessed: usize, _truth: usize) -> Result<()> {
        Ok(())
    }

    fn loss_bound_for(&mut self, _q: &[f64], _label: usize) -> Result<f64> {
        Ok(f64::INFINITY)
    }

    fn max_loss_bound(&mut self, _q: &[f64]) -> Result<f64> {
        Ok(f64::INFINITY)
    }

    fn scale_index(&mut self, _q: &[f64], _guessed: usize, _truth: usize) -> Result<Option<i32>> {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starting_points_and_epsilon() {
        let adv = LowerBoundAdversary::new(6, 256, 1).unwrap();
        assert_eq!(adv.eps(), 0.25);
        assert_eq!(adv.loss_floor(), 0.03125);
        assert_eq!(adv.points()[0][0], 1.0);
        assert_eq!(adv.points()[1][0], -1.0);
        assert_eq!(adv.labels(), &[0, 1]);
        assert!(matches!(LowerBoundAdversary::new(4, 16, 1), Err(Error::Config(_))));
    }

    #[test]
    fn steps_pack_on_separating_hyperplanes() {
        let mut adv = LowerBoundAdversary::new(6, 40, 2).unwrap();
        for _ in 0..38 {
            let (h, margin) = adv.separating_hyperplane().unwrap();
            assert!(margin > 0.0);
            let before = adv.points().to_vec();
            let (x, _) = adv.step().unwrap();
            assert!((norm(&x) - 1.0).abs() < 1e-12);
            assert!(dot(&x, &h).abs() < 1e-9);
            assert!(before.iter().all(|p| distance(p, &x) >= adv.eps()));
        }
        assert!(matches!(adv.step(), Err(Error::AdversaryExhausted(_))));
    }

    #[test]
    fn mistakes_pay_the_floor() {
        let ep = LowerBoundEpisode::generate(6, 64, 3).unwrap();
        assert!(ep.min_pairwise_distance() >= ep.eps);
        let floor = ep.loss_floor();
        for (q, truth) in ep.queries() {
            let other = 1 - truth;
            assert!(ep.region_distance(q, other).unwrap() >= floor - 1e-9);
            assert!(ep.region_distance(q, truth).unwrap() < 1e-9);
        }
    }

    #[test]
    fn random_baseline_is_reproducible() {
        let ep = LowerBoundEpisode::generate(6, 32, 4).unwrap();
        let a = ep.play(&mut RandomGuesser::new(2, 9)).unwrap();
        let b = ep.play(&mut RandomGuesser::new(2, 9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rounds(), 30);
    }
}
