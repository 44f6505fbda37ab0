//! Two-center learner for general `p > 2` distances.
//!
//! Each scale `i` keeps a knowledge set `S_i` over pairs of lifted centers
//! `(G_i(x₁), G_i(x₂))` in the cube `[-1, 1]^(2m)`. A query `q` defines the
//! direction `v = (-H_i(q), H_i(q))`, whose inner product with the lifted
//! truth approximates `(‖q - x₂‖_p^p - ‖q - x₁‖_p^p) / 2^p`. The learner
//! picks the coarsest scale whose width in `v` is still large, predicts by
//! comparing the volumes on each side of `v·z = 0`, and cuts that scale with
//! a slack that covers the kernel approximation error.

use std::collections::BTreeMap;

use crate::error::{check_dim, Error, Result};
use crate::kernels::{GeneralPKernel, SparseVec};
use crate::knowledge::KnowledgeSet;
use crate::numerics::body::ConvexBody;
use crate::numerics::lp::Relation;
use crate::numerics::mix_seed;
use crate::numerics::sampling::{sample_polytope, SamplerConfig};
use crate::pairwise::{Side, TwoCenterLearner};

pub const DEFAULT_C_SCALE: f64 = 100.0;
pub const DEFAULT_SELECTION_CONSTANT: f64 = 1000.0;
pub const DEFAULT_SLACK_CONSTANT: f64 = 3.0;
/// Default bound on the lifted dimension `2m` of any instantiated scale.
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleConfig {
    pub p: f64,
    pub d: usize,
    /// Exponent applied to distance losses.
    pub alpha: f64,
    pub c_scale: f64,
    pub selection_constant: f64,
    pub slack_constant: f64,
    pub i_cap: u32,
    /// Lower bound on the L^p distance between the two centers.
    pub separation: Option<f64>,
    pub sampler: SamplerConfig,
    pub seed: u64,
}

impl MultiscaleConfig {
    /// Default constants with `i_cap` chosen from [`DEFAULT_MEMORY_BUDGET`].
    pub fn new(p: f64, d: usize, seed: u64) -> Result<Self> {
        let i_cap = cap_for_budget(p, d, DEFAULT_C_SCALE, DEFAULT_MEMORY_BUDGET)?;
        Ok(Self {
            p,
            d,
            alpha: 1.0,
            c_scale: DEFAULT_C_SCALE,
            selection_constant: DEFAULT_SELECTION_CONSTANT,
            slack_constant: DEFAULT_SLACK_CONSTANT,
            i_cap,
            separation: None,
            sampler: SamplerConfig::default(),
            seed,
        })
    }
}

/// Largest scale whose pair space `2·p′·d·(2D_i + 1)` fits in `budget`.
pub fn cap_for_budget(p: f64, d: usize, c_scale: f64, budget: usize) -> Result<u32> {
    let mut cap = 0;
    for i in 1..=40u32 {
        let kernel = match GeneralPKernel::new(p, d, i, c_scale) {
            Ok(k) => k,
            Err(e) if i == 1 => return Err(e),
            Err(_) => break,
        };
        if 2 * kernel.lifted_dim() > budget {
            break;
        }
        cap = i;
    }
    if cap == 0 {
        return Err(Error::Config(format!(
            "memory budget {budget} is below the first scale's lifted dimension"
        )));
    }
    Ok(cap)
}

/// Knowledge set of one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSet {
    pub i: u32,
    pub kernel: GeneralPKernel,
    pub set: KnowledgeSet,
}

impl ScaleSet {
    pub fn new(p: f64, d: usize, i: u32, c_scale: f64) -> Result<Self> {
        let kernel = GeneralPKernel::new(p, d, i, c_scale)?;
        let body = ConvexBody::cube(2 * kernel.lifted_dim(), -1.0, 1.0)?;
        Ok(Self {
            i,
            kernel,
            set: KnowledgeSet::from_body(body)?,
        })
    }

    /// `v = (-H_i(q), H_i(q))`.
    pub fn round_direction(&self, q: &[f64]) -> Result<SparseVec> {
        let h = self.kernel.lift_query(q)?;
        let m = h.dim;
        let mut entries: Vec<(usize, f64)> = h.entries.iter().map(|&(j, a)| (j, -a)).collect();
        entries.extend(h.entries.iter().map(|&(j, a)| (m + j, a)));
        Ok(SparseVec { dim: 2 * m, entries })
    }

    /// `(G_i(x₁), G_i(x₂))`.
    pub fn lifted_truth(&self, x1: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.kernel.lift_center(x1)?;
        z.extend(self.kernel.lift_center(x2)?);
        Ok(z)
    }

    pub fn range(&self, v: &SparseVec) -> Result<(f64, f64)> {
        self.set.range(&v.to_dense())
    }

    pub fn slack(&self, slack_constant: f64) -> f64 {
        slack_constant * self.kernel.error_bound()
    }

    /// Largest violation of `point` over the box and every logged cut,
    /// redundant ones included. Nonpositive means `point` satisfies them all.
    pub fn max_cut_violation(&self, point: &[f64]) -> Result<f64> {
        self.max_cut_violation_from(point, 0)
    }

    /// [`Self::max_cut_violation`] over the box and the cuts logged from
    /// position `first` on.
    pub fn max_cut_violation_from(&self, point: &[f64], first: usize) -> Result<f64> {
        check_dim("lifted point", self.set.dim(), point.len())?;
        let mut worst = point.iter().map(|x| x.abs() - 1.0).fold(f64::NEG_INFINITY, f64::max);
        for cut in self.set.cut_log().iter().skip(first) {
            let a: f64 = cut.normal.iter().zip(point).map(|(a, x)| a * x).sum();
            let v = match cut.relation {
                Relation::Le => a - cut.offset,
                Relation::Ge => cut.offset - a,
                Relation::Eq => (a - cut.offset).abs(),
            };
            worst = worst.max(v);
        }
        Ok(worst)
    }
}

/// Scale chosen for a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Scale(u32),
    /// No scale up to the cap has a wide enough direction.
    BeyondCap,
}

#[derive(Debug, Clone, PartialEq)]
struct Proposal {
    query: Vec<f64>,
    selection: Selection,
    side: Side,
    positive_fraction: Option<f64>,
}

/// Report of one prediction, for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionDetail {
    pub selection: Selection,
    pub side: Side,
    /// Estimated fraction of `S_i` with `v·z > 0`; `None` when the side was
    /// decided by the range alone or the scale cap was exceeded.
    pub positive_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleLearner {
    cfg: MultiscaleConfig,
    scales: BTreeMap<u32, ScaleSet>,
    proposal: Option<Proposal>,
    updates: usize,
}

impl MultiscaleLearner {
    pub fn new(cfg: MultiscaleConfig) -> Result<Self> {
        if cfg.i_cap == 0 {
            return Err(Error::Config("i_cap must be at least 1".into()));
        }
        if !(cfg.selection_constant > 0.0 && cfg.slack_constant > 0.0) {
            return Err(Error::Config("selection and slack constants must be positive".into()));
        }
        if let Some(s) = cfg.separation {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("separation must be positive, got {s}")));
            }
        }
        if !(cfg.alpha > 0.0 && cfg.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", cfg.alpha)));
        }
        // Validates p, d and c_scale at the first scale.
        GeneralPKernel::new(cfg.p, cfg.d, 1, cfg.c_scale)?;
        Ok(Self {
            cfg,
            scales: BTreeMap::new(),
            proposal: None,
            updates: 0,
        })
    }

    pub fn config(&self) -> &MultiscaleConfig {
        &self.cfg
    }

    /// Instantiated scales.
    pub fn scales(&self) -> &BTreeMap<u32, ScaleSet> {
        &self.scales
    }

    fn scale(&mut self, i: u32) -> Result<&ScaleSet> {
        if !self.scales.contains_key(&i) {
            let s = ScaleSet::new(self.cfg.p, self.cfg.d, i, self.cfg.c_scale)?;
            self.scales.insert(i, s);
        }
        Ok(&self.scales[&i])
    }

    /// Width threshold `C·D_i·p·d²·(pδ_i)^p` of scale `i`.
    pub fn threshold(&self, i: u32) -> Result<f64> {
        let k = GeneralPKernel::new(self.cfg.p, self.cfg.d, i, self.cfg.c_scale)?;
        let d = self.cfg.d as f64;
        Ok(self.cfg.selection_constant
            * k.half_grid as f64
            * self.cfg.p
            * d
            * d
            * (self.cfg.p * k.delta).powf(self.cfg.p))
    }

    pub fn round_direction(&mut self, i: u32, q: &[f64]) -> Result<SparseVec> {
        self.scale(i)?.round_direction(q)
    }

    /// Width of `S_i` along the round direction of `q`.
    pub fn width_at(&mut self, i: u32, q: &[f64]) -> Result<f64> {
        let s = self.scale(i)?;
        let v = s.round_direction(q)?;
        let (lo, hi) = s.range(&v)?;
        Ok(hi - lo)
    }

    /// Smallest scale whose width reaches its threshold.
    pub fn select_scale(&mut self, q: &[f64]) -> Result<Selection> {
        check_dim("query", self.cfg.d, q.len())?;
        for i in 1..=self.cfg.i_cap {
            if self.width_at(i, q)? >= self.threshold(i)? {
                return Ok(Selection::Scale(i));
            }
        }
        Ok(Selection::BeyondCap)
    }

    /// Width and strip-volume requirement `8·(2m)·slack` at the selected
    /// scale, or `None` beyond the cap.
    pub fn strip_premise(&mut self, q: &[f64]) -> Result<Option<(f64, f64)>> {
        match self.select_scale(q)? {
            Selection::BeyondCap => Ok(None),
            Selection::Scale(i) => {
                let width = self.width_at(i, q)?;
                let s = &self.scales[&i];
                let required = 8.0 * s.set.dim() as f64 * s.slack(self.cfg.slack_constant);
                Ok(Some((width, required)))
            }
        }
    }

    fn propose(&mut self, q: &[f64]) -> Result<Proposal> {
        if let Some(p) = &self.proposal {
            if p.query == q {
                return Ok(p.clone());
            }
        }
        let selection = self.select_scale(q)?;
        let (side, positive_fraction) = match selection {
            Selection::BeyondCap => (Side::First, None),
            Selection::Scale(i) => {
                let seed = mix_seed(self.cfg.seed, self.updates as u64 * 64 + i as u64);
                let cfg = self.cfg.sampler;
                let s = &self.scales[&i];
                let v = s.round_direction(q)?;
                let (lo, hi) = s.range(&v)?;
                if lo >= 0.0 {
                    (Side::First, None)
                } else if hi <= 0.0 {
                    (Side::Second, None)
                } else {
                    let f = positive_fraction(&s.set, &v, &cfg, seed)?;
                    let sigma = (f * (1.0 - f) / cfg.samples as f64).sqrt();
                    let side = if f >= 0.5 - 2.0 * sigma { Side::First } else { Side::Second };
                    (side, Some(f))
                }
            }
        };
        let p = Proposal {
            query: q.to_vec(),
            selection,
            side,
            positive_fraction,
        };
        self.proposal = Some(p.clone());
        Ok(p)
    }

    pub fn predict_detail(&mut self, q: &[f64]) -> Result<PredictionDetail> {
        let p = self.propose(q)?;
        Ok(PredictionDetail {
            selection: p.selection,
            side: p.side,
            positive_fraction: p.positive_fraction,
        })
    }

    /// Largest cut violation of the lifted truth `(G_i(x₁), G_i(x₂))` over
    /// every instantiated scale; nonpositive when the truth is contained.
    pub fn truth_violation(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for s in self.scales.values() {
            let z = s.lifted_truth(x1, x2)?;
            worst = worst.max(s.max_cut_violation(&z)?);
        }
        Ok(worst)
    }

    /// [`Self::truth_violation`] restricted to cuts logged since the last
    /// call with the same `seen` map (scale → cuts already checked). Cuts
    /// never change once logged, so calling this after every round checks
    /// every cut against the truth exactly once.
    pub fn new_truth_violation(&self, x1: &[f64], x2: &[f64], seen: &mut BTreeMap<u32, usize>) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for (&i, s) in &self.scales {
            let first = seen.get(&i).copied().unwrap_or(0);
            let z = s.lifted_truth(x1, x2)?;
            worst = worst.max(s.max_cut_violation_from(&z, first)?);
            seen.insert(i, s.set.cut_log().len());
        }
        Ok(worst)
    }

    /// Bound on `|‖q - x₁‖_p - ‖q - x₂‖_p|` implied by the width at scale `i`
    /// falling below its threshold.
    fn scale_residual(&self, i: u32, separation: f64) -> Result<f64> {
        let k = GeneralPKernel::new(self.cfg.p, self.cfg.d, i, self.cfg.c_scale)?;
        let p = self.cfg.p;
        let lifted = self.threshold(i)? + 2.0 * k.error_bound();
        Ok(2f64.powf(p) * lifted / (0.5 * separation).powf(p - 1.0))
    }
}

/// Fraction of `set` with `v·z > 0`, sampled from the connected block of
/// coordinates that `v` touches. Cuts outside that block are independent of
/// `v·z`, so the marginal of the block is exact.
fn positive_fraction(set: &KnowledgeSet, v: &SparseVec, cfg: &SamplerConfig, seed: u64) -> Result<f64> {
    let body = set.body();
    let seeds: Vec<usize> = v.entries.iter().map(|&(j, _)| j).collect();
    let mut coords: Vec<usize> = body.components_of(&seeds).into_iter().flatten().collect();
    coords.sort_unstable();
    let sub = body.restrict(&coords)?;
    let local: Vec<(usize, f64)> = v
        .entries
        .iter()
        .map(|&(j, a)| (coords.binary_search(&j).expect("seed coordinate kept"), a))
        .collect();
    let points = sample_polytope(&sub, cfg, None, seed)?;
    let positive = points
        .iter()
        .filter(|z| local.iter().map(|&(j, a)| a * z[j]).sum::<f64>() > 0.0)
        .count();
    Ok(positive as f64 / points.len() as f64)
}

impl TwoCenterLearner for MultiscaleLearner {
    fn query_dim(&self) -> usize {
        self.cfg.d
    }

    fn predict(&mut self, q: &[f64]) -> Result<Side> {
        Ok(self.propose(q)?.side)
    }

    /// Cuts the selected scale on every round, correct or not.
    fn observe(&mut self, q: &[f64], _predicted: Side, truth: Side) -> Result<()> {
        let p = self.propose(q)?;
        self.proposal = None;
        let Selection::Scale(i) = p.selection else {
            return Ok(());
        };
        let slack_constant = self.cfg.slack_constant;
        let s = self.scales.get_mut(&i).expect("selected scale exists");
        let v = s.round_direction(q)?.to_dense();
        let slack = s.slack(slack_constant);
        match truth {
            Side::First => s.set.cut(&v, -slack, Relation::Ge)?,
            Side::Second => s.set.cut(&v, slack, Relation::Le)?,
        }
        self.updates += 1;
        Ok(())
    }

    fn loss_bound(&mut self, q: &[f64]) -> Result<f64> {
        let separation = self
            .cfg
            .separation
            .ok_or_else(|| Error::Config("multiscale loss bound needs a separation".into()))?;
        let coarse = match self.propose(q)?.selection {
            Selection::Scale(1) => None,
            Selection::Scale(i) => Some(i - 1),
            Selection::BeyondCap => Some(self.cfg.i_cap),
        };
        let bound = match coarse {
            None => 2.0,
            Some(i) => self.scale_residual(i, separation)?.min(2.0),
        };
        Ok(bound.powf(self.cfg.alpha))
    }

    fn scale_index(&mut self, q: &[f64]) -> Result<Option<i32>> {
        Ok(match self.propose(q)?.selection {
            Selection::Scale(i) => Some(i as i32),
            Selection::BeyondCap => None,
        })
    }

    fn updates(&self) -> usize {
        self.updates
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::lp_distance;
    use crate::numerics::sampling::{rng_from, uniform_in_ball};

    fn desk(seed: u64) -> MultiscaleConfig {
        MultiscaleConfig {
            p: 2.5,
            d: 1,
            alpha: 1.0,
            c_scale: 2.0,
            selection_constant: 1.0,
            slack_constant: 3.0,
            i_cap: 4,
            separation: Some(0.5),
            sampler: SamplerConfig::new(1024, 64),
            seed,
        }
    }

    #[test]
    fn direction_is_antisymmetric() {
        let s = ScaleSet::new(2.5, 2, 1, 2.0).unwrap();
        let q = [0.3, -0.6];
        let v = s.round_direction(&q).unwrap();
        let dense = v.to_dense();
        let m = dense.len() / 2;
        for j in 0..m {
            assert_eq!(dense[j], -dense[m + j]);
        }
        let x = [0.1, 0.2];
        let z = s.lifted_truth(&x, &x).unwrap();
        assert!(v.dot_dense(&z).abs() < 1e-12);
        assert!(v.norm() <= 10.0 * 2.0);
    }

    #[test]
    fn paper_threshold_at_first_scale() {
        let cfg = MultiscaleConfig {
            i_cap: 1,
            ..MultiscaleConfig::new(2.5, 1, 0).unwrap()
        };
        let l = MultiscaleLearner::new(cfg).unwrap();
        let expected = 1000.0 * 300.0 * 2.5 * (2.5f64 / 600.0).powf(2.5);
        assert!((l.threshold(1).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.837).abs() < 5e-3);
        let ratio = l.threshold(1).unwrap() / l.threshold(2).unwrap();
        assert!((ratio - 2f64.powf(1.5)).abs() < 1e-9);
    }

    #[test]
    fn budget_caps() {
        assert_eq!(cap_for_budget(2.5, 1, 2.0, 78).unwrap(), 1);
        assert_eq!(cap_for_budget(2.5, 1, 2.0, 200).unwrap(), 2);
        assert!(matches!(cap_for_budget(2.5, 1, 2.0, 10), Err(Error::Config(_))));
    }

    #[test]
    fn fresh_box_ties_to_first() {
        let mut l = MultiscaleLearner::new(desk(3)).unwrap();
        let d = l.predict_detail(&[0.2]).unwrap();
        assert_eq!(d.selection, Selection::Scale(1));
        assert_eq!(d.side, Side::First);
        let f = d.positive_fraction.unwrap();
        assert!((f - 0.5).abs() < 0.1, "{f}");
    }

    #[test]
    fn forced_positive_side_predicts_first() {
        let mut l = MultiscaleLearner::new(desk(4)).unwrap();
        let q = [0.2];
        let v = l.round_direction(1, &q).unwrap().to_dense();
        l.scales.get_mut(&1).unwrap().set.cut(&v, 0.2, Relation::Ge).unwrap();
        let d = l.predict_detail(&q).unwrap();
        assert_eq!(d.side, Side::First);
        assert_eq!(d.positive_fraction, None);
    }

    #[test]
    fn observe_cuts_every_round_and_keeps_truth() {
        let mut l = MultiscaleLearner::new(desk(5)).unwrap();
        let (x1, x2) = ([0.6], [-0.4]);
        let mut rng = rng_from(9);
        for _ in 0..60 {
            let q = uniform_in_ball(&mut rng, 1);
            let truth = if lp_distance(&q, &x1, 2.5) <= lp_distance(&q, &x2, 2.5) {
                Side::First
            } else {
                Side::Second
            };
            let before = l.updates();
            let predicted = l.predict(&q).unwrap();
            let sel = l.predict_detail(&q).unwrap().selection;
            l.observe(&q, predicted, truth).unwrap();
            match sel {
                Selection::Scale(_) => assert_eq!(l.updates(), before + 1),
                Selection::BeyondCap => assert_eq!(l.updates(), before),
            }
            assert!(l.truth_violation(&x1, &x2).unwrap() <= 0.0);
        }
    }

    #[test]
    fn beyond_cap_leaves_state_alone() {
        let cfg = MultiscaleConfig {
            selection_constant: 1e9,
            ..desk(6)
        };
        let mut l = MultiscaleLearner::new(cfg).unwrap();
        let q = [0.1];
        assert_eq!(l.select_scale(&q).unwrap(), Selection::BeyondCap);
        let before = l.clone();
        let side = l.predict(&q).unwrap();
        assert_eq!(side, Side::First);
        l.observe(&q, side, Side::Second).unwrap();
        l.proposal = None;
        let mut b = before;
        b.proposal = None;
        assert_eq!(l, b);
        let bound = l.loss_bound(&q).unwrap();
        assert!(bound > 0.0 && bound <= 2.0);
    }

    #[test]
    fn loss_bound_needs_separation() {
        let cfg = MultiscaleConfig {
            separation: None,
            ..desk(7)
        };
        let mut l = MultiscaleLearner::new(cfg).unwrap();
        assert!(matches!(l.loss_bound(&[0.0]), Err(Error::Config(_))));
    }

    #[test]
    fn first_scale_bound_is_trivial_and_drops_split() {
        let mut l = MultiscaleLearner::new(desk(8)).unwrap();
        let q = [0.3];
        assert_eq!(l.loss_bound(&q).unwrap(), 2.0);
        let a = l.drop_bound(&q, Side::First).unwrap();
        let b = l.drop_bound(&q, Side::Second).unwrap();
        assert_eq!(a + b, 2.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let run = || {
            let mut l = MultiscaleLearner::new(desk(11)).unwrap();
            let mut rng = rng_from(2);
            let mut sides = Vec::new();
            for _ in 0..30 {
                let q = uniform_in_ball(&mut rng, 1);
                let s = l.predict(&q).unwrap();
                l.observe(&q, s, if q[0] > 0.1 { Side::First } else { Side::Second }).unwrap();
                sides.push(s);
            }
            (sides, l)
        };
        assert_eq!(run(), run());
    }
}
