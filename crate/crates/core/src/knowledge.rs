//! Knowledge sets: the convex set of hidden vectors consistent with all
//! feedback so far, together with the geometric scale schedule used to pick
//! expansion radii.
//!
//! A fresh set is the box `[-2, 2]^d`, which contains every difference of two
//! points of the unit ball. Cuts are halfspaces; a cut that does not shrink
//! the set is logged but not stored. In dimension at most
//! [`VERTEX_CACHE_MAX_DIM`] the vertex list is maintained incrementally so
//! widths cost a pass over the vertices instead of two LPs.

use crate::error::{check_dim, Error, Result};
use crate::numerics::body::{ConvexBody, Halfspace};
use crate::numerics::lp::Relation;
use crate::numerics::sampling::{rng_from, SamplePool, SamplerConfig};
use crate::numerics::{log_unit_ball_volume, mix_seed, vertices};

use rand::Rng;

pub const VERTEX_CACHE_MAX_DIM: usize = 4;
const VERTEX_BUDGET: f64 = 2e5;
const REDUNDANT_TOL: f64 = 1e-12;
const EMPTY_TOL: f64 = 1e-9;

/// Radius of the initial box.
pub const INITIAL_RADIUS: f64 = 2.0;

/// Expansion radii `z(i) = 2^(-i) / (8d)` for indices in `[i_min, i_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSchedule {
    pub d: usize,
    pub alpha: f64,
    pub i_min: i32,
    pub i_max: i32,
}

impl ScaleSchedule {
    pub fn new(d: usize, alpha: f64, i_min: i32, i_max: i32) -> Result<Self> {
        if d == 0 {
            return Err(Error::Input("dimension must be positive".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Input(format!("loss exponent must be positive, got {alpha}")));
        }
        if i_min > i_max {
            return Err(Error::Input(format!("index range [{i_min}, {i_max}] is empty")));
        }
        Ok(Self {
            d,
            alpha,
            i_min,
            i_max,
        })
    }

    /// Default range for a run of `rounds` rounds: `[-2, ceil(log2(T d)) + 4]`.
    pub fn for_horizon(d: usize, alpha: f64, rounds: usize) -> Result<Self> {
        let td = (rounds.max(1) * d.max(1)) as f64;
        let i_max = td.log2().ceil() as i32 + 4;
        Self::new(d, alpha, -2, i_max)
    }

    pub fn z(&self, i: i32) -> f64 {
        2f64.powi(-i) / (8.0 * self.d as f64)
    }

    /// Largest `i` with `width <= 2^(-i)`, clamped to the index range. A flat
    /// direction (width 0) maps to `i_max`.
    pub fn select_index(&self, width: f64) -> i32 {
        if !(width > 0.0) {
            return self.i_max;
        }
        let mut i = (-width.log2()).floor();
        if !i.is_finite() {
            return if width > 1.0 { self.i_min } else { self.i_max };
        }
        while 2f64.powf(-(i + 1.0)) >= width {
            i += 1.0;
        }
        while 2f64.powf(-i) < width {
            i -= 1.0;
        }
        (i.clamp(self.i_min as f64, self.i_max as f64)) as i32
    }

    pub fn indices(&self) -> impl Iterator<Item = i32> {
        self.i_min..=self.i_max
    }
}

/// One applied cut, in the caller's orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub relation: Relation,
    /// True when the cut did not shrink the set and was not stored.
    pub redundant: bool,
}

/// Monte Carlo estimate of the potential with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialEstimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone)]
struct CachedPool {
    seed: u64,
    cfg: SamplerConfig,
    pool: SamplePool,
}

#[derive(Debug, Clone)]
pub struct KnowledgeSet {
    body: ConvexBody,
    cut_log: Vec<Cut>,
    vertices: Option<Vec<Vec<f64>>>,
    interior: Option<Vec<f64>>,
    pool: Option<CachedPool>,
}

impl PartialEq for KnowledgeSet {
    /// Two sets are equal when they hold the same constraints; caches are
    /// ignored.
    fn eq(&self, other: &Self) -> bool {
        self.body == other.body && self.cut_log == other.cut_log
    }
}

impl KnowledgeSet {
    /// The box `[-2, 2]^d`.
    pub fn new(d: usize) -> Result<Self> {
        Self::from_body(ConvexBody::cube(d, -INITIAL_RADIUS, INITIAL_RADIUS)?)
    }

    /// A knowledge set over an arbitrary (unexpanded) body.
    pub fn from_body(body: ConvexBody) -> Result<Self> {
        if body.expansion() != 0.0 {
            return Err(Error::Input("knowledge sets are unexpanded polytopes".into()));
        }
        let vertices = if body.dim() <= VERTEX_CACHE_MAX_DIM {
            vertices::enumerate(&body, VERTEX_BUDGET)
        } else {
            None
        };
        Ok(Self {
            body,
            cut_log: Vec::new(),
            vertices,
            interior: None,
            pool: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.body.dim()
    }

    pub fn body(&self) -> &ConvexBody {
        &self.body
    }

    pub fn cut_log(&self) -> &[Cut] {
        &self.cut_log
    }

    /// Number of stored (non-redundant) halfspaces.
    pub fn active_cuts(&self) -> usize {
        self.body.halfspaces().len()
    }

    pub fn contains(&self, point: &[f64]) -> Result<bool> {
        self.body.contains(point)
    }

    /// `max ⟨direction, v⟩` over the set.
    pub fn support(&self, direction: &[f64]) -> Result<f64> {
        check_dim("direction", self.dim(), direction.len())?;
        if let Some(vs) = &self.vertices {
            if let Some(s) = vertices::support(vs, direction) {
                return Ok(s);
            }
        }
        self.body.support(direction)
    }

    /// `(min, max)` of `⟨direction, v⟩` over the set.
    pub fn range(&self, direction: &[f64]) -> Result<(f64, f64)> {
        let neg: Vec<f64> = direction.iter().map(|a| -a).collect();
        let hi = self.support(direction)?;
        let lo = -self.support(&neg)?;
        Ok((lo, hi.max(lo)))
    }

    pub fn width(&self, direction: &[f64]) -> Result<f64> {
        let (lo, hi) = self.range(direction)?;
        Ok(hi - lo)
    }

    /// Intersects with `⟨normal, v⟩ ≤ offset` (`Le`) or `≥ offset` (`Ge`).
    pub fn cut(&mut self, normal: &[f64], offset: f64, relation: Relation) -> Result<()> {
        check_dim("cut normal", self.dim(), normal.len())?;
        let (a, b) = match relation {
            Relation::Le => (normal.to_vec(), offset),
            Relation::Ge => (normal.iter().map(|x| -x).collect(), -offset),
            Relation::Eq => return Err(Error::Input("equality cuts are not supported".into())),
        };
        let mut h = Halfspace::new(a, b)?;
        let neg: Vec<f64> = h.normal.iter().map(|x| -x).collect();
        let lowest = -self.support(&neg)?;
        if lowest > h.offset + EMPTY_TOL {
            return Err(Error::InconsistentFeedback(format!(
                "cut leaves no feasible point (closest value {lowest:.6e} vs bound {:.6e})",
                h.offset
            )));
        }
        // Within tolerance of touching: keep the touching face rather than an
        // empty set.
        h.offset = h.offset.max(lowest);
        let highest = self.support(&h.normal)?;
        let redundant = highest <= h.offset + REDUNDANT_TOL;
        self.cut_log.push(Cut {
            normal: normal.to_vec(),
            offset,
            relation,
            redundant,
        });
        if redundant {
            return Ok(());
        }
        self.body.push(h)?;
        self.vertices = match self.vertices.take() {
            Some(vs) => vertices::clip(&self.body, &vs, VERTEX_BUDGET).filter(|v| !v.is_empty()),
            None => None,
        };
        self.interior = None;
        self.pool = None;
        Ok(())
    }

    /// A point of maximal inscribed radius.
    pub fn interior_point(&mut self) -> Result<Vec<f64>> {
        if let Some(p) = &self.interior {
            return Ok(p.clone());
        }
        let (c, _) = self.body.chebyshev_center()?;
        self.interior = Some(c.clone());
        Ok(c)
    }

    fn pool(&mut self, cfg: &SamplerConfig, seed: u64) -> Result<&SamplePool> {
        let fresh = match &self.pool {
            Some(p) => p.seed != seed || p.cfg != *cfg,
            None => true,
        };
        if fresh {
            let start = self.interior_point()?;
            let pool = SamplePool::draw(&self.body, cfg, Some(&start), seed)?;
            self.pool = Some(CachedPool {
                seed,
                cfg: *cfg,
                pool,
            });
        }
        Ok(&self.pool.as_ref().expect("pool just filled").pool)
    }

    /// Estimated volume median of `K + z(i)B` in `direction`, clamped to the
    /// range of `K` in that direction. The sample pool
    /// is cached per (seed, sampler config) and dropped on every shrinking cut.
    pub fn median_guess(
        &mut self,
        i: i32,
        direction: &[f64],
        schedule: &ScaleSchedule,
        cfg: &SamplerConfig,
        seed: u64,
    ) -> Result<f64> {
        check_dim("direction", self.dim(), direction.len())?;
        let z = schedule.z(i);
        let (lo, hi) = self.range(direction)?;
        let g = self.pool(cfg, seed)?.quantile(direction, z, 0.5);
        // The median of K + zB lies within z of K's range; keeping it inside
        // the range makes |g - ⟨x, p⟩| <= width exact for every p in K.
        Ok(g.clamp(lo, hi))
    }

    /// Estimate of `Σ_i 2^(-αi) log(Vol(K + z_i B) / Vol(z_i B))` over the
    /// schedule's index range, each volume ratio obtained from the fraction of
    /// `n` uniform bounding-box samples that land in `K + z_i B`.
    pub fn potential(&self, schedule: &ScaleSchedule, n: usize, seed: u64) -> Result<PotentialEstimate> {
        if n == 0 {
            return Err(Error::Input("sample count must be positive".into()));
        }
        let mut value = 0.0;
        let mut var = 0.0;
        for i in schedule.indices() {
            let z = schedule.z(i);
            let (log_ratio, se) = log_volume_ratio(&self.body, z, n, mix_seed(seed, i as u64))?;
            let w = 2f64.powf(-schedule.alpha * i as f64);
            value += w * log_ratio;
            var += (w * se).powi(2);
        }
        Ok(PotentialEstimate {
            value,
            std_error: var.sqrt(),
        })
    }
}

/// `log(Vol(P + zB) / Vol(zB))` by bounding-box hit counting, with the
/// delta-method standard error of the log.
pub fn log_volume_ratio(polytope: &ConvexBody, z: f64, n: usize, seed: u64) -> Result<(f64, f64)> {
    let body = polytope.polytope().with_expansion(z)?;
    let (lo, hi) = body.bounding_box()?;
    let d = body.dim();
    let mut rng = rng_from(seed);
    let mut hits = 0usize;
    let mut x = vec![0.0; d];
    for _ in 0..n {
        for j in 0..d {
            x[j] = if hi[j] > lo[j] {
                rng.random_range(lo[j]..hi[j])
            } else {
                lo[j]
            };
        }
        if body.contains(&x)? {
            hits += 1;
        }
    }
    let f = (hits.max(1)) as f64 / n as f64;
    let log_box: f64 = lo.iter().zip(&hi).map(|(l, h)| (h - l).max(1e-300).ln()).sum();
    let log_ball = log_unit_ball_volume(d) + d as f64 * z.ln();
    let log_ratio = (log_box + f.ln() - log_ball).max(0.0);
    let se = ((1.0 - f) / (n as f64 * f)).sqrt();
    Ok((log_ratio, se))
}

/// Ratio `Vol(after + zB) / Vol(before + zB)` for `after ⊆ before`, from
/// `n` uniform points of `before + zB` (rejection from its bounding box).
/// Returns the estimate and its binomial standard error.
pub fn expanded_volume_ratio(
    before: &ConvexBody,
    after: &ConvexBody,
    z: f64,
    n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_dim("volume ratio", before.dim(), after.dim())?;
    if n == 0 {
        return Err(Error::Input("volume ratio needs at least one sample".into()));
    }
    let outer = before.polytope().with_expansion(z)?;
    let inner = after.polytope().with_expansion(z)?;
    let (lo, hi) = outer.bounding_box()?;
    let d = outer.dim();
    let mut rng = rng_from(seed);
    let mut x = vec![0.0; d];
    let (mut accepted, mut kept) = (0usize, 0usize);
    while accepted < n {
        for j in 0..d {
            x[j] = if hi[j] > lo[j] {
                rng.random_range(lo[j]..hi[j])
            } else {
                lo[j]
            };
        }
        if !outer.contains(&x)? {
            continue;
        }
        accepted += 1;
        if inner.contains(&x)? {
            kept += 1;
        }
    }
    let f = kept as f64 / n as f64;
    Ok((f, (f * (1.0 - f) / n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(d: usize, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        v
    }

    #[test]
    fn halving_a_square_with_no_expansion() {
        let mut k = KnowledgeSet::new(2).unwrap();
        let before = k.body().clone();
        k.cut(&e(2, 0), 0.0, Relation::Le).unwrap();
        let (f, se) = expanded_volume_ratio(&before, k.body(), 1e-9, 20_000, 1).unwrap();
        assert!((f - 0.5).abs() < 4.0 * se.max(1e-3), "{f}");
    }

    #[test]
    fn initial_width() {
        let k = KnowledgeSet::new(3).unwrap();
        assert!((k.width(&e(3, 0)).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn widths_after_cuts() {
        let mut k = KnowledgeSet::new(3).unwrap();
        k.cut(&e(3, 0), 0.0, Relation::Ge).unwrap();
        assert!((k.width(&e(3, 0)).unwrap() - 2.0).abs() < 1e-12);
        k.cut(&e(3, 0), 0.5, Relation::Le).unwrap();
        assert!((k.width(&e(3, 0)).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn interval_cut_and_inconsistency() {
        let mut k = KnowledgeSet::new(1).unwrap();
        k.cut(&[1.0], 0.0, Relation::Ge).unwrap();
        assert_eq!(k.range(&[1.0]).unwrap(), (0.0, 2.0));
        let before = k.clone();
        let err = k.cut(&[1.0], -1.0, Relation::Le).unwrap_err();
        assert!(matches!(err, Error::InconsistentFeedback(_)));
        assert_eq!(k, before);
    }

    #[test]
    fn repeated_cut_is_idempotent() {
        let mut k = KnowledgeSet::new(2).unwrap();
        let n = [0.6, 0.8];
        k.cut(&n, 0.3, Relation::Le).unwrap();
        let w = k.width(&n).unwrap();
        k.cut(&n, 0.3, Relation::Le).unwrap();
        assert_eq!(k.width(&n).unwrap(), w);
        assert_eq!(k.cut_log().len(), 2);
        assert!(k.cut_log()[1].redundant);
        assert_eq!(k.active_cuts(), 1);
    }

    #[test]
    fn vertex_cache_matches_lp_widths() {
        let mut k = KnowledgeSet::new(3).unwrap();
        k.cut(&[0.3, -0.2, 0.9], 0.4, Relation::Le).unwrap();
        k.cut(&[-0.5, 0.5, 0.1], -0.2, Relation::Ge).unwrap();
        for dir in [[1.0, 0.0, 0.0], [0.2, 0.3, -0.9], [0.0, -1.0, 0.4]] {
            let cached = k.width(&dir).unwrap();
            let lp = k.body().width(&dir).unwrap();
            assert!((cached - lp).abs() < 1e-9);
        }
    }

    #[test]
    fn select_index_rule() {
        let s = ScaleSchedule::new(3, 1.0, -2, 20).unwrap();
        assert_eq!(s.select_index(4.0), -2);
        assert_eq!(s.select_index(0.3), 1);
        assert_eq!(s.select_index(2f64.powi(-10)), 10);
        assert_eq!(s.select_index(0.0), 20);
        assert_eq!(s.select_index(1e-30), 20);
        assert_eq!(s.select_index(100.0), -2);
        for w in [0.9, 0.26, 0.126, 3e-4] {
            let i = s.select_index(w);
            assert!(2f64.powi(-i) >= w && w > 2f64.powi(-i - 1), "{w} -> {i}");
        }
    }

    #[test]
    fn horizon_schedule() {
        let s = ScaleSchedule::for_horizon(3, 1.0, 1000).unwrap();
        assert_eq!(s.i_min, -2);
        assert_eq!(s.i_max, 12 + 4);
        assert!((s.z(0) - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_median_and_determinism() {
        let mut k = KnowledgeSet::new(2).unwrap();
        let s = ScaleSchedule::new(2, 1.0, -2, 10).unwrap();
        let cfg = SamplerConfig::default();
        let g = k.median_guess(0, &[1.0, 0.0], &s, &cfg, 5).unwrap();
        assert!(g.abs() < 0.15, "{g}");
        let mut fresh = KnowledgeSet::new(2).unwrap();
        assert_eq!(fresh.median_guess(0, &[1.0, 0.0], &s, &cfg, 5).unwrap(), g);
    }

    #[test]
    fn interval_median_with_expansion() {
        let mut k = KnowledgeSet::new(1).unwrap();
        k.cut(&[1.0], 0.0, Relation::Ge).unwrap();
        // d = 1, i = 0 gives z = 1/8
        let s = ScaleSchedule::new(1, 1.0, -2, 10).unwrap();
        assert!((s.z(0) - 0.125).abs() < 1e-15);
        let cfg = SamplerConfig::new(20_000, 200);
        let g = k.median_guess(0, &[1.0], &s, &cfg, 3).unwrap();
        assert!((g - 1.0).abs() < 0.03, "{g}");
    }

    #[test]
    fn point_potential_vanishes() {
        let mut k = KnowledgeSet::new(2).unwrap();
        for (n, b) in [([1.0, 0.0], 0.3), ([0.0, 1.0], -0.1)] {
            k.cut(&n, b, Relation::Le).unwrap();
            k.cut(&n, b, Relation::Ge).unwrap();
        }
        let s = ScaleSchedule::new(2, 1.0, -2, 6).unwrap();
        let phi = k.potential(&s, 4000, 1).unwrap();
        assert!(phi.value <= 3.0 * phi.std_error + 1e-9, "{phi:?}");
    }

    #[test]
    fn potential_is_self_consistent_and_monotone() {
        let k = KnowledgeSet::new(2).unwrap();
        let s = ScaleSchedule::new(2, 1.0, -2, 12).unwrap();
        let a = k.potential(&s, 4000, 1).unwrap();
        let b = k.potential(&s, 8000, 2).unwrap();
        assert!(a.value > 0.0 && a.value.is_finite());
        let sigma = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.value - b.value).abs() <= 3.0 * sigma + 1e-12, "{a:?} {b:?}");

        let mut cut = k.clone();
        cut.cut(&[0.6, 0.8], 0.1, Relation::Le).unwrap();
        let c = cut.potential(&s, 4000, 3).unwrap();
        let sigma = (a.std_error.powi(2) + c.std_error.powi(2)).sqrt();
        assert!(c.value <= a.value + 3.0 * sigma, "{a:?} {c:?}");
    }
}
