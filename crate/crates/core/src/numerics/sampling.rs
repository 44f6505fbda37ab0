//! Approximately uniform sampling from convex bodies.
//!
//! Polytopes are sampled by hit-and-run started from the Chebyshev center.
//! Low-dimensional bodies use isotropic directions; above
//! [`ISOTROPIC_MAX_DIM`] the walk moves along random coordinate axes, which
//! keeps a step proportional to the number of constraints touching one
//! coordinate. Expanded bodies `K + zB` are sampled as a polytope sample plus
//! an independent uniform point of the radius-`z` ball.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::body::ConvexBody;
use super::{dot, mix_seed};
use crate::error::{check_dim, Error, Result};

pub const ISOTROPIC_MAX_DIM: usize = 16;
const RESYNC_EVERY: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    /// Number of points returned.
    pub samples: usize,
    /// Walk steps discarded before the first sample.
    pub burn_in: usize,
    /// Walk steps between consecutive samples.
    pub thin: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            samples: 4096,
            burn_in: 256,
            thin: 2,
        }
    }
}

impl SamplerConfig {
    pub fn new(samples: usize, burn_in: usize) -> Self {
        Self {
            samples,
            burn_in,
            ..Self::default()
        }
    }
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` hit-and-run samples of the polytope part of `body`.
pub fn hit_and_run(body: &ConvexBody, n: usize, burn_in: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let cfg = SamplerConfig {
        samples: n,
        burn_in,
        thin: SamplerConfig::default().thin,
    };
    sample_polytope(body, &cfg, None, seed)
}

/// Hit-and-run samples of the polytope part of `body`, starting from `start`
/// (or the Chebyshev center).
pub fn sample_polytope(
    body: &ConvexBody,
    cfg: &SamplerConfig,
    start: Option<&[f64]>,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if cfg.samples == 0 || cfg.burn_in == 0 {
        return Err(Error::Input("sample count and burn-in must be positive".into()));
    }
    let x0 = match start {
        Some(s) => {
            check_dim("start point", body.dim(), s.len())?;
            if body.max_violation(s) > 1e-9 {
                return Err(Error::Input("start point lies outside the body".into()));
            }
            s.to_vec()
        }
        None => body.chebyshev_center()?.0,
    };
    let mut walk = Walk::new(body, x0);
    let mut rng = rng_from(seed);
    for _ in 0..cfg.burn_in {
        walk.step(&mut rng);
    }
    let thin = cfg.thin.max(1);
    let mut out = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        for _ in 0..thin {
            walk.step(&mut rng);
        }
        out.push(walk.x.clone());
    }
    Ok(out)
}

struct Walk<'a> {
    body: &'a ConvexBody,
    x: Vec<f64>,
    slack: Vec<f64>,
    /// Per-coordinate list of (row, coefficient) for sparse coordinate moves.
    columns: Vec<Vec<(usize, f64)>>,
    isotropic: bool,
    steps: usize,
    dir: Vec<f64>,
    rate: Vec<f64>,
}

impl<'a> Walk<'a> {
    fn new(body: &'a ConvexBody, x: Vec<f64>) -> Self {
        let n = body.dim();
        let isotropic = n <= ISOTROPIC_MAX_DIM;
        let mut columns = vec![Vec::new(); n];
        if !isotropic {
            for (r, (h, support)) in body.halfspaces().iter().zip(body.supports()).enumerate() {
                for &j in support {
                    columns[j].push((r, h.normal[j]));
                }
            }
        }
        let mut walk = Self {
            body,
            slack: Vec::new(),
            x,
            columns,
            isotropic,
            steps: 0,
            dir: vec![0.0; n],
            rate: vec![0.0; body.halfspaces().len()],
        };
        walk.resync();
        walk
    }

    fn resync(&mut self) {
        self.slack = self
            .body
            .halfspaces()
            .iter()
            .map(|h| (h.offset - dot(&h.normal, &self.x)).max(0.0))
            .collect();
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) {
        self.steps += 1;
        if self.steps % RESYNC_EVERY == 0 {
            self.resync();
        }
        if self.isotropic {
            self.isotropic_step(rng);
        } else {
            self.coordinate_step(rng);
        }
    }

    fn isotropic_step(&mut self, rng: &mut ChaCha8Rng) {
        let n = self.x.len();
        let mut len = 0.0;
        for u in self.dir.iter_mut() {
            *u = rng.sample(StandardNormal);
            len += *u * *u;
        }
        let len = len.sqrt();
        if len == 0.0 {
            return;
        }
        self.dir.iter_mut().for_each(|u| *u /= len);
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for j in 0..n {
            let u = self.dir[j];
            if u != 0.0 {
                let a = (self.body.lower()[j] - self.x[j]) / u;
                let b = (self.body.upper()[j] - self.x[j]) / u;
                lo = lo.max(a.min(b));
                hi = hi.min(a.max(b));
            }
        }
        for (r, h) in self.body.halfspaces().iter().enumerate() {
            let au = dot(&h.normal, &self.dir);
            self.rate[r] = au;
            let s = self.slack[r].max(0.0);
            if au > 0.0 {
                hi = hi.min(s / au);
            } else if au < 0.0 {
                lo = lo.max(s / au);
            }
        }
        lo = lo.min(0.0);
        hi = hi.max(0.0);
        if !(hi > lo) {
            return;
        }
        let t = rng.random_range(lo..hi);
        for j in 0..n {
            self.x[j] = (self.x[j] + t * self.dir[j])
                .clamp(self.body.lower()[j], self.body.upper()[j]);
        }
        for (s, &au) in self.slack.iter_mut().zip(&self.rate) {
            *s -= t * au;
        }
    }

    fn coordinate_step(&mut self, rng: &mut ChaCha8Rng) {
        let j = rng.random_range(0..self.x.len());
        let xj = self.x[j];
        let mut lo = self.body.lower()[j] - xj;
        let mut hi = self.body.upper()[j] - xj;
        for &(r, a) in &self.columns[j] {
            let s = self.slack[r].max(0.0);
            if a > 0.0 {
                hi = hi.min(s / a);
            } else {
                lo = lo.max(s / a);
            }
        }
        lo = lo.min(0.0);
        hi = hi.max(0.0);
        if !(hi > lo) {
            return;
        }
        let t = rng.random_range(lo..hi);
        self.x[j] = (xj + t).clamp(self.body.lower()[j], self.body.upper()[j]);
        let moved = self.x[j] - xj;
        for &(r, a) in &self.columns[j] {
            self.slack[r] -= moved * a;
        }
    }
}

/// A uniform point of the unit ball in `dim` dimensions.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let len = dot(&g, &g).sqrt();
        if len > 0.0 {
            let r: f64 = rng.random::<f64>().powf(1.0 / dim as f64);
            return g.into_iter().map(|x| x * r / len).collect();
        }
    }
}

/// Empirical `q`-quantile with linear interpolation between order statistics.
pub fn empirical_quantile(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let pos = q * (values.len() - 1) as f64;
    let k = pos.floor() as usize;
    let frac = pos - k as f64;
    let (_, &mut lo, rest) = values.select_nth_unstable_by(k, f64::total_cmp);
    if frac == 0.0 || rest.is_empty() {
        return lo;
    }
    let hi = rest.iter().copied().fold(f64::INFINITY, f64::min);
    lo + frac * (hi - lo)
}

/// A reusable set of polytope samples and unit-ball offsets. Projections of
/// `point + z·offset` give samples of the expansion body `K + zB`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePool {
    pub points: Vec<Vec<f64>>,
    pub offsets: Vec<Vec<f64>>,
}

impl SamplePool {
    pub fn draw(
        body: &ConvexBody,
        cfg: &SamplerConfig,
        start: Option<&[f64]>,
        seed: u64,
    ) -> Result<Self> {
        let points = sample_polytope(body, cfg, start, mix_seed(seed, 1))?;
        let mut rng = rng_from(mix_seed(seed, 2));
        let offsets = (0..cfg.samples)
            .map(|_| uniform_in_ball(&mut rng, body.dim()))
            .collect();
        Ok(Self { points, offsets })
    }

    /// `q`-quantile of `⟨direction, v⟩` for `v` uniform in `K + zB`.
    pub fn quantile(&self, direction: &[f64], z: f64, q: f64) -> f64 {
        let mut values: Vec<f64> = self
            .points
            .iter()
            .zip(&self.offsets)
            .map(|(p, u)| dot(direction, p) + z * dot(direction, u))
            .collect();
        empirical_quantile(&mut values, q)
    }

    /// Fraction of samples with `⟨direction, v⟩` strictly positive and
    /// strictly negative (polytope samples only).
    pub fn sign_fractions(&self, direction: &[f64]) -> (f64, f64) {
        let n = self.points.len() as f64;
        let (mut pos, mut neg) = (0usize, 0usize);
        for p in &self.points {
            let v = dot(direction, p);
            if v > 0.0 {
                pos += 1;
            } else if v < 0.0 {
                neg += 1;
            }
        }
        (pos as f64 / n, neg as f64 / n)
    }
}

/// Empirical `q`-quantile of `⟨direction, v⟩` over `n` approximately uniform
/// samples of `body` (expansion included).
pub fn directional_quantile(
    body: &ConvexBody,
    direction: &[f64],
    q: f64,
    n: usize,
    seed: u64,
) -> Result<f64> {
    check_dim("direction", body.dim(), direction.len())?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Input(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let cfg = SamplerConfig {
        samples: n,
        ..SamplerConfig::default()
    };
    let pool = SamplePool::draw(body, &cfg, None, seed)?;
    Ok(pool.quantile(direction, body.expansion(), q))
}

/// Uniform samples of `body` (expansion included) by rejection from its
/// bounding box. Intended for low dimensions.
pub fn rejection_sample(
    body: &ConvexBody,
    n: usize,
    seed: u64,
    max_tries: usize,
) -> Result<Vec<Vec<f64>>> {
    let (lo, hi) = body.bounding_box()?;
    let mut rng = rng_from(seed);
    let mut out = Vec::with_capacity(n);
    let mut tries = 0usize;
    while out.len() < n {
        tries += 1;
        if tries > max_tries {
            return Err(Error::Generation(format!(
                "rejection sampling accepted {} of {n} points in {max_tries} tries",
                out.len()
            )));
        }
        let x: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| if h > l { rng.random_range(l..h) } else { l })
            .collect();
        if body.contains(&x)? {
            out.push(x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_reproducible() {
        let body = ConvexBody::cube(1, 0.0, 1.0).unwrap();
        let a = hit_and_run(&body, 100, 10, 7).unwrap();
        let b = hit_and_run(&body, 100, 10, 7).unwrap();
        assert_eq!(a.len(), 100);
        assert!(a.iter().all(|p| (0.0..=1.0).contains(&p[0])));
        assert_eq!(a, b);
    }

    #[test]
    fn cut_square_respected() {
        let mut body = ConvexBody::cube(2, -1.0, 1.0).unwrap();
        body.add_halfspace(vec![1.0, 0.0], 0.0).unwrap();
        let pts = hit_and_run(&body, 1000, 50, 3).unwrap();
        assert!(pts.iter().all(|p| p[0] <= 1e-9));
    }

    #[test]
    fn square_mean_is_centered() {
        let body = ConvexBody::cube(2, -1.0, 1.0).unwrap();
        let pts = hit_and_run(&body, 100_000, 100, 11).unwrap();
        let mean = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn high_dimensional_walk_stays_inside() {
        let mut body = ConvexBody::cube(40, -1.0, 1.0).unwrap();
        let mut a = vec![0.0; 40];
        a[3] = 1.0;
        a[17] = -1.0;
        body.add_halfspace(a, 0.1).unwrap();
        let pts = hit_and_run(&body, 500, 400, 5).unwrap();
        assert!(pts.iter().all(|p| body.max_violation(p) <= 1e-9));
    }

    #[test]
    fn empty_body_has_no_samples() {
        let mut body = ConvexBody::cube(1, -2.0, 2.0).unwrap();
        body.add_halfspace(vec![-1.0], -3.0).unwrap();
        assert_eq!(hit_and_run(&body, 10, 10, 1), Err(Error::EmptyBody));
    }

    #[test]
    fn symmetric_box_median_is_zero() {
        let body = ConvexBody::cube(3, -2.0, 2.0).unwrap();
        let g = directional_quantile(&body, &[1.0, 0.0, 0.0], 0.5, 4096, 9).unwrap();
        // sd of the median of U(-2, 2) with n = 4096 is about 2/sqrt(4096) = 0.031
        assert!(g.abs() < 0.1, "{g}");
    }

    #[test]
    fn interval_quarter_quantile() {
        let body = ConvexBody::cube(1, 0.0, 1.0).unwrap();
        let g = directional_quantile(&body, &[1.0], 0.25, 100_000, 4).unwrap();
        assert!((g - 0.25).abs() < 0.02, "{g}");
    }

    #[test]
    fn expanded_interval_median() {
        let body = ConvexBody::cube(1, 0.0, 1.0).unwrap().with_expansion(0.5).unwrap();
        let g = directional_quantile(&body, &[1.0], 0.5, 100_000, 4).unwrap();
        assert!((g - 0.5).abs() < 0.03, "{g}");
    }

    #[test]
    fn quantile_monotone_in_level() {
        let mut body = ConvexBody::cube(2, -1.0, 1.0).unwrap();
        body.add_halfspace(vec![1.0, 2.0], 0.3).unwrap();
        let levels = [0.05, 0.2, 0.5, 0.7, 0.95];
        let values: Vec<f64> = levels
            .iter()
            .map(|&q| directional_quantile(&body, &[0.6, 0.8], q, 2000, 21).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[0] <= w[1]), "{values:?}");
        let top = body.support(&[0.6, 0.8]).unwrap();
        let bottom = -body.support(&[-0.6, -0.8]).unwrap();
        assert!(values.iter().all(|&g| g >= bottom - 1e-9 && g <= top + 1e-9));
    }

    #[test]
    fn invalid_level_rejected() {
        let body = ConvexBody::cube(1, 0.0, 1.0).unwrap();
        assert!(directional_quantile(&body, &[1.0], 1.0, 10, 1).is_err());
    }

    #[test]
    fn ball_samples_in_ball() {
        let mut rng = rng_from(3);
        for d in 1..6 {
            for _ in 0..200 {
                let u = uniform_in_ball(&mut rng, d);
                assert!(dot(&u, &u) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn quantile_interpolates() {
        let mut v = vec![3.0, 1.0, 2.0, 4.0];
        assert!((empirical_quantile(&mut v, 0.5) - 2.5).abs() < 1e-12);
        let mut v = vec![5.0];
        assert_eq!(empirical_quantile(&mut v, 0.3), 5.0);
    }

    #[test]
    fn rejection_samples_expanded_body() {
        let body = ConvexBody::cube(2, 0.0, 1.0).unwrap().with_expansion(0.2).unwrap();
        let pts = rejection_sample(&body, 500, 8, 100_000).unwrap();
        assert!(pts.iter().all(|p| body.contains(p).unwrap()));
        assert!(pts.iter().any(|p| p[0] < 0.0));
    }
}
