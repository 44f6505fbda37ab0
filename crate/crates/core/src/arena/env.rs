//! Hidden centers, similarity metrics, and the exact loss oracle.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{check_dim, check_finite, Error, Result};
use crate::kernels::lp_distance;
use crate::numerics::dot;
use crate::numerics::sampling::{rng_from, uniform_in_ball};

const CENTER_TRIES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    /// `δ(q, x) = -⟨q, x⟩`.
    InnerProduct,
    /// `δ(q, x) = ‖q - x‖₂`.
    L2,
    /// `δ(q, x) = ‖q - x‖_p` for `p ≥ 1`.
    Lp(f64),
}

impl Metric {
    pub fn similarity(&self, q: &[f64], x: &[f64]) -> f64 {
        match self {
            Metric::InnerProduct => -dot(q, x),
            Metric::L2 => lp_distance(q, x, 2.0),
            Metric::Lp(p) => lp_distance(q, x, *p),
        }
    }

    /// Distance used for center separation: Euclidean for the inner product
    /// and L², else the metric's own norm.
    pub fn separation(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::InnerProduct | Metric::L2 => lp_distance(a, b, 2.0),
            Metric::Lp(p) => lp_distance(a, b, *p),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::InnerProduct => write!(f, "inner_product"),
            Metric::L2 => write!(f, "l2"),
            Metric::Lp(p) => write!(f, "lp({p})"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    /// Accepts `inner_product`, `l2` and `lp` (the exponent is set
    /// separately with [`Metric::with_p`]).
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inner_product" => Ok(Metric::InnerProduct),
            "l2" => Ok(Metric::L2),
            "lp" => Ok(Metric::Lp(2.0)),
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }
}

impl Metric {
    pub fn with_p(self, p: f64) -> Result<Self> {
        match self {
            Metric::Lp(_) if !(p >= 1.0 && p.is_finite()) => {
                Err(Error::Config(format!("p must be at least 1, got {p}")))
            }
            Metric::Lp(_) => Ok(Metric::Lp(p)),
            m => Ok(m),
        }
    }
}

/// Labels are `0..k`; label `i` owns center `centers[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub metric: Metric,
    pub centers: Vec<Vec<f64>>,
    /// Exponent applied to the similarity gap.
    pub alpha: f64,
}

impl Environment {
    pub fn new(metric: Metric, centers: Vec<Vec<f64>>, alpha: f64) -> Result<Self> {
        if centers.len() < 2 {
            return Err(Error::Input("need at least two centers".into()));
        }
        let d = centers[0].len();
        if d == 0 {
            return Err(Error::Input("centers must have positive dimension".into()));
        }
        for c in &centers {
            check_dim("center", d, c.len())?;
            check_finite("center", c)?;
            if dot(c, c) > 1.0 + 1e-12 {
                return Err(Error::Input("centers must lie in the unit ball".into()));
            }
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Input(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self {
            metric,
            centers,
            alpha,
        })
    }

    /// `k` centers uniform in the unit ball, resampled until every pair is at
    /// least `min_separation` apart.
    pub fn random(
        metric: Metric,
        k: usize,
        d: usize,
        alpha: f64,
        min_separation: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = rng_from(seed);
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut tries = 0;
        while centers.len() < k {
            tries += 1;
            if tries > CENTER_TRIES {
                return Err(Error::Generation(format!(
                    "could not place {k} centers with separation {min_separation}"
                )));
            }
            let c = uniform_in_ball(&mut rng, d);
            if centers.iter().all(|x| metric.separation(x, &c) >= min_separation) {
                centers.push(c);
            }
        }
        Self::new(metric, centers, alpha)
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn similarities(&self, q: &[f64]) -> Vec<f64> {
        self.centers.iter().map(|x| self.metric.similarity(q, x)).collect()
    }

    /// Smallest pairwise separation between centers.
    pub fn min_separation(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.k() {
            for j in i + 1..self.k() {
                m = m.min(self.metric.separation(&self.centers[i], &self.centers[j]));
            }
        }
        m
    }

    /// Lowest label attaining the minimum similarity.
    pub fn nearest(&self, q: &[f64]) -> usize {
        let s = self.similarities(q);
        (0..s.len()).fold(0, |best, i| if s[i] < s[best] { i } else { best })
    }

    /// The label reported as the truth for `guess`: the guess itself when it
    /// attains the minimum (ties count as correct), else the lowest minimizer.
    pub fn truth_for(&self, q: &[f64], guess: usize) -> usize {
        let s = self.similarities(q);
        let best = self.nearest(q);
        if guess < s.len() && s[guess] <= s[best] {
            guess
        } else {
            best
        }
    }

    /// `(δ(q, x_guess) - min_j δ(q, x_j))^α`.
    pub fn exact_loss(&self, q: &[f64], guess: usize) -> Result<f64> {
        check_dim("query", self.dim(), q.len())?;
        if guess >= self.k() {
            return Err(Error::Input(format!("label {guess} out of range")));
        }
        let s = self.similarities(q);
        let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        let gap = (s[guess] - min).max(0.0);
        Ok(if gap == 0.0 { 0.0 } else { gap.powf(self.alpha) })
    }

    /// Gap between the second-smallest and the smallest similarity: how far
    /// `q` is from the nearest decision boundary in similarity units.
    pub fn margin(&self, q: &[f64]) -> f64 {
        let mut s = self.similarities(q);
        s.sort_by(f64::total_cmp);
        s[1] - s[0]
    }

    /// A uniform query in the unit ball.
    pub fn uniform_query<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        uniform_in_ball(rng, self.dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_product_losses() {
        let env = Environment::new(
            Metric::InnerProduct,
            vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
            1.0,
        )
        .unwrap();
        assert_eq!(env.exact_loss(&[1.0, 0.0], 1).unwrap(), 2.0);
        assert_eq!(env.exact_loss(&[1.0, 0.0], 0).unwrap(), 0.0);
        assert_eq!(env.margin(&[1.0, 0.0]), 2.0);
    }

    #[test]
    fn l2_tie_is_free_for_either_guess() {
        let env = Environment::new(Metric::L2, vec![vec![0.0, 0.0], vec![1.0, 0.0]], 1.0).unwrap();
        let q = [0.5, 0.0];
        assert_eq!(env.exact_loss(&q, 0).unwrap(), 0.0);
        assert_eq!(env.exact_loss(&q, 1).unwrap(), 0.0);
        assert_eq!(env.truth_for(&q, 1), 1);
        assert_eq!(env.truth_for(&q, 0), 0);
    }

    #[test]
    fn alpha_applies_to_gap() {
        let env = Environment::new(Metric::L2, vec![vec![0.0], vec![1.0]], 2.0).unwrap();
        let l = env.exact_loss(&[0.0], 1).unwrap();
        assert!((l - 1.0).abs() < 1e-15);
        let l = env.exact_loss(&[0.25], 1).unwrap();
        assert!((l - 0.25).abs() < 1e-15);
    }

    #[test]
    fn random_centers_are_separated() {
        let env = Environment::random(Metric::Lp(2.5), 4, 2, 1.0, 0.5, 3).unwrap();
        assert!(env.min_separation() >= 0.5);
        assert!(env.centers.iter().all(|c| dot(c, c) <= 1.0));
        assert!(matches!(
            Environment::random(Metric::L2, 5, 1, 1.0, 1.5, 3),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn metric_names() {
        assert_eq!("l2".parse::<Metric>().unwrap(), Metric::L2);
        assert_eq!(Metric::Lp(2.5).to_string(), "lp(2.5)");
        assert!("cosine".parse::<Metric>().is_err());
    }
}
