//! Coordinate lifts that turn distance comparisons into inner products.
//!
//! * Euclidean: `T(x) = (x, ‖x‖²)/√2` and `Q(q) = (2q, -1)/√5`, so that
//!   `⟨T(x), Q(q)⟩ = (‖q‖² - ‖x - q‖²)/√10` ranks centers by L² distance.
//! * Even `p`: per coordinate the monomials `(1, a, …, a^p)` against the
//!   binomial coefficients of `(a - b)^p`, which reproduces
//!   `‖(y - z)/p‖_p^p / (pd)` exactly.
//! * General `p > 2` at scale `i`: the interval `[-1/2, 1/2]` is split into
//!   `2D + 1` grid points `cδ`; the center map stores the derivatives of
//!   `|t|^p` at every grid point and the query map the truncated Taylor
//!   weights at the grid point just below the query coordinate. The inner
//!   product approximates `‖(y - z)/2‖_p^p` within `d (pδ)^p`.

use crate::error::{check_dim, check_finite, Error, Result};
use crate::numerics::{dot, norm};

const BALL_TOL: f64 = 1e-9;

fn check_ball(what: &str, v: &[f64]) -> Result<()> {
    check_finite(what, v)?;
    let n = norm(v);
    if n > 1.0 + BALL_TOL {
        return Err(Error::Input(format!("{what} has norm {n}, outside the unit ball")));
    }
    Ok(())
}

/// `‖a - b‖_p`.
pub fn lp_distance(a: &[f64], b: &[f64], p: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// `sign(x)` with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `p (p-1) ⋯ (p-m+1) / m!`.
pub fn taylor_weight(p: f64, m: usize) -> f64 {
    (0..m).fold(1.0, |acc, k| acc * (p - k as f64) / (k + 1) as f64)
}

fn binomial(n: u32, k: u32) -> f64 {
    taylor_weight(n as f64, k as usize).round()
}

/// `|x|^p` against its Taylor expansion around `x0` through order `⌊p⌋`:
/// true iff the gap is at most `(p |x - x0|)^p + 1e-12`.
pub fn taylor_remainder_check(p: f64, x: f64, x0: f64) -> bool {
    taylor_remainder(p, x, x0) <= (p * (x - x0).abs()).powf(p) + 1e-12
}

/// `| |x|^p - Σ_{m ≤ ⌊p⌋} w_m (x - x0)^m sign(x0)^m |x0|^(p-m) |`.
pub fn taylor_remainder(p: f64, x: f64, x0: f64) -> f64 {
    let top = p.floor() as usize;
    let s = sign(x0);
    let h = x - x0;
    let approx: f64 = (0..=top)
        .map(|m| taylor_weight(p, m) * h.powi(m as i32) * s.powi(m as i32) * x0.abs().powf(p - m as f64))
        .sum();
    (x.abs().powf(p) - approx).abs()
}

/// `T(x) = (x, ‖x‖²)/√2` for `x` in the unit ball.
pub fn l2_lift_center(x: &[f64]) -> Result<Vec<f64>> {
    check_ball("center", x)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out: Vec<f64> = x.iter().map(|v| s * v).collect();
    out.push(s * dot(x, x));
    Ok(out)
}

/// `Q(q) = (2q, -1)/√5` for `q` in the unit ball.
pub fn l2_lift_query(q: &[f64]) -> Result<Vec<f64>> {
    check_ball("query", q)?;
    let s = 1.0 / 5f64.sqrt();
    let mut out: Vec<f64> = q.iter().map(|v| 2.0 * s * v).collect();
    out.push(-s);
    Ok(out)
}

/// Converts a lifted Euclidean inner-product loss bound to an L² distance
/// loss bound: `ℓ₂ ≤ 2 √ℓ_lifted`.
pub fn l2_loss_from_lifted(lifted: f64) -> f64 {
    2.0 * lifted.max(0.0).sqrt()
}

/// Exact lift for even `p`; lifted dimension `(p + 1) d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvenPKernel {
    pub p: u32,
    pub d: usize,
}

impl EvenPKernel {
    pub fn new(p: u32, d: usize) -> Result<Self> {
        if p < 2 || p % 2 != 0 {
            return Err(Error::Input(format!("even-p kernel needs an even p >= 2, got {p}")));
        }
        if d == 0 {
            return Err(Error::Input("dimension must be positive".into()));
        }
        Ok(Self { p, d })
    }

    pub fn lifted_dim(&self) -> usize {
        (self.p as usize + 1) * self.d
    }

    fn scale(&self) -> f64 {
        1.0 / ((self.p as f64) * self.d as f64).sqrt()
    }

    /// `G(y)`: per coordinate `(1, a, …, a^p)` with `a = y_c / p`.
    pub fn lift_center(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim("center", self.d, y.len())?;
        check_ball("center", y)?;
        let p = self.p as usize;
        let s = self.scale();
        let mut out = Vec::with_capacity(self.lifted_dim());
        for &yc in y {
            let a = yc / self.p as f64;
            out.extend((0..=p).map(|j| s * a.powi(j as i32)));
        }
        Ok(out)
    }

    /// `H(z)`: per coordinate `((-1)^j C(p, j) b^(p-j))_j` with `b = z_c / p`.
    pub fn lift_query(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim("query", self.d, z.len())?;
        check_ball("query", z)?;
        let p = self.p;
        let s = self.scale();
        let mut out = Vec::with_capacity(self.lifted_dim());
        for &zc in z {
            let b = zc / p as f64;
            out.extend((0..=p).map(|j| {
                let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
                s * sgn * binomial(p, j) * b.powi((p - j) as i32)
            }));
        }
        Ok(out)
    }

    /// Factor bringing every lifted query into the unit ball:
    /// `min(1, 1/sqrt((1/p) Σ_j C(p, j)² p^(-2(p-j))))`.
    pub fn query_scale(&self) -> f64 {
        let p = self.p;
        let pf = p as f64;
        let sum: f64 = (0..=p)
            .map(|j| binomial(p, j).powi(2) * pf.powi(-2 * (p - j) as i32))
            .sum();
        (1.0 / (sum / pf).sqrt()).min(1.0)
    }

    /// `‖y - z‖_p` recovered from `⟨G(y), H(z)⟩`.
    pub fn distance_from_inner(&self, inner: f64) -> f64 {
        let p = self.p as f64;
        p.powf((p + 1.0) / p) * (self.d as f64).powf(1.0 / p) * inner.max(0.0).powf(1.0 / p)
    }

    /// Converts an inner-product loss bound on the scaled lifted queries
    /// `-s H(q)` to a bound on the L^p distance loss.
    pub fn loss_from_lifted(&self, lifted: f64) -> f64 {
        self.distance_from_inner(lifted.max(0.0) / self.query_scale())
    }
}

/// A sparse vector: sorted indices with values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVec {
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, v)| v * dense[j]).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(j, v) in &self.entries {
            out[j] = v;
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }
}

/// Taylor-block lift for real `p > 2` at scale index `i ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralPKernel {
    pub p: f64,
    pub d: usize,
    pub i: u32,
    pub c_scale: f64,
    /// Grid step `δ_i = 1/(c_scale d² p′ 2^i)`.
    pub delta: f64,
    /// Half grid size `D_i = 1/(2δ_i)`.
    pub half_grid: i64,
}

impl GeneralPKernel {
    pub fn new(p: f64, d: usize, i: u32, c_scale: f64) -> Result<Self> {
        if !(p > 2.0 && p.is_finite()) {
            return Err(Error::Input(format!("general-p kernel needs p > 2, got {p}")));
        }
        if d == 0 || i == 0 {
            return Err(Error::Input("dimension and scale index must be positive".into()));
        }
        if !(c_scale > 0.0 && c_scale.is_finite()) {
            return Err(Error::Config(format!("c_scale must be positive, got {c_scale}")));
        }
        let order = p.floor() + 1.0;
        let delta = 1.0 / (c_scale * (d * d) as f64 * order * 2f64.powi(i as i32));
        let half = 1.0 / (2.0 * delta);
        let half_grid = half.round();
        if (half - half_grid).abs() > 1e-9 * half.max(1.0) || half_grid < 1.0 {
            return Err(Error::Config(format!(
                "c_scale {c_scale} gives a non-integer grid size {half} at scale {i}"
            )));
        }
        if p * delta > 1.0 {
            return Err(Error::Config(format!(
                "grid step too coarse: p·δ = {} > 1 at scale {i}",
                p * delta
            )));
        }
        Ok(Self {
            p,
            d,
            i,
            c_scale,
            delta,
            half_grid: half_grid as i64,
        })
    }

    /// Number of derivative orders per group, `p′ = ⌊p⌋ + 1`.
    pub fn orders(&self) -> usize {
        self.p.floor() as usize + 1
    }

    pub fn groups(&self) -> usize {
        (2 * self.half_grid + 1) as usize
    }

    pub fn lifted_dim(&self) -> usize {
        self.orders() * self.d * self.groups()
    }

    /// Approximation error bound `d (pδ)^p`.
    pub fn error_bound(&self) -> f64 {
        self.d as f64 * (self.p * self.delta).powf(self.p)
    }

    fn index(&self, coord: usize, label: i64, order: usize) -> usize {
        let group = (label + self.half_grid) as usize;
        (coord * self.groups() + group) * self.orders() + order
    }

    /// Grid label `c` with `cδ ≤ x < (c+1)δ`, for `x ∈ [-1/2, 1/2]`.
    pub fn group_of(&self, x: f64) -> i64 {
        let mut c = (x / self.delta).floor() as i64;
        while c > -self.half_grid && (c as f64) * self.delta > x {
            c -= 1;
        }
        while c < self.half_grid && ((c + 1) as f64) * self.delta <= x {
            c += 1;
        }
        c.clamp(-self.half_grid, self.half_grid)
    }

    /// `(sign(x)^m |x|^(p-m))` for `m = 0..=⌊p⌋`.
    pub fn derivative_block(&self, x: f64) -> Vec<f64> {
        let s = sign(x);
        (0..self.orders())
            .map(|m| s.powi(m as i32) * x.abs().powf(self.p - m as f64))
            .collect()
    }

    /// `G_i(y)`: derivative blocks of `|t|^p` at `t = y_c/2 - cδ` for every
    /// coordinate and grid label.
    pub fn lift_center(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim("center", self.d, y.len())?;
        check_ball("center", y)?;
        let mut out = Vec::with_capacity(self.lifted_dim());
        for &yc in y {
            let x = yc / 2.0;
            for label in -self.half_grid..=self.half_grid {
                out.extend(self.derivative_block(x - label as f64 * self.delta));
            }
        }
        Ok(out)
    }

    /// `H_i(z)`: for each coordinate, the Taylor weights
    /// `w_m (cδ - x)^m` at the grid label `c` just below `x = z_c/2`.
    pub fn lift_query(&self, z: &[f64]) -> Result<SparseVec> {
        check_dim("query", self.d, z.len())?;
        check_ball("query", z)?;
        let mut entries = Vec::with_capacity(self.d * self.orders());
        for (coord, &zc) in z.iter().enumerate() {
            let x = zc / 2.0;
            let label = self.group_of(x);
            let h = label as f64 * self.delta - x;
            for m in 0..self.orders() {
                entries.push((
                    self.index(coord, label, m),
                    taylor_weight(self.p, m) * h.powi(m as i32),
                ));
            }
        }
        Ok(SparseVec {
            dim: self.lifted_dim(),
            entries,
        })
    }
}
