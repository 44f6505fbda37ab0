//! Shared numeric kernels: a dense LP solver, convex bodies described by a box
//! and halfspaces (optionally grown by a Euclidean ball), and uniform sampling
//! from such bodies.

pub mod body;
pub mod linalg;
pub mod lp;
pub mod minnorm;
pub mod sampling;
pub mod vertices;

pub use body::{ConvexBody, Halfspace};
pub use lp::{solve_lp, Constraint, LinearProgram, LpStatus, Relation, Sense};
pub use sampling::{directional_quantile, hit_and_run, SamplerConfig};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Mixes a base seed with a stream discriminator (splitmix64 finalizer).
pub fn mix_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Log of the volume of the unit Euclidean ball in `d` dimensions.
pub fn log_unit_ball_volume(d: usize) -> f64 {
    // kappa_0 = 1, kappa_1 = 2, kappa_d = kappa_{d-2} * 2π / d
    let mut even = 0.0f64;
    let mut odd = 2f64.ln();
    for k in 2..=d {
        let next = if k % 2 == 0 { &mut even } else { &mut odd };
        *next += (2.0 * std::f64::consts::PI / k as f64).ln();
    }
    if d % 2 == 0 {
        even
    } else {
        odd
    }
}
