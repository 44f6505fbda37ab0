//! Verification suites: each check reports a measured value against its
//! bound. The sizes used by `nnpart verify` are desk-sized; the acceptance
//! tests call the same checks at full size.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use nnpart::arena::{Environment, Metric};
use nnpart::kernels::{lp_distance, taylor_remainder, EvenPKernel, GeneralPKernel};
use nnpart::knowledge::{expanded_volume_ratio, ScaleSchedule};
use nnpart::multiclass::choose_distribution;
use nnpart::multiscale::{MultiscaleConfig, MultiscaleLearner};
use nnpart::numerics::sampling::{rng_from, uniform_in_ball, SamplerConfig};
use nnpart::numerics::{dot, mix_seed};
use nnpart::pairwise::{PairwiseLearner, Side, TwoCenterLearner};
use nnpart::Result;

pub const SUITES: &[&str] = &["kernels", "lp", "containment", "volume"];

/// One named check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Number of cases examined.
    pub cases: usize,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn measurement(&self) -> String {
        format!(
            "measured {:.6e} vs bound {:.6e} over {} cases",
            self.measured, self.bound, self.cases
        )
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measurement()
        )
    }
}

/// Largest `|⟨G(y), H(z)⟩ - ‖(y - z)/p‖_p^p / (p d)|` over random pairs in
/// the unit ball, for `p ∈ {2, 4}` and `d ∈ {1, 3}`.
pub fn even_p_exactness(cases: usize, seed: u64) -> Result<Check> {
    let mut rng = rng_from(seed);
    let mut worst = 0.0f64;
    let mut n = 0;
    for p in [2u32, 4] {
        for d in [1usize, 3] {
            let k = EvenPKernel::new(p, d)?;
            let pf = p as f64;
            for _ in 0..cases {
                let y = uniform_in_ball(&mut rng, d);
                let z = uniform_in_ball(&mut rng, d);
                let ip = dot(&k.lift_center(&y)?, &k.lift_query(&z)?);
                let ys: Vec<f64> = y.iter().map(|v| v / pf).collect();
                let zs: Vec<f64> = z.iter().map(|v| v / pf).collect();
                let want = lp_distance(&ys, &zs, pf).powf(pf) / (pf * d as f64);
                worst = worst.max((ip - want).abs());
                n += 1;
            }
        }
    }
    Ok(Check {
        name: "even_p_exactness".into(),
        cases: n,
        measured: worst,
        bound: 1e-9,
        passed: worst <= 1e-9,
    })
}

/// General-p lift error against `d (p δ_i)^p` for `p ∈ {2.5, 3.5}`,
/// `d ∈ {1, 2}`, `i ∈ {1, 2}`. Reports the largest error-to-bound ratio;
/// the pass test compares error and bound directly.
pub fn general_p_bound(pairs: usize, c_scale: f64, seed: u64) -> Result<Check> {
    let mut rng = rng_from(seed);
    let (mut ratio, mut n, mut passed) = (0.0f64, 0, true);
    for p in [2.5, 3.5] {
        for d in [1usize, 2] {
            for i in [1u32, 2] {
                let k = GeneralPKernel::new(p, d, i, c_scale)?;
                let bound = k.error_bound();
                for _ in 0..pairs {
                    let y = uniform_in_ball(&mut rng, d);
                    let z = if rng.random::<f64>() < 0.1 {
                        y.clone()
                    } else {
                        uniform_in_ball(&mut rng, d)
                    };
                    let ip = k.lift_query(&z)?.dot_dense(&k.lift_center(&y)?);
                    let want: f64 = y.iter().zip(&z).map(|(a, b)| ((a - b) / 2.0).abs().powf(p)).sum();
                    let err = (ip - want).abs();
                    passed &= err <= bound;
                    ratio = ratio.max(err / bound);
                    n += 1;
                }
            }
        }
    }
    Ok(Check {
        name: "general_p_bound".into(),
        cases: n,
        measured: ratio,
        bound: 1.0,
        passed,
    })
}

/// Taylor remainder of `|x|^p` around `x'` against `(p |x - x'|)^p`, for
/// `p ∈ (2, 6)` and `x, x' ∈ [-1, 1]`; half of the pairs are close together,
/// where the bound is tightest. Reports the largest excess over the bound.
pub fn taylor_remainder_bound(triples: usize, seed: u64) -> Result<Check> {
    let mut rng = rng_from(seed);
    let mut worst = f64::NEG_INFINITY;
    for t in 0..triples {
        let p = rng.random_range(2.0..6.0);
        let x0: f64 = rng.random_range(-1.0..=1.0);
        let x: f64 = if t % 2 == 0 {
            rng.random_range(-1.0..=1.0)
        } else {
            (x0 + rng.random_range(-1e-2..1e-2)).clamp(-1.0, 1.0)
        };
        let excess = taylor_remainder(p, x, x0) - (p * (x - x0).abs()).powf(p);
        worst = worst.max(excess);
    }
    Ok(Check {
        name: "taylor_remainder".into(),
        cases: triples,
        measured: worst,
        bound: 1e-12,
        passed: worst <= 1e-12,
    })
}

/// Random `k × k` matrices with `M + Mᵀ ≥ 0` entrywise, `2 ≤ k ≤ max_k`:
/// the chosen distribution must satisfy `Mv ≥ -tol`, `Σv = 1 ± tol` and
/// `v ≥ 0`. Reports the worst `min(Mv)`.
pub fn distribution_feasibility(matrices: usize, max_k: usize, tol: f64, seed: u64) -> Result<Check> {
    let mut rng = rng_from(seed);
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    for _ in 0..matrices {
        let k = rng.random_range(2..=max_k.max(2));
        let sparse_sym = rng.random::<f64>() < 0.5;
        let mut m = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i..k {
                let anti = if i == j { 0.0 } else { rng.random_range(-1.0..1.0) };
                let sym = if sparse_sym && rng.random::<f64>() < 0.7 {
                    0.0
                } else {
                    rng.random_range(0.0..1.0)
                };
                m[i][j] = anti + sym / 2.0;
                m[j][i] = -anti + sym / 2.0;
            }
        }
        let v = match choose_distribution(&m) {
            Ok(v) => v,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let mv = m
            .iter()
            .map(|row| dot(row, &v))
            .fold(f64::INFINITY, f64::min);
        let total: f64 = v.iter().sum();
        worst = worst.min(mv);
        if mv < -tol || (total - 1.0).abs() > tol || v.iter().any(|&x| x < 0.0) {
            failures += 1;
        }
    }
    Ok(Check {
        name: format!("distribution_feasibility ({failures} failures)"),
        cases: matrices,
        measured: worst,
        bound: -tol,
        passed: failures == 0,
    })
}

/// Desk-scale multiscale settings for `p = 2.5`, `d = 1`.
pub fn desk_multiscale(seed: u64, separation: f64) -> MultiscaleConfig {
    MultiscaleConfig {
        p: 2.5,
        d: 1,
        alpha: 1.0,
        c_scale: 2.0,
        selection_constant: 1.0,
        slack_constant: 3.0,
        i_cap: 4,
        separation: Some(separation),
        sampler: SamplerConfig::new(1024, 64),
        seed,
    }
}

/// A multiscale run on uniform queries with two random centers at least
/// `0.5` apart: after every round the lifted truth must satisfy every cut of
/// every scale set. Reports the largest violation (nonpositive is a pass).
pub fn multiscale_containment(rounds: usize, seed: u64) -> Result<Check> {
    let p = 2.5;
    let env = Environment::random(Metric::Lp(p), 2, 1, 1.0, 0.5, mix_seed(seed, 1))?;
    let (x1, x2) = (env.centers[0].clone(), env.centers[1].clone());
    let mut learner = MultiscaleLearner::new(desk_multiscale(mix_seed(seed, 2), 0.5))?;
    let mut rng = rng_from(mix_seed(seed, 3));
    let mut worst = f64::NEG_INFINITY;
    let mut seen = BTreeMap::new();
    for _ in 0..rounds {
        let q = uniform_in_ball(&mut rng, 1);
        let truth = if env.nearest(&q) == 0 { Side::First } else { Side::Second };
        let guess = learner.predict(&q)?;
        learner.observe(&q, guess, truth)?;
        worst = worst.max(learner.new_truth_violation(&x1, &x2, &mut seen)?);
    }
    Ok(Check {
        name: "multiscale_containment".into(),
        cases: rounds,
        measured: worst,
        bound: 0.0,
        passed: worst <= 0.0,
    })
}

/// Two-point inner-product runs in `d = 2`: on each sampled mistake round
/// the expanded knowledge set `K + z_i B` at the chosen index must shrink to
/// at most `3/4` of its volume, up to three standard errors of the `n`-point
/// estimate. At most `per_run` mistakes are taken from each run. Reports the
/// largest `ratio - 3σ`.
pub fn volume_decrease(mistakes: usize, per_run: usize, n: usize, seed: u64) -> Result<Check> {
    let d = 2;
    let horizon = 2000;
    let mut worst = f64::NEG_INFINITY;
    let mut taken = 0;
    let mut run = 0u64;
    while taken < mistakes {
        let env = Environment::random(Metric::InnerProduct, 2, d, 1.0, 0.0, mix_seed(seed, 2 * run))?;
        let schedule = ScaleSchedule::for_horizon(d, 1.0, horizon)?;
        let mut learner = PairwiseLearner::new(schedule, SamplerConfig::default(), mix_seed(seed, 2 * run + 1))?;
        let mut rng = rng_from(mix_seed(seed, 1 << 32 | run));
        let mut in_run = 0;
        for _ in 0..horizon {
            if in_run == per_run || taken == mistakes {
                break;
            }
            let q = uniform_in_ball(&mut rng, d);
            let truth = if env.nearest(&q) == 0 { Side::First } else { Side::Second };
            let guess = learner.predict(&q)?;
            if guess == truth {
                learner.observe(&q, guess, truth)?;
                continue;
            }
            let (_, i) = learner.guess(&q)?;
            let z = learner.search().schedule().z(i);
            let before = learner.search().knowledge().body().clone();
            learner.observe(&q, guess, truth)?;
            let after = learner.search().knowledge().body();
            let (ratio, se) = expanded_volume_ratio(&before, after, z, n, mix_seed(seed, 7 + taken as u64))?;
            worst = worst.max(ratio - 3.0 * se);
            taken += 1;
            in_run += 1;
        }
        run += 1;
    }
    Ok(Check {
        name: "volume_decrease".into(),
        cases: taken,
        measured: worst,
        bound: 0.75,
        passed: worst <= 0.75,
    })
}

/// The checks of one suite at the sizes `nnpart verify` uses.
pub fn run_suite(suite: &str, seed: u64) -> Option<Result<Vec<Check>>> {
    let checks = match suite {
        "kernels" => (|| {
            Ok(vec![
                even_p_exactness(100, seed)?,
                general_p_bound(1000, nnpart::multiscale::DEFAULT_C_SCALE, seed)?,
                taylor_remainder_bound(100_000, seed)?,
            ])
        })(),
        "lp" => distribution_feasibility(10_000, 8, 1e-9, seed).map(|c| vec![c]),
        "containment" => multiscale_containment(300, seed).map(|c| vec![c]),
        "volume" => volume_decrease(10, 5, 20_000, seed).map(|c| vec![c]),
        _ => return None,
    };
    Some(checks)
}
