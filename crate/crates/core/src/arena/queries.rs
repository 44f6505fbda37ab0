//! Query sources: uniform, margin-filtered, adaptive, and replayed streams.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::sampling::rng_from;

use super::env::Environment;

/// Rejection-sampling budget per margin query.
pub const MARGIN_TRIES: usize = 1_000_000;
/// Candidates scored per round by the adaptive source.
pub const DEFAULT_CANDIDATES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum QuerySource {
    UniformBall,
    /// Uniform queries whose margin is at least `gamma`.
    Margin { gamma: f64 },
    /// Each round, the candidate with the largest learner loss bound.
    AdaptiveWidth { candidates: usize },
    /// Fixed queries, e.g. read from a replay file.
    Replay(Vec<Vec<f64>>),
}

pub fn uniform_stream(env: &Environment, rounds: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from(seed);
    (0..rounds).map(|_| env.uniform_query(&mut rng)).collect()
}

/// `rounds` uniform queries with `env.margin(q) ≥ gamma`.
pub fn margin_stream(env: &Environment, gamma: f64, rounds: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::Input(format!("margin must be nonnegative, got {gamma}")));
    }
    let mut rng = rng_from(seed);
    let mut out = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let mut found = None;
        for _ in 0..MARGIN_TRIES {
            let q = env.uniform_query(&mut rng);
            if env.margin(&q) >= gamma {
                found = Some(q);
                break;
            }
        }
        match found {
            Some(q) => out.push(q),
            None => {
                return Err(Error::Generation(format!(
                    "no query with margin {gamma} after {MARGIN_TRIES} tries"
                )))
            }
        }
    }
    Ok(out)
}

/// One query per line, whitespace-separated coordinates. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_replay(text: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let q = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Input(format!("replay line {}: {e}", n + 1)))?;
        if q.len() != dim {
            return Err(Error::Input(format!(
                "replay line {}: expected {dim} coordinates, got {}",
                n + 1,
                q.len()
            )));
        }
        if q.iter().any(|x| !x.is_finite()) || q.iter().map(|x| x * x).sum::<f64>() > 1.0 + 1e-12 {
            return Err(Error::Input(format!("replay line {}: query outside the unit ball", n + 1)));
        }
        out.push(q);
    }
    Ok(out)
}

pub fn read_replay(path: &Path, dim: usize) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read replay file {}: {e}", path.display())))?;
    parse_replay(&text, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::env::Metric;

    fn env() -> Environment {
        Environment::random(Metric::InnerProduct, 2, 3, 1.0, 1.0, 1).unwrap()
    }

    #[test]
    fn zero_margin_is_uniform() {
        let e = env();
        assert_eq!(margin_stream(&e, 0.0, 50, 4).unwrap(), uniform_stream(&e, 50, 4));
    }

    #[test]
    fn margin_stream_respects_margin() {
        let e = env();
        let qs = margin_stream(&e, 0.01, 10_000, 5).unwrap();
        assert_eq!(qs.len(), 10_000);
        let min = qs.iter().map(|q| e.margin(q)).fold(f64::INFINITY, f64::min);
        assert!(min >= 0.01);
    }

    #[test]
    fn impossible_margin_fails() {
        let e = Environment::new(Metric::InnerProduct, vec![vec![0.1], vec![-0.1]], 1.0).unwrap();
        assert!(matches!(margin_stream(&e, 1.0, 1, 0), Err(Error::Generation(_))));
    }

    #[test]
    fn replay_parsing() {
        let qs = parse_replay("# queries\n0.1 0.2\n\n-0.5 0\n", 2).unwrap();
        assert_eq!(qs, vec![vec![0.1, 0.2], vec![-0.5, 0.0]]);
        assert!(parse_replay("0.1\n", 2).is_err());
        assert!(parse_replay("2 0\n", 2).is_err());
        assert!(parse_replay("x y\n", 2).is_err());
    }
}
