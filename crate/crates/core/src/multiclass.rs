//! The k-center reduction: one two-center learner per unordered label pair.
//!
//! Each round builds the loss-bound matrix `L` (symmetric, from the pairs'
//! loss bounds) and the drop matrix `D` (`D[r][i]` is the guaranteed drop of
//! pair `{r, i}` if `r` is the truth), solves for a distribution `v` with
//! `(D - L/2) v ≥ 0`, and samples the guess from `v`. Because
//! `D[i][j] + D[j][i] = L[i][j]`, such a `v` always exists, and it makes the
//! expected loss under any truth `r` at most twice the expected drop. On a
//! mistake only the pair (guess, truth) is updated.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::lp::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::numerics::sampling::rng_from;
use crate::pairwise::{Side, TwoCenterLearner};

const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RoundMatrices {
    pub loss: Vec<Vec<f64>>,
    pub drop: Vec<Vec<f64>>,
    /// `drop - loss / 2`.
    pub m: Vec<Vec<f64>>,
}

impl RoundMatrices {
    pub fn k(&self) -> usize {
        self.loss.len()
    }

    /// Largest entry of `(M + Mᵀ)` violating nonnegativity (0 if none).
    pub fn symmetric_deficit(&self) -> f64 {
        let k = self.k();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                worst = worst.max(-(self.m[i][j] + self.m[j][i]));
            }
        }
        worst
    }
}

/// Index of the unordered pair `{i, j}` (`i != j`) in row-major upper
/// triangular order.
pub fn pair_index(k: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    a * (2 * k - a - 1) / 2 + (b - a - 1)
}

/// All pairs `(i, j)` with `i < j` in [`pair_index`] order.
pub fn pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .collect()
}

/// A point `v` of the simplex with `M v ≥ 0`, from the feasibility LP.
/// An all-zero `M` yields the uniform distribution.
pub fn choose_distribution(m: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = m.len();
    if k == 0 || m.iter().any(|row| row.len() != k) {
        return Err(Error::Input("distribution matrix must be square and nonempty".into()));
    }
    for i in 0..k {
        for j in 0..k {
            if !m[i][j].is_finite() {
                return Err(Error::Input("distribution matrix has non-finite entries".into()));
            }
            if m[i][j] + m[j][i] < -FEAS_TOL {
                return Err(Error::Input(format!(
                    "M + Mᵀ is negative at ({i}, {j}): {}",
                    m[i][j] + m[j][i]
                )));
            }
        }
    }
    if m.iter().all(|row| row.iter().all(|&x| x == 0.0)) {
        return Ok(vec![1.0 / k as f64; k]);
    }
    let mut lp = LinearProgram::new(vec![0.0; k]).with_bounds(vec![(0.0, f64::INFINITY); k]);
    for row in m {
        lp.constrain(row.clone(), Relation::Ge, 0.0);
    }
    lp.constrain(vec![1.0; k], Relation::Eq, 1.0);
    let v = match solve_lp(&lp, Sense::Minimize)? {
        LpStatus::Optimal { point, .. } => point,
        other => {
            return Err(Error::InvariantViolation(format!(
                "no distribution with Mv >= 0 ({other:?})"
            )))
        }
    };
    let mut v: Vec<f64> = v.into_iter().map(|x| x.max(0.0)).collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    let worst = m
        .iter()
        .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    if worst < -FEAS_TOL {
        return Err(Error::InvariantViolation(format!("distribution violates Mv >= 0 by {}", -worst)));
    }
    Ok(v)
}

/// Everything computed for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundState {
    pub query: Vec<f64>,
    pub matrices: RoundMatrices,
    pub distribution: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct MulticlassLearner<S> {
    k: usize,
    subs: Vec<S>,
    rng: ChaCha8Rng,
    round: Option<RoundState>,
}

impl<S: TwoCenterLearner> MulticlassLearner<S> {
    /// Builds one sub-learner per pair `(i, j)`, `i < j`, with `make(i, j)`.
    /// In the sub-learner for `(i, j)`, `Side::First` stands for label `i`.
    pub fn new(k: usize, seed: u64, mut make: impl FnMut(usize, usize) -> Result<S>) -> Result<Self> {
        if k < 2 {
            return Err(Error::Input(format!("need at least two labels, got {k}")));
        }
        let subs = pairs(k)
            .into_iter()
            .map(|(i, j)| make(i, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k,
            subs,
            rng: rng_from(seed),
            round: None,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn subs(&self) -> &[S] {
        &self.subs
    }

    pub fn sub(&self, i: usize, j: usize) -> &S {
        &self.subs[pair_index(self.k, i, j)]
    }

    /// The round state cached by the last `predict`.
    pub fn last_round(&self) -> Option<&RoundState> {
        self.round.as_ref()
    }

    /// Total updates across sub-learners.
    pub fn updates(&self) -> usize {
        self.subs.iter().map(|s| s.updates()).sum()
    }

    pub fn build_matrices(&mut self, q: &[f64]) -> Result<RoundMatrices> {
        let k = self.k;
        let mut loss = vec![vec![0.0; k]; k];
        let mut drop = vec![vec![0.0; k]; k];
        for (i, j) in pairs(k) {
            let sub = &mut self.subs[pair_index(k, i, j)];
            let l = sub.loss_bound(q)?;
            loss[i][j] = l;
            loss[j][i] = l;
            drop[i][j] = sub.drop_bound(q, Side::First)?;
            drop[j][i] = sub.drop_bound(q, Side::Second)?;
        }
        let m = (0..k)
            .map(|i| (0..k).map(|j| drop[i][j] - 0.5 * loss[i][j]).collect())
            .collect();
        Ok(RoundMatrices { loss, drop, m })
    }

    /// Samples a label from a distribution satisfying `Mv ≥ 0`. Repeated
    /// calls with the same query return the cached label.
    pub fn predict(&mut self, q: &[f64]) -> Result<usize> {
        if let Some(r) = &self.round {
            if r.query == q {
                return Ok(r.label);
            }
        }
        let matrices = self.build_matrices(q)?;
        let v = choose_distribution(&matrices.m)?;
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut label = self.k - 1;
        for (i, &p) in v.iter().enumerate() {
            acc += p;
            if u < acc {
                label = i;
                break;
            }
        }
        while v[label] == 0.0 && label > 0 {
            label -= 1;
        }
        self.round = Some(RoundState {
            query: q.to_vec(),
            matrices,
            distribution: v,
            label,
        });
        Ok(label)
    }

    /// On a mistake, passes the truth to the pair (guessed, truth) only.
    pub fn observe(&mut self, q: &[f64], guessed: usize, truth: usize) -> Result<()> {
        if guessed >= self.k || truth >= self.k {
            return Err(Error::Input(format!("label out of range for k = {}", self.k)));
        }
        self.round = None;
        if guessed == truth {
            return Ok(());
        }
        let (a, _) = if guessed < truth { (guessed, truth) } else { (truth, guessed) };
        let sub = &mut self.subs[pair_index(self.k, guessed, truth)];
        let predicted = sub.predict(q)?;
        let side = if truth == a { Side::First } else { Side::Second };
        sub.observe(q, predicted, side)
    }

    /// Loss bound for guessing `label`: the largest pair bound in its row.
    pub fn loss_bound_for(&mut self, q: &[f64], label: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for j in 0..self.k {
            if j != label {
                worst = worst.max(self.subs[pair_index(self.k, label, j)].loss_bound(q)?);
            }
        }
        Ok(worst)
    }

    /// Largest pair loss bound at `q`.
    pub fn max_loss_bound(&mut self, q: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for sub in &mut self.subs {
            worst = worst.max(sub.loss_bound(q)?);
        }
        Ok(worst)
    }

    /// Scale index of the pair (guessed, truth) on a mistake, or of the only
    /// pair when `k = 2`.
    pub fn scale_index(&mut self, q: &[f64], guessed: usize, truth: usize) -> Result<Option<i32>> {
        if guessed != truth {
            return self.subs[pair_index(self.k, guessed, truth)].scale_index(q);
        }
        if self.k == 2 {
            return self.subs[0].scale_index(q);
        }
        Ok(None)
    }
}
