//! Learner construction for each metric and the episode loop.

use crate::error::{Error, Result};
use crate::kernels::EvenPKernel;
use crate::knowledge::ScaleSchedule;
use crate::multiclass::MulticlassLearner;
use crate::multiscale::{
    cap_for_budget, MultiscaleConfig, MultiscaleLearner, DEFAULT_C_SCALE, DEFAULT_MEMORY_BUDGET,
    DEFAULT_SELECTION_CONSTANT, DEFAULT_SLACK_CONSTANT,
};
use crate::numerics::mix_seed;
use crate::numerics::sampling::{rng_from, SamplerConfig};
use crate::pairwise::{LiftedPairwise, PairwiseLearner, QueryLift, Side, TwoCenterLearner};

use super::env::{Environment, Metric};
use super::ledger::{LossLedger, RoundRecord};
use super::queries::{margin_stream, uniform_stream, QuerySource};

/// A k-label online learner as seen by the episode loop. Labels are `0..k`.
pub trait OnlineLearner {
    fn labels(&self) -> usize;
    fn predict(&mut self, q: &[f64]) -> Result<usize>;
    fn observe(&mut self, q: &[f64], guessed: usize, truth: usize) -> Result<()>;
    /// Upper bound on the loss of guessing `label` at `q`.
    fn loss_bound_for(&mut self, q: &[f64], label: usize) -> Result<f64>;
    /// Upper bound on the loss of any guess at `q`.
    fn max_loss_bound(&mut self, q: &[f64]) -> Result<f64>;
    fn scale_index(&mut self, q: &[f64], guessed: usize, truth: usize) -> Result<Option<i32>>;
}

impl<S: TwoCenterLearner> OnlineLearner for MulticlassLearner<S> {
    fn labels(&self) -> usize {
        self.k()
    }

    fn predict(&mut self, q: &[f64]) -> Result<usize> {
        MulticlassLearner::predict(self, q)
    }

    fn observe(&mut self, q: &[f64], guessed: usize, truth: usize) -> Result<()> {
        MulticlassLearner::observe(self, q, guessed, truth)
    }

    fn loss_bound_for(&mut self, q: &[f64], label: usize) -> Result<f64> {
        MulticlassLearner::loss_bound_for(self, q, label)
    }

    fn max_loss_bound(&mut self, q: &[f64]) -> Result<f64> {
        MulticlassLearner::max_loss_bound(self, q)
    }

    fn scale_index(&mut self, q: &[f64], guessed: usize, truth: usize) -> Result<Option<i32>> {
        MulticlassLearner::scale_index(self, q, guessed, truth)
    }
}

/// Two labels driven directly by a two-center learner (label 0 is
/// `Side::First`). Every round is passed to the learner, correct or not.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPoint<S>(pub S);

fn side_of(label: usize) -> Result<Side> {
    match label {
        0 => Ok(Side::First),
        1 => Ok(Side::Second),
        l => Err(Error::Input(format!("label {l} out of range for two labels"))),
    }
}

impl<S: TwoCenterLearner> OnlineLearner for TwoPoint<S> {
    fn labels(&self) -> usize {
        2
    }

    fn predict(&mut self, q: &[f64]) -> Result<usize> {
        Ok(match self.0.predict(q)? {
            Side::First => 0,
            Side::Second => 1,
        })
    }

    fn observe(&mut self, q: &[f64], guessed: usize, truth: usize) -> Result<()> {
        self.0.observe(q, side_of(guessed)?, side_of(truth)?)
    }

    fn loss_bound_for(&mut self, q: &[f64], label: usize) -> Result<f64> {
        side_of(label)?;
        self.0.loss_bound(q)
    }

    fn max_loss_bound(&mut self, q: &[f64]) -> Result<f64> {
        self.0.loss_bound(q)
    }

    fn scale_index(&mut self, q: &[f64], _guessed: usize, _truth: usize) -> Result<Option<i32>> {
        self.0.scale_index(q)
    }
}

/// Tuning shared by every learner the harness builds.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSettings {
    pub sampler: SamplerConfig,
    /// Overrides of the contextual-search index range.
    pub i_min: Option<i32>,
    pub i_max: Option<i32>,
    pub c_scale: f64,
    pub selection_constant: f64,
    pub slack_constant: f64,
    /// Highest multiscale index; derived from `memory_budget` when unset.
    pub i_cap: Option<u32>,
    pub memory_budget: usize,
    /// Separation `Δ` between centers, needed by the multiscale learner.
    pub separation: Option<f64>,
}

impl Default for LearnerSettings {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            i_min: None,
            i_max: None,
            c_scale: DEFAULT_C_SCALE,
            selection_constant: DEFAULT_SELECTION_CONSTANT,
            slack_constant: DEFAULT_SLACK_CONSTANT,
            i_cap: None,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            separation: None,
        }
    }
}

impl LearnerSettings {
    fn schedule(&self, d: usize, alpha: f64, rounds: usize) -> Result<ScaleSchedule> {
        let base = ScaleSchedule::for_horizon(d, alpha, rounds)?;
        ScaleSchedule::new(
            d,
            alpha,
            self.i_min.unwrap_or(base.i_min),
            self.i_max.unwrap_or(base.i_max),
        )
    }

    pub fn multiscale_config(&self, p: f64, d: usize, alpha: f64, seed: u64) -> Result<MultiscaleConfig> {
        let i_cap = match self.i_cap {
            Some(c) => c,
            None => cap_for_budget(p, d, self.c_scale, self.memory_budget)?,
        };
        Ok(MultiscaleConfig {
            p,
            d,
            alpha,
            c_scale: self.c_scale,
            selection_constant: self.selection_constant,
            slack_constant: self.slack_constant,
            i_cap,
            separation: self.separation,
            sampler: self.sampler,
            seed,
        })
    }
}

/// Even integer exponent, if `p` is one.
pub fn even_exponent(p: f64) -> Option<u32> {
    (p >= 2.0 && p == p.round() && (p as u64) % 2 == 0 && p <= 64.0).then_some(p as u32)
}

/// The pair learner for `metric` in dimension `d`.
pub fn build_pair_learner(
    metric: Metric,
    d: usize,
    alpha: f64,
    rounds: usize,
    settings: &LearnerSettings,
    seed: u64,
) -> Result<Box<dyn TwoCenterLearner>> {
    Ok(match metric {
        Metric::InnerProduct => Box::new(PairwiseLearner::new(
            settings.schedule(d, alpha, rounds)?,
            settings.sampler,
            seed,
        )?),
        Metric::L2 => Box::new(LiftedPairwise::new(
            QueryLift::Euclidean { d },
            settings.schedule(d + 1, 1.0, rounds)?,
            settings.sampler,
            alpha,
            seed,
        )?),
        Metric::Lp(p) => match even_exponent(p) {
            Some(e) => {
                let lift = QueryLift::EvenP(EvenPKernel::new(e, d)?);
                Box::new(LiftedPairwise::new(
                    lift,
                    settings.schedule(lift.lifted_dim(), 1.0, rounds)?,
                    settings.sampler,
                    alpha,
                    seed,
                )?)
            }
            None if p > 2.0 => {
                if settings.separation.is_none() {
                    return Err(Error::Config(
                        "metric lp with p not an even integer needs a separation (delta)".into(),
                    ));
                }
                Box::new(MultiscaleLearner::new(settings.multiscale_config(p, d, alpha, seed)?)?)
            }
            None => {
                return Err(Error::Config(format!(
                    "lp metric supports even p or p > 2, got {p}"
                )))
            }
        },
    })
}

/// A learner for `k` labels: the two-center learner itself when `k = 2`,
/// else the pairwise reduction.
pub fn build_learner(
    metric: Metric,
    k: usize,
    d: usize,
    alpha: f64,
    rounds: usize,
    settings: &LearnerSettings,
    seed: u64,
) -> Result<Box<dyn OnlineLearner>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least two labels, got {k}")));
    }
    if k == 2 {
        let sub = build_pair_learner(metric, d, alpha, rounds, settings, mix_seed(seed, 0))?;
        return Ok(Box::new(TwoPoint(sub)));
    }
    let learner = MulticlassLearner::new(k, mix_seed(seed, u64::MAX), |i, j| {
        build_pair_learner(metric, d, alpha, rounds, settings, mix_seed(seed, (i * k + j) as u64))
    })?;
    Ok(Box::new(learner))
}

fn at_round(e: Error, round: usize) -> Error {
    match e {
        Error::InconsistentFeedback(m) => Error::InconsistentFeedback(format!("round {round}: {m}")),
        Error::InvariantViolation(m) => Error::InvariantViolation(format!("round {round}: {m}")),
        Error::SolverFailure(m) => Error::SolverFailure(format!("round {round}: {m}")),
        other => other,
    }
}

/// Runs `rounds` rounds of the protocol: query, guess, exact loss, truth.
/// `gamma` sets the margin at which mistakes are flagged robust.
pub fn run_episode(
    learner: &mut dyn OnlineLearner,
    env: &Environment,
    source: &QuerySource,
    rounds: usize,
    seed: u64,
    gamma: f64,
) -> Result<LossLedger> {
    if learner.labels() != env.k() {
        return Err(Error::Config(format!(
            "learner has {} labels, environment {}",
            learner.labels(),
            env.k()
        )));
    }
    let stream = match source {
        QuerySource::UniformBall => Some(uniform_stream(env, rounds, mix_seed(seed, 1))),
        QuerySource::Margin { gamma } => Some(margin_stream(env, *gamma, rounds, mix_seed(seed, 1))?),
        QuerySource::Replay(qs) => {
            if qs.len() < rounds {
                return Err(Error::Input(format!(
                    "replay holds {} queries, {rounds} rounds requested",
                    qs.len()
                )));
            }
            Some(qs[..rounds].to_vec())
        }
        QuerySource::AdaptiveWidth { candidates } => {
            if *candidates == 0 {
                return Err(Error::Config("adaptive source needs at least one candidate".into()));
            }
            None
        }
    };
    let mut ledger = LossLedger::new();
    for t in 0..rounds {
        let q = match (&stream, source) {
            (Some(qs), _) => qs[t].clone(),
            (None, QuerySource::AdaptiveWidth { candidates }) => {
                let mut rng = rng_from(mix_seed(seed, 2 + t as u64));
                let mut best: Option<(f64, Vec<f64>)> = None;
                for _ in 0..*candidates {
                    let q = env.uniform_query(&mut rng);
                    let b = learner.max_loss_bound(&q).map_err(|e| at_round(e, t + 1))?;
                    if best.as_ref().is_none_or(|(bb, _)| b > *bb) {
                        best = Some((b, q));
                    }
                }
                best.expect("at least one candidate").1
            }
            (None, _) => unreachable!("only the adaptive source is generated online"),
        };
        let round = t + 1;
        let step = |learner: &mut dyn OnlineLearner| -> Result<RoundRecord> {
            let guess = learner.predict(&q)?;
            let truth = env.truth_for(&q, guess);
            let loss = env.exact_loss(&q, guess)?;
            let loss_bound = learner.loss_bound_for(&q, guess)?;
            let scale_index = learner.scale_index(&q, guess, truth)?;
            learner.observe(&q, guess, truth)?;
            let mistake = guess != truth;
            Ok(RoundRecord {
                round,
                robust_mistake: mistake && env.margin(&q) >= gamma,
                query: q.clone(),
                guess,
                truth,
                loss,
                loss_bound,
                mistake,
                scale_index,
                cum_loss: 0.0,
            })
        };
        let record = step(learner).map_err(|e| at_round(e, round))?;
        ledger.push(record)?;
    }
    Ok(ledger)
}
