//! Flat `key = value` experiment configuration.
//!
//! One entry per line, `#` starts a comment, keys are dotted
//! (`solver.mc_samples = 4096`). Unknown keys are rejected. Optional settings
//! accept `auto` (or `none`) to mean "derive a default", which is also how
//! they are echoed, so an echoed config parses back to the same experiment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nnpart::arena::{LearnerSettings, Metric};
use nnpart::arena::DEFAULT_CANDIDATES;
use nnpart::numerics::sampling::SamplerConfig;

use crate::CliError;

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "dimension",
    "labels",
    "metric",
    "p",
    "alpha",
    "delta",
    "rounds",
    "seed",
    "learner",
    "adversary",
    "adversary.gamma",
    "adversary.candidates",
    "adversary.replay",
    "centers",
    "centers.list",
    "report.gamma",
    "solver.lp_tolerance",
    "solver.mc_samples",
    "solver.burn_in",
    "solver.i_min",
    "solver.i_max",
    "solver.c_scale",
    "solver.selection_constant",
    "solver.i_cap",
    "solver.memory_budget",
    "output.ledger",
    "output.summary",
    "output.sweep",
];

/// Raw entries in file order. `grid.*` keys are kept separately.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub entries: Vec<(String, String)>,
    pub grid: Vec<(String, Vec<String>)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(i) => &line[..i],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected key = value", n + 1)));
            };
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if let Some(axis) = key.strip_prefix("grid.") {
                if !KEYS.contains(&axis) || axis.starts_with("output.") {
                    return Err(CliError::Config(format!("line {}: cannot sweep over '{axis}'", n + 1)));
                }
                if raw.grid.iter().any(|(k, _)| k == axis) {
                    return Err(CliError::Config(format!("line {}: duplicate grid axis '{axis}'", n + 1)));
                }
                let values = value
                    .split(',')
                    .map(|v| v.trim().to_string())
                    .filter(|v| !v.is_empty())
                    .collect();
                raw.grid.push((axis.to_string(), values));
                continue;
            }
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!("line {}: unknown key '{key}'", n + 1)));
            }
            if raw.entries.iter().any(|(k, _)| *k == key) {
                return Err(CliError::Config(format!("line {}: duplicate key '{key}'", n + 1)));
            }
            raw.entries.push((key, value));
        }
        Ok(raw)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Sets `key`, replacing an earlier value.
    pub fn set(&mut self, key: &str, value: &str) {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value.to_string(),
            None => self.entries.push((key.to_string(), value.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    /// The potential-based learner for the configured metric.
    Potential,
    /// Uniformly random guesses; a baseline.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryKind {
    UniformBall,
    Margin,
    AdaptiveWidth,
    LowerBound,
    Replay,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CenterSpec {
    /// Uniform in the unit ball, pairwise at least `delta` apart.
    Random,
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Tolerance of the post-hoc checks on LP-derived quantities (loss bound
    /// domination in `run`, distribution feasibility in `verify lp`).
    pub lp_tolerance: f64,
    pub mc_samples: usize,
    pub burn_in: usize,
    pub i_min: Option<i32>,
    pub i_max: Option<i32>,
    pub c_scale: f64,
    pub selection_constant: f64,
    pub i_cap: Option<u32>,
    pub memory_budget: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub labels: usize,
    pub metric: Metric,
    pub alpha: f64,
    pub delta: Option<f64>,
    pub rounds: usize,
    pub seed: u64,
    pub learner: LearnerKind,
    pub adversary: AdversaryKind,
    pub gamma: f64,
    pub candidates: usize,
    pub replay: Option<PathBuf>,
    pub centers: CenterSpec,
    pub report_gamma: f64,
    pub solver: SolverParams,
    pub ledger_path: PathBuf,
    pub summary_path: PathBuf,
    pub sweep_path: PathBuf,
    pub grid: Vec<(String, Vec<String>)>,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse '{value}'")))
}

fn is_auto(value: &str) -> bool {
    matches!(value, "auto" | "none" | "")
}

fn optional<T: std::str::FromStr>(raw: &RawConfig, key: &str) -> Result<Option<T>, CliError> {
    match raw.get(key) {
        None => Ok(None),
        Some(v) if is_auto(v) => Ok(None),
        Some(v) => parse_num(key, v).map(Some),
    }
}

fn or_default<T: std::str::FromStr>(raw: &RawConfig, key: &str, default: T) -> Result<T, CliError> {
    Ok(optional(raw, key)?.unwrap_or(default))
}

fn parse_centers(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    text.split(';')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|c| {
            c.split(',')
                .map(|x| parse_num::<f64>("centers.list", x.trim()))
                .collect()
        })
        .collect()
}

fn resolve(base: &Path, path: &str) -> PathBuf {
    let p = PathBuf::from(path);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or("auto".to_string(), T::to_string)
}

impl ExperimentConfig {
    /// Validates `raw`; relative paths resolve against `base`.
    pub fn from_raw(raw: &RawConfig, base: &Path) -> Result<Self, CliError> {
        let dimension: usize = or_default(raw, "dimension", 2)?;
        let labels: usize = or_default(raw, "labels", 2)?;
        if dimension == 0 {
            return Err(CliError::Config("dimension must be positive".into()));
        }
        if labels < 2 {
            return Err(CliError::Config(format!("labels must be at least 2, got {labels}")));
        }
        let metric_name = raw.get("metric").unwrap_or("inner_product");
        let mut metric: Metric = metric_name.parse().map_err(CliError::from_setup)?;
        let p: Option<f64> = optional(raw, "p")?;
        match (metric, p) {
            (Metric::Lp(_), None) => {
                return Err(CliError::Config("metric = lp needs p".into()));
            }
            (Metric::Lp(_), Some(p)) => metric = metric.with_p(p).map_err(CliError::from_setup)?,
            (_, Some(_)) => {
                return Err(CliError::Config(format!("p is only meaningful with metric = lp, not {metric}")));
            }
            _ => {}
        }
        let alpha: f64 = or_default(raw, "alpha", 1.0)?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(CliError::Config(format!("alpha must be positive, got {alpha}")));
        }
        let delta: Option<f64> = optional(raw, "delta")?;
        if let Some(d) = delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(CliError::Config(format!("delta must be positive, got {d}")));
            }
        }
        if let Metric::Lp(p) = metric {
            let even = nnpart::arena::even_exponent(p).is_some();
            if !even && delta.is_none() {
                return Err(CliError::Config(format!(
                    "metric lp with p = {p} (not an even integer) needs delta > 0"
                )));
            }
        }
        let learner = match raw.get("learner").unwrap_or("potential") {
            "potential" => LearnerKind::Potential,
            "random" => LearnerKind::Random,
            other => return Err(CliError::Config(format!("unknown learner '{other}'"))),
        };
        let adversary = match raw.get("adversary").unwrap_or("uniform_ball") {
            "uniform_ball" => AdversaryKind::UniformBall,
            "margin" => AdversaryKind::Margin,
            "adaptive_width" => AdversaryKind::AdaptiveWidth,
            "lowerbound" => AdversaryKind::LowerBound,
            "replay" => AdversaryKind::Replay,
            other => return Err(CliError::Config(format!("unknown adversary '{other}'"))),
        };
        let gamma: f64 = or_default(raw, "adversary.gamma", 0.0)?;
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(CliError::Config(format!("adversary.gamma must be nonnegative, got {gamma}")));
        }
        if adversary == AdversaryKind::Margin && raw.get("adversary.gamma").is_none() {
            return Err(CliError::Config("adversary = margin needs adversary.gamma".into()));
        }
        let candidates: usize = or_default(raw, "adversary.candidates", DEFAULT_CANDIDATES)?;
        if candidates == 0 {
            return Err(CliError::Config("adversary.candidates must be positive".into()));
        }
        let replay = raw
            .get("adversary.replay")
            .filter(|v| !is_auto(v))
            .map(|v| resolve(base, v));
        if adversary == AdversaryKind::Replay && replay.is_none() {
            return Err(CliError::Config("adversary = replay needs adversary.replay".into()));
        }
        if adversary == AdversaryKind::LowerBound {
            if labels != 2 {
                return Err(CliError::Config("the lowerbound adversary has two labels".into()));
            }
            if dimension < 5 {
                return Err(CliError::Config(format!(
                    "the lowerbound adversary needs dimension >= 5, got {dimension}"
                )));
            }
        }
        let centers = match raw.get("centers").unwrap_or("random") {
            "random" => {
                if raw.get("centers.list").is_some_and(|v| !is_auto(v)) {
                    return Err(CliError::Config("centers.list given but centers = random".into()));
                }
                CenterSpec::Random
            }
            "explicit" => {
                let list = raw
                    .get("centers.list")
                    .ok_or_else(|| CliError::Config("centers = explicit needs centers.list".into()))?;
                let centers = parse_centers(list)?;
                if centers.len() != labels {
                    return Err(CliError::Config(format!(
                        "centers.list has {} centers, labels = {labels}",
                        centers.len()
                    )));
                }
                if let Some(c) = centers.iter().find(|c| c.len() != dimension) {
                    return Err(CliError::Config(format!(
                        "center of dimension {}, expected {dimension}",
                        c.len()
                    )));
                }
                CenterSpec::Explicit(centers)
            }
            other => return Err(CliError::Config(format!("unknown centers spec '{other}'"))),
        };
        let report_gamma: f64 = or_default(raw, "report.gamma", gamma)?;
        if !(report_gamma >= 0.0 && report_gamma.is_finite()) {
            return Err(CliError::Config("report.gamma must be nonnegative".into()));
        }
        let defaults = LearnerSettings::default();
        let solver = SolverParams {
            lp_tolerance: or_default(raw, "solver.lp_tolerance", 1e-9)?,
            mc_samples: or_default(raw, "solver.mc_samples", defaults.sampler.samples)?,
            burn_in: or_default(raw, "solver.burn_in", defaults.sampler.burn_in)?,
            i_min: optional(raw, "solver.i_min")?,
            i_max: optional(raw, "solver.i_max")?,
            c_scale: or_default(raw, "solver.c_scale", defaults.c_scale)?,
            selection_constant: or_default(raw, "solver.selection_constant", defaults.selection_constant)?,
            i_cap: optional(raw, "solver.i_cap")?,
            memory_budget: or_default(raw, "solver.memory_budget", defaults.memory_budget)?,
        };
        if !(solver.lp_tolerance >= 0.0 && solver.lp_tolerance.is_finite()) {
            return Err(CliError::Config("solver.lp_tolerance must be nonnegative".into()));
        }
        if solver.mc_samples == 0 {
            return Err(CliError::Config("solver.mc_samples must be positive".into()));
        }
        if let (Some(lo), Some(hi)) = (solver.i_min, solver.i_max) {
            if lo > hi {
                return Err(CliError::Config(format!("solver.i_min {lo} exceeds solver.i_max {hi}")));
            }
        }
        let path = |key: &str, default: &str| resolve(base, raw.get(key).unwrap_or(default));
        Ok(Self {
            dimension,
            labels,
            metric,
            alpha,
            delta,
            rounds: or_default(raw, "rounds", 1000)?,
            seed: or_default(raw, "seed", 0)?,
            learner,
            adversary,
            gamma,
            candidates,
            replay,
            centers,
            report_gamma,
            solver,
            ledger_path: path("output.ledger", "ledger.csv"),
            summary_path: path("output.summary", "summary.txt"),
            sweep_path: path("output.sweep", "sweep.csv"),
            grid: raw.grid.clone(),
        })
    }

    pub fn settings(&self) -> LearnerSettings {
        LearnerSettings {
            sampler: SamplerConfig::new(self.solver.mc_samples, self.solver.burn_in),
            i_min: self.solver.i_min,
            i_max: self.solver.i_max,
            c_scale: self.solver.c_scale,
            selection_constant: self.solver.selection_constant,
            i_cap: self.solver.i_cap,
            memory_budget: self.solver.memory_budget,
            separation: self.delta,
            ..LearnerSettings::default()
        }
    }

    /// The effective configuration as `(key, value)` pairs in [`KEYS`]
    /// order, output paths excluded.
    pub fn experiment_pairs(&self) -> Vec<(String, String)> {
        let (metric, p) = match self.metric {
            Metric::InnerProduct => ("inner_product", None),
            Metric::L2 => ("l2", None),
            Metric::Lp(p) => ("lp", Some(p)),
        };
        let (centers, list) = match &self.centers {
            CenterSpec::Random => ("random", "auto".to_string()),
            CenterSpec::Explicit(cs) => (
                "explicit",
                cs.iter()
                    .map(|c| c.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
                    .collect::<Vec<_>>()
                    .join(";"),
            ),
        };
        let learner = match self.learner {
            LearnerKind::Potential => "potential",
            LearnerKind::Random => "random",
        };
        let adversary = match self.adversary {
            AdversaryKind::UniformBall => "uniform_ball",
            AdversaryKind::Margin => "margin",
            AdversaryKind::AdaptiveWidth => "adaptive_width",
            AdversaryKind::LowerBound => "lowerbound",
            AdversaryKind::Replay => "replay",
        };
        let s = &self.solver;
        let values: Vec<String> = vec![
            self.dimension.to_string(),
            self.labels.to_string(),
            metric.to_string(),
            fmt_opt(&p),
            self.alpha.to_string(),
            fmt_opt(&self.delta),
            self.rounds.to_string(),
            self.seed.to_string(),
            learner.to_string(),
            adversary.to_string(),
            self.gamma.to_string(),
            self.candidates.to_string(),
            fmt_opt(&self.replay.as_ref().map(|p| p.display().to_string())),
            centers.to_string(),
            list,
            self.report_gamma.to_string(),
            s.lp_tolerance.to_string(),
            s.mc_samples.to_string(),
            s.burn_in.to_string(),
            fmt_opt(&s.i_min),
            fmt_opt(&s.i_max),
            s.c_scale.to_string(),
            s.selection_constant.to_string(),
            fmt_opt(&s.i_cap),
            s.memory_budget.to_string(),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    /// All effective settings, output paths included, one `key=value` per
    /// line with `prefix` prepended to each key.
    pub fn echo(&self, prefix: &str) -> String {
        let mut out = String::new();
        let mut pairs = self.experiment_pairs();
        pairs.push(("output.ledger".into(), self.ledger_path.display().to_string()));
        pairs.push(("output.summary".into(), self.summary_path.display().to_string()));
        pairs.push(("output.sweep".into(), self.sweep_path.display().to_string()));
        for (k, v) in pairs {
            let _ = writeln!(out, "{prefix}{k}={v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::from_raw(&RawConfig::parse(text)?, Path::new("/tmp"))
    }

    #[test]
    fn defaults_and_comments() {
        let c = cfg("# nothing but a comment\n\nrounds = 10 # trailing\n").unwrap();
        assert_eq!(c.rounds, 10);
        assert_eq!(c.dimension, 2);
        assert_eq!(c.metric, Metric::InnerProduct);
        assert_eq!(c.adversary, AdversaryKind::UniformBall);
        assert_eq!(c.ledger_path, PathBuf::from("/tmp/ledger.csv"));
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "bogus = 1",
            "rounds = -3",
            "labels = 1",
            "metric = lp",
            "metric = lp\np = 3",
            "p = 4",
            "adversary = margin",
            "adversary = replay",
            "centers = explicit\ncenters.list = 0,0",
            "dimension = 3\nadversary = lowerbound",
            "seed = 1\nseed = 2",
            "grid.output.ledger = a,b",
            "no equals sign",
        ] {
            assert!(matches!(cfg(bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn explicit_centers_and_lp() {
        let c = cfg("metric = lp\np = 2.5\ndelta = 0.5\nlabels = 2\ndimension = 1\ncenters = explicit\ncenters.list = 0.5; -0.5").unwrap();
        assert_eq!(c.metric, Metric::Lp(2.5));
        assert_eq!(c.centers, CenterSpec::Explicit(vec![vec![0.5], vec![-0.5]]));
        assert_eq!(c.settings().separation, Some(0.5));
    }

    #[test]
    fn echo_round_trips() {
        let c = cfg("metric = lp\np = 4\nrounds = 7\nsolver.i_min = -1\ngrid.seed = 1,2").unwrap();
        let text = c.echo("");
        let back = ExperimentConfig::from_raw(&RawConfig::parse(&text).unwrap(), Path::new("/")).unwrap();
        assert_eq!(back.experiment_pairs(), c.experiment_pairs());
        assert_eq!(c.grid, vec![("seed".to_string(), vec!["1".to_string(), "2".to_string()])]);
    }
}
