//! The `run`, `lowerbound` and `sweep` commands.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use nnpart::arena::{
    build_learner, read_replay, run_episode, Environment, LossLedger, LowerBoundEpisode, OnlineLearner,
    QuerySource, RandomGuesser,
};
use nnpart::numerics::mix_seed;

use crate::config::{AdversaryKind, CenterSpec, ExperimentConfig, LearnerKind, RawConfig};
use crate::output::{fmt_sig, ledger_csv, write_atomic};
use crate::{CliError, SEED_ENV};

/// Reads a config file and applies the seed override from the environment.
pub fn load_raw(path: &Path) -> Result<RawConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut raw = RawConfig::parse(&text)?;
    if let Ok(seed) = std::env::var(SEED_ENV) {
        seed.trim()
            .parse::<u64>()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}: cannot parse '{seed}'")))?;
        raw.set("seed", seed.trim());
    }
    Ok(raw)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let raw = load_raw(path)?;
    ExperimentConfig::from_raw(&raw, base_dir(path))
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

/// A finished experiment.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub ledger: LossLedger,
    /// Command-specific summary entries.
    pub extra: Vec<(String, String)>,
}

fn make_learner(cfg: &ExperimentConfig) -> Result<Box<dyn OnlineLearner>, CliError> {
    let seed = mix_seed(cfg.seed, 12);
    match cfg.learner {
        LearnerKind::Random => Ok(Box::new(RandomGuesser::new(cfg.labels, seed))),
        LearnerKind::Potential => build_learner(
            cfg.metric,
            cfg.labels,
            cfg.dimension,
            cfg.alpha,
            cfg.rounds,
            &cfg.settings(),
            seed,
        )
        .map_err(CliError::from_setup),
    }
}

/// Runs the experiment `cfg` describes, without writing anything.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut learner = make_learner(cfg)?;
    if cfg.adversary == AdversaryKind::LowerBound {
        let episode = LowerBoundEpisode::generate(cfg.dimension, cfg.rounds + 2, cfg.seed)?;
        let ledger = episode.play(learner.as_mut())?;
        let extra = vec![
            ("eps".to_string(), fmt_sig(episode.eps)),
            ("loss_floor".to_string(), fmt_sig(episode.loss_floor())),
            ("min_pairwise_distance".to_string(), fmt_sig(episode.min_pairwise_distance())),
            ("certified_steps".to_string(), episode.certified_steps.to_string()),
        ];
        return Ok(Outcome { ledger, extra });
    }
    let env = match &cfg.centers {
        CenterSpec::Random => Environment::random(
            cfg.metric,
            cfg.labels,
            cfg.dimension,
            cfg.alpha,
            cfg.delta.unwrap_or(0.0),
            mix_seed(cfg.seed, 11),
        )
        .map_err(CliError::from_setup)?,
        CenterSpec::Explicit(cs) => {
            let env = Environment::new(cfg.metric, cs.clone(), cfg.alpha).map_err(CliError::from_setup)?;
            if let Some(delta) = cfg.delta {
                if env.min_separation() < delta {
                    return Err(CliError::Config(format!(
                        "centers are {} apart, delta requires {delta}",
                        env.min_separation()
                    )));
                }
            }
            env
        }
    };
    let source = match cfg.adversary {
        AdversaryKind::UniformBall => QuerySource::UniformBall,
        AdversaryKind::Margin => QuerySource::Margin { gamma: cfg.gamma },
        AdversaryKind::AdaptiveWidth => QuerySource::AdaptiveWidth {
            candidates: cfg.candidates,
        },
        AdversaryKind::Replay => {
            let path = cfg.replay.as_ref().expect("validated replay path");
            QuerySource::Replay(read_replay(path, cfg.dimension).map_err(CliError::from_setup)?)
        }
        AdversaryKind::LowerBound => unreachable!("handled above"),
    };
    let ledger = run_episode(learner.as_mut(), &env, &source, cfg.rounds, cfg.seed, cfg.report_gamma)?;
    let excess = ledger
        .records
        .iter()
        .filter(|r| r.mistake)
        .map(|r| r.loss - r.loss_bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let violations = ledger.bound_violations(cfg.solver.lp_tolerance).len();
    let extra = vec![
        ("bound_violations".to_string(), violations.to_string()),
        ("max_bound_excess".to_string(), if excess.is_finite() { fmt_sig(excess) } else { "none".into() }),
    ];
    Ok(Outcome { ledger, extra })
}

/// The summary file: results, then the effective config under `config.`.
pub fn summary_text(cfg: &ExperimentConfig, outcome: &Outcome, wall_time: f64) -> String {
    let l = &outcome.ledger;
    let mut out = String::new();
    let _ = writeln!(out, "total_loss={}", fmt_sig(l.total_loss));
    let _ = writeln!(out, "mistakes={}", l.mistakes);
    let _ = writeln!(out, "robust_mistakes={}", l.robust_mistakes);
    let _ = writeln!(out, "rounds={}", l.rounds());
    let _ = writeln!(out, "wall_time={wall_time:.6}");
    let _ = writeln!(out, "seed={}", cfg.seed);
    for (k, v) in &outcome.extra {
        let _ = writeln!(out, "{k}={v}");
    }
    out.push_str(&cfg.echo("config."));
    out
}

/// `run`: executes, writes the ledger and summary, and fails with an
/// invariant violation if a mistake exceeded its loss bound.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let outcome = execute(cfg)?;
    let wall = start.elapsed().as_secs_f64();
    write_atomic(&cfg.ledger_path, &ledger_csv(&outcome.ledger))?;
    write_atomic(&cfg.summary_path, &summary_text(cfg, &outcome, wall))?;
    if cfg.adversary != AdversaryKind::LowerBound {
        if let Some(r) = outcome.ledger.bound_violations(cfg.solver.lp_tolerance).first() {
            return Err(CliError::Runtime(nnpart::Error::InvariantViolation(format!(
                "round {}: loss {} exceeds bound {}",
                r.round, r.loss, r.loss_bound
            ))));
        }
    }
    Ok(outcome)
}

/// `lowerbound`: `run` with the lower-bound adversary forced.
pub fn cmd_lowerbound(path: &Path) -> Result<Outcome, CliError> {
    let mut raw = load_raw(path)?;
    raw.set("adversary", "lowerbound");
    if raw.get("dimension").is_none() {
        raw.set("dimension", "6");
    }
    if raw.get("rounds").is_none() {
        raw.set("rounds", "254");
    }
    if raw.get("learner").is_none() {
        raw.set("learner", "random");
    }
    let cfg = ExperimentConfig::from_raw(&raw, base_dir(path))?;
    cmd_run(&cfg)
}

/// Summary columns of a sweep row, after the config columns.
pub const SWEEP_RESULT_KEYS: &[&str] = &["total_loss", "mistakes", "robust_mistakes", "status"];

/// Grid cells in order, last axis varying fastest. No axes, or an axis with
/// no values, gives no cells.
pub fn grid_cells(grid: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    if grid.is_empty() || grid.iter().any(|(_, vs)| vs.is_empty()) {
        return Vec::new();
    }
    let mut cells = vec![Vec::new()];
    for (axis, values) in grid {
        cells = cells
            .into_iter()
            .flat_map(|cell: Vec<(String, String)>| {
                values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push((axis.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    cells
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn sweep_row(raw: &RawConfig, base: &Path, cell: &[(String, String)]) -> String {
    let mut raw = raw.clone();
    raw.grid.clear();
    for (k, v) in cell {
        raw.set(k, v);
    }
    let cfg = match ExperimentConfig::from_raw(&raw, base) {
        Ok(cfg) => cfg,
        Err(e) => {
            // Echo the raw cell values so the row still identifies its cell.
            let mut fields: Vec<String> = crate::config::KEYS
                .iter()
                .filter(|k| !k.starts_with("output."))
                .map(|k| raw.get(k).unwrap_or("").to_string())
                .collect();
            fields.extend(["".into(), "".into(), "".into(), e.to_string()]);
            return fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",");
        }
    };
    let mut fields: Vec<String> = cfg.experiment_pairs().into_iter().map(|(_, v)| v).collect();
    match execute(&cfg) {
        Ok(o) => fields.extend([
            fmt_sig(o.ledger.total_loss),
            o.ledger.mistakes.to_string(),
            o.ledger.robust_mistakes.to_string(),
            "ok".into(),
        ]),
        Err(e) => fields.extend(["".into(), "".into(), "".into(), e.to_string()]),
    }
    fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",")
}

/// `sweep`: one summary row per grid cell, in grid order. Returns the
/// number of cells and of successful cells.
pub fn cmd_sweep(path: &Path) -> Result<(usize, usize), CliError> {
    let raw = load_raw(path)?;
    let base_cfg = ExperimentConfig::from_raw(&RawConfig { grid: Vec::new(), ..raw.clone() }, base_dir(path))?;
    let cells = grid_cells(&raw.grid);
    let mut header: Vec<String> = crate::config::KEYS
        .iter()
        .filter(|k| !k.starts_with("output."))
        .map(|k| k.to_string())
        .collect();
    header.extend(SWEEP_RESULT_KEYS.iter().map(|k| k.to_string()));
    let rows: Vec<Mutex<Option<String>>> = cells.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let row = sweep_row(&raw, base_dir(path), &cells[i]);
                *rows[i].lock().expect("row lock") = Some(row);
            });
        }
    });
    let mut out = header.join(",");
    out.push('\n');
    let mut ok = 0;
    for row in rows {
        let row = row.into_inner().expect("row lock").expect("every cell ran");
        if row.ends_with(",ok") {
            ok += 1;
        }
        out.push_str(&row);
        out.push('\n');
    }
    write_atomic(&base_cfg.sweep_path, &out)?;
    Ok((cells.len(), ok))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(axes: &[(&str, &[&str])]) -> Vec<(String, Vec<String>)> {
        axes.iter()
            .map(|(k, vs)| (k.to_string(), vs.iter().map(|v| v.to_string()).collect()))
            .collect()
    }

    #[test]
    fn grid_order_and_size() {
        let cells = grid_cells(&grid(&[("rounds", &["10", "20"]), ("seed", &["1", "2", "3"])]));
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0], vec![("rounds".into(), "10".into()), ("seed".into(), "1".into())]);
        assert_eq!(cells[1][1].1, "2");
        assert_eq!(cells[3][0].1, "20");
        assert!(grid_cells(&[]).is_empty());
        assert!(grid_cells(&grid(&[("seed", &[])])).is_empty());
    }

    #[test]
    fn zero_rounds_run() {
        let raw = RawConfig::parse("rounds = 0\nlabels = 3\ndimension = 2").unwrap();
        let cfg = ExperimentConfig::from_raw(&raw, Path::new(".")).unwrap();
        let o = execute(&cfg).unwrap();
        assert_eq!(o.ledger.rounds(), 0);
        assert_eq!(o.ledger.total_loss, 0.0);
    }
}
