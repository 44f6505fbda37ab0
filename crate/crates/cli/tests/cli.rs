use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nnpart_cli::output::LEDGER_HEADER;

fn workdir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn nnpart(dir: &Path, args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nnpart"));
    cmd.args(args).current_dir(dir).env_remove("NNPART_SEED");
    if let Some(s) = seed_env {
        cmd.env("NNPART_SEED", s);
    }
    cmd.output().unwrap()
}

fn summary_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in summary"))
        .to_string()
}

#[test]
fn zero_rounds_writes_header_only() {
    let dir = workdir("zero");
    fs::write(dir.join("c.cfg"), "rounds = 0\n").unwrap();
    let out = nnpart(&dir, &["run", "c.cfg"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(dir.join("ledger.csv")).unwrap(), format!("{LEDGER_HEADER}\n"));
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert_eq!(summary_value(&summary, "total_loss"), "0");
    assert_eq!(summary_value(&summary, "rounds"), "0");
    assert_eq!(summary_value(&summary, "config.rounds"), "0");
}

#[test]
fn adaptive_smoke_run_has_positive_finite_loss() {
    let dir = workdir("smoke");
    fs::write(
        dir.join("c.cfg"),
        "dimension = 3\nlabels = 2\nrounds = 1000\nadversary = adaptive_width\nseed = 3\n",
    )
    .unwrap();
    let out = nnpart(&dir, &["run", "c.cfg"], None);
    assert!(out.status.success());
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    let loss: f64 = summary_value(&summary, "total_loss").parse().unwrap();
    assert!(loss.is_finite() && loss > 0.0);
    let ledger = fs::read_to_string(dir.join("ledger.csv")).unwrap();
    assert_eq!(ledger.lines().count(), 1001);
    // Labels are 1-based.
    assert!(ledger.lines().skip(1).all(|l| {
        let f: Vec<&str> = l.split(',').collect();
        f.len() == 9 && ["1", "2"].contains(&f[1]) && ["1", "2"].contains(&f[2])
    }));
}

#[test]
fn seed_override_changes_output_and_is_echoed() {
    let dir = workdir("seed");
    fs::write(dir.join("c.cfg"), "rounds = 200\nseed = 1\n").unwrap();
    assert!(nnpart(&dir, &["run", "c.cfg"], None).status.success());
    let a = fs::read(dir.join("ledger.csv")).unwrap();
    assert!(nnpart(&dir, &["run", "c.cfg"], Some("99")).status.success());
    let b = fs::read(dir.join("ledger.csv")).unwrap();
    assert_ne!(a, b);
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert_eq!(summary_value(&summary, "seed"), "99");
    assert_eq!(nnpart(&dir, &["run", "c.cfg"], Some("x")).status.code(), Some(2));
}

#[test]
fn invalid_config_exits_2() {
    let dir = workdir("invalid");
    for (i, text) in ["metric = lp\np = 3\n", "labels = 1\n", "mystery = 4\n"].iter().enumerate() {
        let name = format!("c{i}.cfg");
        fs::write(dir.join(&name), text).unwrap();
        let out = nnpart(&dir, &["run", &name], None);
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(nnpart(&dir, &["run", "missing.cfg"], None).status.code(), Some(2));
}

#[test]
fn unachievable_margin_exits_3() {
    let dir = workdir("margin");
    fs::write(
        dir.join("c.cfg"),
        "dimension = 2\nrounds = 5\nadversary = margin\nadversary.gamma = 5\n",
    )
    .unwrap();
    let out = nnpart(&dir, &["run", "c.cfg"], None);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("generation"));
}

#[test]
fn replay_file_drives_the_queries() {
    let dir = workdir("replay");
    fs::write(dir.join("q.txt"), "# two queries\n0.5 0\n\n0 -0.25\n").unwrap();
    fs::write(
        dir.join("c.cfg"),
        "dimension = 2\nrounds = 2\nadversary = replay\nadversary.replay = q.txt\ncenters = explicit\ncenters.list = 1,0; -1,0\n",
    )
    .unwrap();
    let out = nnpart(&dir, &["run", "c.cfg"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ledger = fs::read_to_string(dir.join("ledger.csv")).unwrap();
    let first: Vec<&str> = ledger.lines().nth(1).unwrap().split(',').collect();
    // q = (0.5, 0) is nearest to the first center.
    assert_eq!(first[2], "1");
    fs::write(dir.join("short.cfg"), "dimension = 2\nrounds = 3\nadversary = replay\nadversary.replay = q.txt\n").unwrap();
    assert_eq!(nnpart(&dir, &["run", "short.cfg"], None).status.code(), Some(3));
}

#[test]
fn sweep_rows_follow_grid_order() {
    let dir = workdir("sweep");
    fs::write(
        dir.join("s.cfg"),
        "dimension = 2\nlabels = 3\ngrid.rounds = 50, 80\ngrid.seed = 1,2,3\n",
    )
    .unwrap();
    let out = nnpart(&dir, &["sweep", "s.cfg"], None);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 7);
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    assert!(header.ends_with(&["total_loss", "mistakes", "robust_mistakes", "status"]));
    let cells: Vec<(String, String)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f[col("status")], "ok");
            (f[col("rounds")].to_string(), f[col("seed")].to_string())
        })
        .collect();
    let want: Vec<(String, String)> = ["50", "80"]
        .iter()
        .flat_map(|r| ["1", "2", "3"].iter().map(move |s| (r.to_string(), s.to_string())))
        .collect();
    assert_eq!(cells, want);
}

#[test]
fn sweep_with_empty_grid_is_header_only() {
    let dir = workdir("empty_sweep");
    fs::write(dir.join("s.cfg"), "rounds = 10\n").unwrap();
    let out = nnpart(&dir, &["sweep", "s.cfg"], None);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.join("sweep.csv")).unwrap().lines().count(), 1);
}

#[test]
fn sweep_records_failed_cells() {
    let dir = workdir("partial_sweep");
    fs::write(dir.join("s.cfg"), "rounds = 10\ngrid.labels = 1, 2\n").unwrap();
    let out = nnpart(&dir, &["sweep", "s.cfg"], None);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(rows[0].contains("invalid configuration"));
    assert!(rows[1].ends_with(",ok"));
}

#[test]
fn verify_suites_report_and_exit() {
    let dir = workdir("verify");
    let out = nnpart(&dir, &["verify", "lp"], None);
    assert!(out.status.success());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("PASS distribution_feasibility"));
    assert!(report.contains("bound"));
    let out = nnpart(&dir, &["verify", "containment"], None);
    assert!(out.status.success());
    assert_eq!(nnpart(&dir, &["verify", "nonsense"], None).status.code(), Some(2));
}

#[test]
fn lowerbound_command_reports_packing() {
    let dir = workdir("lowerbound");
    fs::write(dir.join("lb.cfg"), "seed = 4\n").unwrap();
    let out = nnpart(&dir, &["lowerbound", "lb.cfg"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert_eq!(summary_value(&summary, "eps"), "0.25");
    assert_eq!(summary_value(&summary, "loss_floor"), "0.03125");
    assert_eq!(summary_value(&summary, "rounds"), "254");
    let dist: f64 = summary_value(&summary, "min_pairwise_distance").parse().unwrap();
    assert!(dist >= 0.25);
}
