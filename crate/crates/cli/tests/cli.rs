use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_debtscale");

fn debtscale(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

/// A small voting/debt-aware setup: one-hour deterministic workload.
fn fixture(dir: &Path, extra: &str) -> PathBuf {
    std::fs::write(
        dir.join("profile.cfg"),
        "mode = \"poisson\"\nwork = 2.0\nduration = 3600\nsegments = [[0, 3600, 8, 4, 1800]]\n",
    )
    .unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, format!("profile = \"profile.cfg\"\nseed = 5\n{extra}")).unwrap();
    cfg
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn run_writes_identical_csvs_for_the_same_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path(), "policy = \"debt-aware\"\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = debtscale(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["provisioning.csv", "penalties.csv", "debt.csv", "utility.csv", "qtable.csv", "summary.csv"] {
        let body = read(&a, name);
        assert_eq!(body, read(&b, name), "{name}");
        assert!(!body.contains('\r'));
    }
    assert!(read(&a, "summary.csv").starts_with("metric,value\npolicy,debt-aware\n"));
}

#[test]
fn voting_run_has_no_qtable_and_seed_override_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path(), "policy = \"voting\"\n");
    let cfg = cfg.to_str().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(debtscale(&["run", "--config", cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(debtscale(&["run", "--config", cfg, "--seed", "6", "--out", b.to_str().unwrap()]).status.success());
    assert!(!a.join("qtable.csv").exists());
    assert_ne!(read(&a, "penalties.csv"), read(&b, "penalties.csv"));
}

#[test]
fn config_errors_exit_nonzero_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path(), "spin_upp = 90\n");
    let out = tmp.path().join("out");
    let o = debtscale(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("spin_upp"));
    assert!(!out.exists());

    let missing = tmp.path().join("nope.cfg");
    let o = debtscale(&["run", "--config", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn compare_reports_deltas() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path(), "");
    let cfg = cfg.to_str().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(debtscale(&["run", "--config", cfg, "--policy", "debt-aware", "--out", a.to_str().unwrap()])
        .status
        .success());
    assert!(debtscale(&["run", "--config", cfg, "--policy", "voting", "--out", b.to_str().unwrap()])
        .status
        .success());
    let o = debtscale(&["compare", a.to_str().unwrap(), a.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("utility_delta,0.000000"), "{text}");
    let o = debtscale(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(!debtscale(&["compare", a.to_str().unwrap(), tmp.path().join("x").to_str().unwrap()])
        .status
        .success());
}

#[test]
fn gen_trace_feeds_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path(), "policy = \"voting\"\n");
    let trace = tmp.path().join("trace.txt");
    let profile = tmp.path().join("profile.cfg");
    let o = debtscale(&[
        "gen-trace",
        "--profile",
        profile.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = cfg.to_str().unwrap();
    assert!(debtscale(&["run", "--config", cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(debtscale(&["run", "--config", cfg, "--trace", trace.to_str().unwrap(), "--out", b.to_str().unwrap()])
        .status
        .success());
    // The same seed generates the same arrivals either way.
    assert_eq!(read(&a, "penalties.csv"), read(&b, "penalties.csv"));
}

#[test]
fn qtable_round_trips_through_a_warm_start() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path(), "policy = \"debt-aware\"\n");
    let cfg = cfg.to_str().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(debtscale(&["run", "--config", cfg, "--out", a.to_str().unwrap()]).status.success());
    let q = a.join("qtable.csv");
    let o = debtscale(&["run", "--config", cfg, "--qtable-in", q.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!debtscale(&["run", "--config", cfg, "--policy", "voting", "--qtable-in", q.to_str().unwrap(), "--out", tmp.path().join("c").to_str().unwrap()])
        .status
        .success());
}
