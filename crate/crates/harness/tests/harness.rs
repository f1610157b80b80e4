use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use mfc_harness::{run_and_write, run_experiment, Experiment, ExperimentConfig};

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rates-test-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn smoke() -> ExperimentConfig {
    ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/smoke.json")).unwrap()
}

fn cells(dir: &Path, exp: Experiment) -> String {
    std::fs::read_to_string(dir.join(exp.name()).join("cells.csv")).unwrap()
}

#[test]
fn reruns_and_thread_counts_give_identical_cells() {
    let cfg = smoke();
    let (a, b, c) = (scratch("a"), scratch("b"), scratch("c"));
    for exp in [Experiment::EmpiricalW1, Experiment::Coupon, Experiment::ProjectCheck] {
        run_and_write(exp, &cfg, 1, &a).unwrap();
        run_and_write(exp, &cfg, 1, &b).unwrap();
        run_and_write(exp, &cfg, 2, &c).unwrap();
        let first = cells(&a, exp);
        assert!(first.lines().count() > 1, "{} wrote no rows", exp.name());
        assert_eq!(first, cells(&b, exp), "{} differs on rerun", exp.name());
        assert_eq!(first, cells(&c, exp), "{} differs across thread counts", exp.name());
    }
}

#[test]
fn seed_changes_the_sampled_cells() {
    let mut cfg = smoke();
    let a = run_experiment(Experiment::EmpiricalW1, &cfg, 1).unwrap();
    cfg.seed += 1;
    let b = run_experiment(Experiment::EmpiricalW1, &cfg, 1).unwrap();
    assert_ne!(a.cells[0].estimate, b.cells[0].estimate);
    assert_ne!(a.cells[0].seed, b.cells[0].seed);
}

#[test]
fn output_layout_is_complete() {
    let dir = scratch("layout");
    let report = run_and_write(Experiment::ProjectCheck, &smoke(), 1, &dir).unwrap();
    let sub = dir.join("project-check");
    for f in ["cells.csv", "timings.csv", "summary.json", "plot.py"] {
        assert!(sub.join(f).is_file(), "missing {f}");
    }
    let header = cells(&dir, Experiment::ProjectCheck).lines().next().unwrap().to_string();
    assert_eq!(header, "experiment,case,cell,params,x,estimate,stderr,seed,status");
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sub.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "smoke");
    assert_eq!(summary["checks"].as_array().unwrap().len(), report.checks.len());
}

#[test]
fn empty_grid_writes_header_only() {
    let mut cfg = ExperimentConfig::default();
    cfg.empirical_w1.cases.clear();
    let dir = scratch("empty");
    let report = run_and_write(Experiment::EmpiricalW1, &cfg, 1, &dir).unwrap();
    assert!(report.cells.is_empty() && report.fits.is_empty());
    assert!(report.passed());
    assert_eq!(cells(&dir, Experiment::EmpiricalW1).lines().count(), 1);
}

#[test]
fn bundled_d1_config_reproduces_the_half_rate() {
    let cfg = ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/empirical-w1-d1.toml")).unwrap();
    let report = run_experiment(Experiment::EmpiricalW1, &cfg, 1).unwrap();
    assert_eq!(report.fits.len(), 1);
    let slope = report.fits[0].slope;
    assert!((slope + 0.5).abs() < 0.07, "slope {slope}");
    assert!(report.passed());
}

#[test]
fn failing_cells_are_recorded_not_fatal() {
    // a transport budget of one cell leaves no exact or fallback solver in d = 2
    let mut cfg = smoke();
    cfg.budget.transport_cells = 1;
    let report = run_experiment(Experiment::EmpiricalW1, &cfg, 1).unwrap();
    let failed: Vec<_> = report.cells.iter().filter(|c| c.status == "error").collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|c| c.estimate.is_nan() && c.params.contains("error=")));
    assert_eq!(report.failed_cells(), failed.len());
}

fn rates(dir: &Path, config: &str, file: &str, extra: &[&str]) -> i32 {
    let path = dir.join(file);
    std::fs::write(&path, config).unwrap();
    let out = dir.join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_rates"))
        .args(["--config", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "1"])
        .args(extra)
        .stdout(Stdio::null())
        .status()
        .unwrap();
    status.code().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = scratch("cli");
    assert_eq!(rates(&dir, "[empirical_w1]\ncases = []\n", "empty.toml", &["empirical-w1"]), 0);
    assert!(dir.join("out/empirical-w1/cells.csv").is_file());
    let impossible = "[project]\nn = [4, 8, 16]\nslope = { min = 5.0 }\n";
    assert_eq!(rates(&dir, impossible, "impossible.toml", &["project-check"]), 1);
    assert_eq!(rates(&dir, "[project]\nbogus = 1\n", "bad.toml", &["project-check"]), 2);
    assert_eq!(rates(&dir, "{\"coupon\": {\"p\": 2.0}}", "bad.json", &["coupon"]), 2);
}

#[test]
fn strict_mode_fails_on_error_cells() {
    let dir = scratch("strict");
    // N = 16 exceeds the budget; N = 4, 6 and 9 still give a fit
    let cfg = "[budget]\ntransport_cells = 100\n\n[[empirical_w1.cases]]\ndim = 2\nsampler = \"uniform\"\nn = [4, 6, 9, 16]\nreplications = 3\nslope = {}\n";
    assert_eq!(rates(&dir, cfg, "lenient.toml", &["empirical-w1"]), 0);
    assert_eq!(rates(&dir, cfg, "strict.toml", &["--strict", "empirical-w1"]), 1);
}
