//! Every acceptance criterion at the default configuration, one verdict line each.
//! Reports are also written under the target tmpdir for inspection.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use mfc_harness::{run_and_write, Check, Experiment, ExperimentConfig};

const FIXED_POINT_CHECKS: [&str; 2] = ["fixed point vs brute force", "linf-distance: slope"];

struct Criterion {
    label: &'static str,
    experiment: Experiment,
    select: fn(&Check) -> bool,
}

fn all(_: &Check) -> bool {
    true
}

fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { label: "empirical W1 rate, d = 1 and d = 3", experiment: Experiment::EmpiricalW1, select: all },
        Criterion { label: "vanishing-viscosity rate", experiment: Experiment::VanishingViscosity, select: all },
        Criterion { label: "Cole-Hopf particle value rate", experiment: Experiment::ColeHopf, select: all },
        Criterion { label: "coupon collector fractions and tail", experiment: Experiment::Coupon, select: all },
        Criterion {
            label: "sup-convolution sandwich, distance, monotonicity, gradient",
            experiment: Experiment::SupconvCheck,
            select: |c| !FIXED_POINT_CHECKS.contains(&c.name.as_str()),
        },
        Criterion {
            label: "fixed-point maximizer and L-infinity rate",
            experiment: Experiment::SupconvCheck,
            select: |c| FIXED_POINT_CHECKS.contains(&c.name.as_str()),
        },
        Criterion { label: "MFC value regularity stability", experiment: Experiment::MfcRegularity, select: all },
        Criterion { label: "N-particle gap sign and rate", experiment: Experiment::MfcGap, select: all },
        Criterion { label: "projection residual rate and bound", experiment: Experiment::ProjectCheck, select: all },
        Criterion { label: "Fokker-Planck H^-2 stability constant", experiment: Experiment::FpStability, select: all },
    ]
}

fn main() -> ExitCode {
    // libtest-style flags (--list, filters) are accepted and ignored
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let cfg = ExperimentConfig::default();
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut reports = std::collections::HashMap::new();
    let criteria = criteria();
    let mut passed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let report = reports.entry(c.experiment).or_insert_with(|| run_and_write(c.experiment, &cfg, threads, &out));
        let (ok, detail) = match report {
            Ok(r) => {
                let checks: Vec<&Check> = r.checks.iter().filter(|k| (c.select)(k)).collect();
                let failing: Vec<String> = checks.iter().filter(|k| !k.passed).map(|k| format!("{} = {:.4e}", k.name, k.value)).collect();
                let ok = !checks.is_empty() && failing.is_empty();
                let detail = if ok { format!("{} checks", checks.len()) } else { format!("failing: {}", failing.join("; ")) };
                (ok, detail)
            }
            Err(e) => (false, format!("run error: {e}")),
        };
        passed += ok as usize;
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("criterion {:>2}: {verdict}  {}  ({detail}, {:.1}s)", i + 1, c.label, start.elapsed().as_secs_f64());
        if let Ok(r) = report {
            for k in r.checks.iter().filter(|k| (c.select)(k)) {
                println!("      {} {}: {:.6e} ({})", if k.passed { "ok  " } else { "FAIL" }, k.name, k.value, k.detail);
            }
        }
    }
    println!("acceptance: {passed}/{} criteria passed; reports in {}", criteria.len(), out.display());
    if passed == criteria.len() { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
