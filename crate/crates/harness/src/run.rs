//! Cell scheduling: tasks run on a bounded pool, rows come back in task order.

use std::path::Path;
use std::time::Instant;

use mfc_core::fit::{fit_loglog, RateFit};
use mfc_core::rng::{derive_seed, experiment_id};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Range};
use crate::error::{HarnessError, Result};
use crate::experiments;
use crate::report::{CellRow, Check, FitRecord, Report};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Experiment {
    EmpiricalW1,
    VanishingViscosity,
    ColeHopf,
    Coupon,
    SupconvCheck,
    MfcGap,
    ProjectCheck,
    MfcRegularity,
    FpStability,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::EmpiricalW1,
        Experiment::VanishingViscosity,
        Experiment::ColeHopf,
        Experiment::Coupon,
        Experiment::SupconvCheck,
        Experiment::MfcGap,
        Experiment::ProjectCheck,
        Experiment::MfcRegularity,
        Experiment::FpStability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::EmpiricalW1 => "empirical-w1",
            Experiment::VanishingViscosity => "vanishing-viscosity",
            Experiment::ColeHopf => "cole-hopf",
            Experiment::Coupon => "coupon",
            Experiment::SupconvCheck => "supconv-check",
            Experiment::MfcGap => "mfc-gap",
            Experiment::ProjectCheck => "project-check",
            Experiment::MfcRegularity => "mfc-regularity",
            Experiment::FpStability => "fp-stability",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }
}

/// One output row of a task.
#[derive(Clone, Debug)]
pub struct Value {
    pub case: String,
    pub params: String,
    pub x: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub status: &'static str,
}

impl Value {
    pub fn new(case: impl Into<String>, params: impl Into<String>, x: f64, estimate: f64, stderr: f64) -> Self {
        Self { case: case.into(), params: params.into(), x, estimate, stderr, status: "ok" }
    }

    pub fn with_status(mut self, status: &'static str) -> Self {
        self.status = status;
        self
    }
}

type Job = Box<dyn Fn(u64) -> Result<Vec<Value>> + Send + Sync>;

/// A unit of work; it receives its derived seed and must depend on nothing else that
/// is not recorded in `params`.
pub struct Task {
    pub case: String,
    pub params: String,
    pub x: f64,
    pub job: Job,
}

impl Task {
    pub fn new(case: impl Into<String>, params: impl Into<String>, x: f64, job: impl Fn(u64) -> Result<Vec<Value>> + Send + Sync + 'static) -> Self {
        Self { case: case.into(), params: params.into(), x, job: Box::new(job) }
    }
}

pub struct Context<'a> {
    pub experiment: Experiment,
    pub label: String,
    pub seed: u64,
    pub cfg: &'a ExperimentConfig,
    pub pool: &'a rayon::ThreadPool,
}

impl Context<'_> {
    /// Seed of task `index`; keyed by the experiment name, not the free-form label.
    pub fn cell_seed(&self, index: u64) -> u64 {
        derive_seed(self.seed, experiment_id(self.experiment.name()), index)
    }

    /// Seed for data shared by several tasks (targets, fixed instances).
    pub fn shared_seed(&self, tag: &str) -> u64 {
        derive_seed(self.seed, experiment_id(self.experiment.name()) ^ experiment_id(tag), u64::MAX)
    }

    pub fn run(&self, tasks: Vec<Task>) -> Report {
        let results: Vec<(Result<Vec<Value>>, f64, u64)> = self.pool.install(|| {
            tasks
                .par_iter()
                .enumerate()
                .map(|(i, t)| {
                    let seed = self.cell_seed(i as u64);
                    let start = Instant::now();
                    let out = (t.job)(seed);
                    (out, start.elapsed().as_secs_f64(), seed)
                })
                .collect()
        });
        let mut report = Report { experiment: self.label.clone(), git_describe: git_describe(), ..Default::default() };
        for (task, (out, secs, seed)) in tasks.iter().zip(results) {
            let values = match out {
                Ok(v) => v,
                Err(e) => vec![Value {
                    status: "error",
                    ..Value::new(task.case.clone(), format!("{};error={e}", task.params), task.x, f64::NAN, f64::NAN)
                }],
            };
            for v in values {
                report.cells.push(CellRow {
                    experiment: self.label.clone(),
                    case: v.case,
                    cell: report.cells.len(),
                    params: v.params,
                    x: v.x,
                    estimate: v.estimate,
                    stderr: v.stderr,
                    seed,
                    status: v.status.into(),
                });
                report.timings.push(secs);
            }
        }
        report
    }

    pub fn check(&self, name: impl Into<String>, value: f64, range: Range, detail: impl Into<String>) -> Check {
        Check {
            experiment: self.label.clone(),
            name: name.into(),
            value,
            min: range.min,
            max: range.max,
            passed: range.contains(value),
            detail: detail.into(),
        }
    }
}

/// Successful rows of one case, as `(x, estimate)`.
pub fn points(report: &Report, case: &str) -> Vec<(f64, f64)> {
    report.cells.iter().filter(|c| c.case == case && c.ok()).map(|c| (c.x, c.estimate)).collect()
}

pub fn rows<'a>(report: &'a Report, case: &'a str) -> impl Iterator<Item = &'a CellRow> + 'a {
    report.cells.iter().filter(move |c| c.case == case)
}

/// Fits the case's points and records the fit and a slope check; an unfittable case fails its check.
pub fn fit_and_check(ctx: &Context, report: &mut Report, case: &str, pts: &[(f64, f64)], slope: Range) -> Option<RateFit> {
    match fit_loglog(pts) {
        Ok(fit) => {
            report.fits.push(FitRecord::new(&ctx.label, case, &fit));
            let detail = format!("slope {:.4} ± {:.4}, r² {:.4}", fit.slope, fit.stderr_slope, fit.r_squared);
            report.checks.push(ctx.check(format!("{case}: slope"), fit.slope, slope, detail));
            Some(fit)
        }
        Err(e) => {
            report.checks.push(ctx.check(format!("{case}: slope"), f64::NAN, slope, e.to_string()));
            None
        }
    }
}

pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| HarnessError::InvalidArgument(e.to_string()))
}

/// Runs one experiment and returns its report without writing anything.
pub fn run_experiment(experiment: Experiment, cfg: &ExperimentConfig, threads: usize) -> Result<Report> {
    cfg.validate()?;
    let pool = thread_pool(threads)?;
    let label = cfg.experiment.clone().unwrap_or_else(|| experiment.name().to_string());
    let ctx = Context { experiment, label, seed: cfg.seed, cfg, pool: &pool };
    Ok(match experiment {
        Experiment::EmpiricalW1 => experiments::empirical_w1::run(&ctx)?,
        Experiment::VanishingViscosity => experiments::viscosity::run(&ctx)?,
        Experiment::ColeHopf => experiments::cole_hopf::run(&ctx)?,
        Experiment::Coupon => experiments::coupon::run(&ctx)?,
        Experiment::SupconvCheck => experiments::supconv::run(&ctx)?,
        Experiment::MfcGap => experiments::mfc_gap::run(&ctx)?,
        Experiment::ProjectCheck => experiments::project::run(&ctx)?,
        Experiment::MfcRegularity => experiments::regularity::run(&ctx)?,
        Experiment::FpStability => experiments::fp_stability::run(&ctx)?,
    })
}

/// Runs and writes `dir/<experiment>/{cells.csv, timings.csv, summary.json, plot.py}`.
pub fn run_and_write(experiment: Experiment, cfg: &ExperimentConfig, threads: usize, dir: &Path) -> Result<Report> {
    let report = run_experiment(experiment, cfg, threads)?;
    report.write_all(&dir.join(experiment.name()))?;
    Ok(report)
}

/// Maximum that propagates NaN, so a failed cell fails the check that reads it.
pub fn strict_max(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) })
}

pub fn strict_min(values: impl IntoIterator<Item = f64>) -> f64 {
    -strict_max(values.into_iter().map(|v| -v))
}

/// Estimate of an ok row, NaN otherwise.
pub fn estimate_or_nan(row: &CellRow) -> f64 {
    if row.ok() { row.estimate } else { f64::NAN }
}
