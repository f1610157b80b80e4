use std::f64::consts::PI;
use std::sync::Arc;

use mfc_core::functionals::{CylindricalFunctional, SharedFunctional};
use mfc_core::particle::{estimate_vn_upper, ParticleRunConfig};
use mfc_core::pde::{HamiltonianSpec, MfcOptions, MfcProblem};

use super::cos_field;
use crate::config::Range;
use crate::error::Result;
use crate::report::Report;
use crate::run::{fit_and_check, points, rows, strict_min, Context, Task, Value};

/// Quadratic running and terminal costs of moments, both convex in the measure.
pub fn convex_problem(horizon: f64) -> Result<MfcProblem> {
    let f: SharedFunctional = Arc::new(CylindricalFunctional::square(cos_field(2, 1, 1.0), 1.0)?);
    let g: SharedFunctional = Arc::new(CylindricalFunctional::square(cos_field(2, 1, 0.5).add(&cos_field(2, 2, 0.5))?, 2.0)?);
    Ok(MfcProblem::new(HamiltonianSpec::quadratic(1), f, g, horizon)?)
}

/// Quantiles of a smooth density concentrated on `[0.3, 0.8]`.
pub fn clustered(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let u = (i as f64 + 0.5) / n as f64;
            (0.3 + 0.5 * u - 0.05 * (2.0 * PI * u).sin()).rem_euclid(1.0)
        })
        .collect()
}

pub fn run(ctx: &Context) -> Result<Report> {
    let g = ctx.cfg.mfc_gap.clone();
    let mut tasks = Vec::new();
    for &n in &g.n {
        let params = format!("n={n};horizon={};replications={};resolution={};steps={}", g.horizon, g.replications, g.resolution, g.steps);
        let (p2, g) = (params.clone(), g.clone());
        tasks.push(Task::new("gap", params, n as f64, move |seed| {
            let problem = convex_problem(g.horizon)?;
            let opts = MfcOptions { resolution: g.resolution, steps: g.steps, ..MfcOptions::default() };
            let ub = estimate_vn_upper(&problem, 0.0, &clustered(n), &ParticleRunConfig::new(n, g.replications, g.horizon, seed), &opts)?;
            let status = if ub.mfc.certified { "ok" } else { "uncertified" };
            let params = format!("{p2};picard_residual={:e}", ub.mfc.picard_residual);
            let (x, e) = (n as f64, &ub.estimate);
            Ok(vec![
                Value::new("gap", params.clone(), x, e.mean - ub.mfc.value, e.stderr).with_status(status),
                Value::new("vn-upper", params.clone(), x, e.mean, e.stderr),
                Value::new("mfc-value", params, x, ub.mfc.value, 0.0).with_status(status),
            ])
        }));
    }
    let mut report = ctx.run(tasks);
    if g.n.is_empty() {
        return Ok(report);
    }
    // gap in units of its own standard error; a failed cell yields NaN and fails the check
    let z = strict_min(rows(&report, "gap").map(|c| if c.ok() { c.estimate / c.stderr.max(f64::MIN_POSITIVE) } else { f64::NAN }));
    report.checks.push(ctx.check("V^N upper estimate - U ≥ -k·stderr", z, Range::new(Some(-g.sigmas), None), "min over N of gap/stderr"));
    let pts = points(&report, "gap");
    fit_and_check(ctx, &mut report, "gap", &pts, g.slope);
    Ok(report)
}
