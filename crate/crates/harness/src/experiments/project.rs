use mfc_core::functionals::{laplacian_residual, MeasureFunctional};

use super::mfc_gap::clustered;
use super::nonconvex;
use crate::config::Range;
use crate::error::{HarnessError, Result};
use crate::report::Report;
use crate::run::{estimate_or_nan, fit_and_check, points, rows, strict_max, Context, Task, Value};

const TRACKED_AT: f64 = 0.55;

pub fn run(ctx: &Context) -> Result<Report> {
    let pc = ctx.cfg.project.clone();
    let bound = nonconvex(2).residual_bound().ok_or_else(|| HarnessError::InvalidArgument("functional has no residual bound".into()))?;
    let mut tasks = Vec::new();
    for &n in &pc.n {
        let params = format!("n={n};step={:e};tracked_at={TRACKED_AT}", pc.step);
        let p2 = params.clone();
        let step = pc.step;
        tasks.push(Task::new("raw", params, n as f64, move |_| {
            let phi = nonconvex(2);
            // particle 0 is pinned, so the tracked residual has a limit as N grows
            let mut x = clustered(n);
            x[0] = TRACKED_AT;
            let tracked = laplacian_residual(&phi, &x, 0, step)?;
            let mut worst = tracked.scaled;
            for i in [n / 4, n / 2, n - 1] {
                worst = worst.max(laplacian_residual(&phi, &x, i, step)?.scaled);
            }
            Ok(vec![Value::new("raw", p2.clone(), n as f64, tracked.raw.abs(), 0.0), Value::new("scaled", p2.clone(), n as f64, worst, 0.0)])
        }));
    }
    let mut report = ctx.run(tasks);
    if pc.n.is_empty() {
        return Ok(report);
    }
    let worst = strict_max(rows(&report, "scaled").map(estimate_or_nan));
    let c = ctx.check("N²·|residual| / analytic bound", worst / bound, Range::new(None, Some(pc.bound_factor)), format!("analytic bound {bound:.6}"));
    report.checks.push(c);
    let pts = points(&report, "raw");
    fit_and_check(ctx, &mut report, "raw", &pts, pc.slope);
    Ok(report)
}
