use mfc_core::particle::{cole_hopf_vn, ColeHopfOptions, ParticleRunConfig};

use crate::config::Range;
use crate::error::Result;
use crate::report::Report;
use crate::run::{estimate_or_nan, fit_and_check, points, rows, strict_min, Context, Task, Value};

const CASE: &str = "value";

pub fn run(ctx: &Context) -> Result<Report> {
    let ch = &ctx.cfg.cole_hopf;
    let opts = ColeHopfOptions { per_axis: ch.per_axis, budget: ctx.cfg.budget.transport_cells, approx_eps: ch.approx_eps };
    let mut tasks = Vec::new();
    for &n in &ch.n {
        let (dim, horizon, reps, opts) = (ch.dim, ch.horizon, ch.replications, opts.clone());
        let params = format!("dim={dim};n={n};horizon={horizon};replications={reps}");
        let p2 = params.clone();
        tasks.push(Task::new(CASE, params, n as f64, move |seed| {
            let e = cole_hopf_vn(&ParticleRunConfig::new(n, reps, horizon, seed), horizon, dim, &opts)?;
            let params = format!("{p2};plug_in={:e};mean_distance={:e};quantization_error={:e}", e.plug_in, e.mean_distance, e.quantization_error);
            let v = Value::new(CASE, params, n as f64, e.estimate.mean, e.estimate.stderr);
            Ok(vec![if e.approximate { v.with_status("approximate") } else { v }])
        }));
    }
    let mut report = ctx.run(tasks);
    if ch.n.is_empty() {
        return Ok(report);
    }
    let approximate = rows(&report, CASE).filter(|c| c.status == "approximate").count();
    let failed = rows(&report, CASE).filter(|c| !c.ok()).count();
    let smallest = strict_min(rows(&report, CASE).map(estimate_or_nan));
    let positive = ctx.check("all values positive", smallest, Range::new(Some(f64::MIN_POSITIVE), None), format!("{failed} failed cells, {approximate} approximate"));
    report.checks.push(positive);
    let pts = points(&report, CASE);
    fit_and_check(ctx, &mut report, CASE, &pts, ch.slope);
    Ok(report)
}
