use mfc_core::particle::coupon_occupancy;

use crate::config::Range;
use crate::error::Result;
use crate::report::Report;
use crate::run::{estimate_or_nan, rows, strict_max, Context, Task, Value};

pub fn run(ctx: &Context) -> Result<Report> {
    let cp = &ctx.cfg.coupon;
    let mut tasks = Vec::new();
    for &n in &cp.n {
        let (trials, p) = (cp.trials, cp.p);
        let params = format!("n={n};trials={trials};p={p}");
        let p2 = params.clone();
        tasks.push(Task::new("occupied-fraction", params, n as f64, move |seed| {
            let s = coupon_occupancy(n, trials, p, seed)?;
            let x = n as f64;
            Ok(vec![
                Value::new("occupied-fraction", p2.clone(), x, s.occupied_fraction.mean, s.occupied_fraction.stderr),
                Value::new("occupied-fraction-exact", p2.clone(), x, s.exact_fraction, 0.0),
                Value::new("prob-bpn-simulated", p2.clone(), x, s.prob_bpn.mean, s.prob_bpn.stderr),
                Value::new("log-prob-bpn-exact", p2.clone(), x, s.exact_log_prob_bpn, 0.0),
            ])
        }));
    }
    let mut report = ctx.run(tasks);
    let simulated: Vec<_> = rows(&report, "occupied-fraction").cloned().collect();
    let exact: Vec<_> = rows(&report, "occupied-fraction-exact").cloned().collect();
    for (s, e) in simulated.iter().zip(&exact) {
        let dev = estimate_or_nan(s) - e.estimate;
        let detail = format!("simulated {:.5} ± {:.5}, oracle {:.5}", s.estimate, s.stderr, e.estimate);
        report.checks.push(ctx.check(format!("occupied fraction N={}", s.x), dev, Range::around(0.0, cp.fraction_tolerance), detail));
    }
    let mut logs: Vec<(f64, f64)> = rows(&report, "log-prob-bpn-exact").map(|c| (c.x, estimate_or_nan(c))).collect();
    logs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if logs.len() >= 2 {
        // largest increment between consecutive N; strictly negative means strictly decreasing
        let worst = strict_max(logs.windows(2).map(|w| w[1].1 - w[0].1));
        let detail = logs.iter().map(|(n, l)| format!("N={n}: log P={l:.4}")).collect::<Vec<_>>().join(", ");
        report.checks.push(ctx.check("log P[B] strictly decreasing", worst, Range::new(None, Some(-f64::MIN_POSITIVE)), detail));
        let n = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
        report.checks.push(ctx.check("log P[B] slope per unit N", slope, Range::new(None, Some(cp.max_log_slope)), "least squares of log P on N"));
    }
    Ok(report)
}
