use mfc_core::pde::{solve_mfc, HamiltonianSpec, MfcOptions, MfcProblem};
use mfc_core::rng::{random_measure, stream_rng};
use mfc_core::spectral::{hs_distance, SobolevWeight};
use rand::Rng;

use super::{nonconvex, nonconvex_terminal, shared};
use crate::config::Range;
use crate::error::Result;
use crate::report::Report;
use crate::run::{estimate_or_nan, rows, strict_max, Context, Task, Value};

fn problem(horizon: f64, cutoff: usize) -> Result<MfcProblem> {
    Ok(MfcProblem::new(HamiltonianSpec::quadratic(1), shared(nonconvex(cutoff)), shared(nonconvex_terminal(cutoff)), horizon)?)
}

/// Relative change of a fitted constant; two zero fits count as unchanged.
fn relative_change(first: f64, all: f64) -> f64 {
    if first == 0.0 && all == 0.0 {
        0.0
    } else {
        (all - first).abs() / first.abs()
    }
}

pub fn run(ctx: &Context) -> Result<Report> {
    let r = ctx.cfg.mfc_regularity.clone();
    let mut tasks = Vec::new();
    for j in 0..2 * r.pairs {
        let params = format!("pair={j};horizon={};cutoff={};resolution={};steps={};tol={:e};s={}", r.horizon, r.cutoff, r.resolution, r.steps, r.tol, r.sobolev);
        let (p2, r) = (params.clone(), r.clone());
        tasks.push(Task::new("lipschitz", params, j as f64, move |seed| {
            let problem = problem(r.horizon, r.cutoff)?;
            let s = SobolevWeight::new(r.sobolev)?;
            let opts = MfcOptions { resolution: r.resolution, steps: r.steps, tol: r.tol, ..MfcOptions::default() };
            let mut rng = stream_rng(seed, 0, 0);
            let m0 = random_measure(&mut rng, 1, r.cutoff, 0.9, 1.0);
            let m1 = random_measure(&mut rng, 1, r.cutoff, 0.9, 1.0);
            let lambda: f64 = rng.random_range(0.05..0.95);
            let ml = m0.mix(&m1, lambda)?;
            let sols = [&m0, &m1, &ml].map(|m| solve_mfc(&problem, 0.0, m, &opts));
            let [a, b, c] = sols;
            let (a, b, c) = (a?, b?, c?);
            let status = if a.certified && b.certified && c.certified { "ok" } else { "uncertified" };
            let dist = hs_distance(&m0, &m1, &s)?;
            let lip = (a.value - b.value).abs() / dist;
            let gap = (1.0 - lambda) * a.value + lambda * b.value - c.value;
            let semi = 2.0 * gap / (lambda * (1.0 - lambda) * dist * dist);
            let residual = a.picard_residual.max(b.picard_residual).max(c.picard_residual);
            let params = format!("{p2};lambda={lambda};picard_residual={residual:e}");
            let x = j as f64;
            Ok(vec![
                Value::new("lipschitz", params.clone(), x, lip, 0.0).with_status(status),
                Value::new("semiconcavity", params, x, semi, 0.0).with_status(status),
            ])
        }));
    }
    let mut report = ctx.run(tasks);
    if r.pairs == 0 {
        return Ok(report);
    }
    for case in ["lipschitz", "semiconcavity"] {
        let v: Vec<f64> = rows(&report, case).map(estimate_or_nan).collect();
        // one-sided bounds: a negative semi-concavity ratio never constrains the constant
        let first = strict_max(v[..r.pairs].iter().copied()).max(0.0);
        let all = strict_max(v.iter().copied()).max(0.0);
        let change = relative_change(first, all);
        let detail = format!("fitted {first:.6} on {} pairs, {all:.6} on {}", r.pairs, 2 * r.pairs);
        report.checks.push(ctx.check(format!("{case}: relative change when samples double"), change, Range::new(None, Some(r.stability)), detail));
    }
    Ok(report)
}
