use std::sync::Arc;

use mfc_core::functionals::{CylindricalFunctional, DistanceCostFunctional, DistanceTarget, MeasureFunctional, SharedFunctional};
use mfc_core::regularize::{
    fixed_point_maximizer_with, mollify_measure_arg, sup_convolve, FixedPointOptions, LowerBoundCondition, Mollifier, SupConvSolver,
};
use mfc_core::rng::{random_measure, random_trig, stream_rng};
use mfc_core::spectral::{hs_distance, hs_inner, SobolevWeight};

use super::{cos_field, nonconvex, sin_field};
use crate::config::Range;
use crate::error::Result;
use crate::report::Report;
use crate::run::{estimate_or_nan, fit_and_check, points, rows, strict_max, strict_min, Context, Task, Value};

const BENCHMARKS: [&str; 3] = ["linear", "nonconvex", "distance"];

fn benchmark(name: &str, cutoff: usize, target_seed: u64) -> Result<SharedFunctional> {
    Ok(match name {
        "linear" => Arc::new(CylindricalFunctional::linear(cos_field(cutoff, 1, 1.0).axpy(1.0, &sin_field(cutoff, 2, 0.5))?)?),
        "nonconvex" => Arc::new(nonconvex(cutoff)),
        _ => {
            let target = random_measure(&mut stream_rng(target_seed, 0, 0), 1, cutoff, 0.9, 1.0);
            Arc::new(DistanceCostFunctional::torus(DistanceTarget::Spectral(target), cutoff)?)
        }
    })
}

/// Sandwich, distance and ε-monotonicity at one sampled `q`, normalized by the analytic bounds.
fn bounds_cell(phi: &dyn MeasureFunctional, cutoff: usize, s: &SobolevWeight, eps: &[f64], seed: u64) -> Result<[f64; 4]> {
    let cl = phi.lipschitz_hs(s).ok_or_else(|| mfc_core::Error::InvalidArgument("benchmark has no H^{-s} Lipschitz constant".into()))?;
    let q = random_measure(&mut stream_rng(seed, 0, 0), 1, cutoff, 0.5, 1.0);
    let base = phi.evaluate(&q);
    let mut sorted = eps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut gap_ratio, mut dist_ratio, mut min_gap, mut mono) = (0.0f64, 0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    let mut last: Option<f64> = None;
    for &e in &sorted {
        let r = sup_convolve(phi, &q, e, s, SupConvSolver::GradientAscent)?;
        let gap = r.value - base;
        min_gap = min_gap.min(gap);
        gap_ratio = gap_ratio.max(gap / (2.0 * cl * cl * e));
        dist_ratio = dist_ratio.max(hs_distance(&r.maximizer, &q, s)? / (2.0 * cl * e));
        if let Some(prev) = last {
            // positive when Φ^ε decreased as ε grew
            mono = mono.max(prev - r.value);
        }
        last = Some(r.value);
    }
    Ok([gap_ratio, dist_ratio, min_gap, if mono.is_finite() { mono } else { 0.0 }])
}

/// Relative error between `⟨(m_ε - q)/ε, h⟩_{-s}` and a central difference of `Φ^ε` along `h`.
fn gradient_cell(phi: &dyn MeasureFunctional, cutoff: usize, s: &SobolevWeight, eps: f64, step: f64, seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, 0, 0);
    let q = random_measure(&mut rng, 1, cutoff, 0.5, 1.0);
    let dir = random_trig(&mut rng, 1, cutoff, 1.0).scale(0.2);
    let r = sup_convolve(phi, &q, eps, s, SupConvSolver::GradientAscent)?;
    let value = |t: f64| -> Result<f64> { Ok(sup_convolve(phi, &q.perturbed(&dir, t)?, eps, s, SupConvSolver::GradientAscent)?.value) };
    let fd = (value(step)? - value(-step)?) / (2.0 * step);
    let an = hs_inner(&r.gradient, &dir, s)?;
    Ok((fd - an).abs() / an.abs().max(1e-3))
}

pub fn run(ctx: &Context) -> Result<Report> {
    let sc = ctx.cfg.supconv.clone();
    let fp = ctx.cfg.fixed_point.clone();
    let target_seed = ctx.shared_seed("distance-target");
    let q_seed = ctx.shared_seed("fixed-point-slope");
    let mut tasks = Vec::new();
    for name in BENCHMARKS {
        for j in 0..sc.samples {
            let params = format!("benchmark={name};sample={j};cutoff={};s={};eps={:?};target_seed={target_seed}", sc.cutoff, sc.sobolev, sc.eps);
            let (p2, sc) = (params.clone(), sc.clone());
            tasks.push(Task::new(format!("{name}-bounds"), params, j as f64, move |seed| {
                let phi = benchmark(name, sc.cutoff, target_seed)?;
                let s = SobolevWeight::new(sc.sobolev)?;
                let [gap, dist, min_gap, mono] = bounds_cell(phi.as_ref(), sc.cutoff, &s, &sc.eps, seed)?;
                let x = j as f64;
                Ok(vec![
                    Value::new(format!("{name}-gap-ratio"), p2.clone(), x, gap, 0.0),
                    Value::new(format!("{name}-distance-ratio"), p2.clone(), x, dist, 0.0),
                    Value::new(format!("{name}-min-gap"), p2.clone(), x, min_gap, 0.0),
                    Value::new(format!("{name}-monotonicity-defect"), p2.clone(), x, mono, 0.0),
                ])
            }));
        }
        let params = format!("benchmark={name};cutoff={};s={};eps={};step={};target_seed={target_seed}", sc.cutoff, sc.sobolev, sc.gradient_eps, sc.gradient_step);
        let (p2, sc2) = (params.clone(), sc.clone());
        tasks.push(Task::new(format!("{name}-gradient"), params, sc.gradient_eps, move |seed| {
            let phi = benchmark(name, sc2.cutoff, target_seed)?;
            let s = SobolevWeight::new(sc2.sobolev)?;
            let err = gradient_cell(phi.as_ref(), sc2.cutoff, &s, sc2.gradient_eps, sc2.gradient_step, seed)?;
            Ok(vec![Value::new(format!("{name}-gradient"), p2.clone(), sc2.gradient_eps, err, 0.0)])
        }));
    }
    let gamma = Mollifier::bump().gamma(1);
    for j in 0..fp.instances {
        let params = format!("instance={j};cutoff={};s={};delta={};eps={};c1={};eta={}", fp.cutoff, fp.sobolev, fp.delta, fp.eps, fp.c1, fp.eta);
        let (p2, fp) = (params.clone(), fp.clone());
        tasks.push(Task::new("fixed-point-vs-brute-force", params, j as f64, move |seed| {
            let s = SobolevWeight::new(fp.sobolev)?;
            let phi = mollify_measure_arg(Arc::new(nonconvex(fp.cutoff)), fp.delta, Mollifier::bump())?;
            let q = random_measure(&mut stream_rng(seed, 0, 0), 1, fp.cutoff, 0.5, 1.0);
            let lower = LowerBoundCondition { c1: fp.c1, gamma, delta: fp.delta, eta: fp.eta };
            let opts = FixedPointOptions { lower_bound: Some(lower), ..Default::default() };
            let m = fixed_point_maximizer_with(&phi, &q, fp.eps, &s, 1e-13, &opts)?;
            let bf = sup_convolve(&phi, &q, fp.eps, &s, SupConvSolver::BruteForce)?;
            let params = format!("{p2};min_density={:e};threshold={:e}", q.min_density(), lower.threshold(fp.eps, fp.sobolev, 1));
            Ok(vec![Value::new("fixed-point-vs-brute-force", params, j as f64, hs_distance(&m, &bf.maximizer, &s)?, 0.0)])
        }));
    }
    for &eps in &fp.slope_eps {
        let params = format!("eps={eps:e};cutoff={};s={};delta={};q_seed={q_seed}", fp.slope_cutoff, fp.sobolev, fp.delta);
        let (p2, fp) = (params.clone(), fp.clone());
        tasks.push(Task::new("linf-distance", params, eps, move |_| {
            let s = SobolevWeight::new(fp.sobolev)?;
            let phi = mollify_measure_arg(Arc::new(nonconvex(fp.slope_cutoff)), fp.delta, Mollifier::bump())?;
            let q = random_measure(&mut stream_rng(q_seed, 0, 0), 1, fp.slope_cutoff, 0.5, 1.0);
            let m = fixed_point_maximizer_with(&phi, &q, eps, &s, 1e-14, &FixedPointOptions::default())?;
            let linf = m.field().sub(q.field())?.to_grid(16 * fp.slope_cutoff.max(4))?.sup_norm();
            Ok(vec![Value::new("linf-distance", p2.clone(), eps, linf, 0.0)])
        }));
    }
    let mut report = ctx.run(tasks);

    if sc.samples > 0 {
        for name in BENCHMARKS {
            let col = |suffix: &str| -> Vec<f64> { rows(&report, &format!("{name}-{suffix}")).map(estimate_or_nan).collect() };
            let (gap, dist, min_gap, mono) = (col("gap-ratio"), col("distance-ratio"), col("min-gap"), col("monotonicity-defect"));
            let n = gap.len();
            let upper = Range::new(None, Some(sc.slack));
            let checks = [
                ctx.check(format!("{name}: (Φ^ε - Φ)/(2C_L²ε)"), strict_max(gap), upper, format!("{n} sampled q")),
                ctx.check(format!("{name}: Φ^ε - Φ ≥ 0"), strict_min(min_gap), Range::new(Some(-1e-9), None), format!("{n} sampled q")),
                ctx.check(format!("{name}: ‖m_ε - q‖/(2C_Lε)"), strict_max(dist), upper, format!("{n} sampled q")),
                ctx.check(format!("{name}: ε-monotonicity defect"), strict_max(mono), Range::new(None, Some(1e-9)), format!("{n} sampled q, eps {:?}", sc.eps)),
            ];
            report.checks.extend(checks);
        }
    }
    for name in BENCHMARKS {
        let err = strict_max(rows(&report, &format!("{name}-gradient")).map(estimate_or_nan));
        let c = ctx.check(format!("{name}: gradient vs finite differences"), err, Range::new(None, Some(sc.gradient_tolerance)), "relative error");
        report.checks.push(c);
    }
    if fp.instances > 0 {
        let dist = strict_max(rows(&report, "fixed-point-vs-brute-force").map(estimate_or_nan));
        let c = ctx.check("fixed point vs brute force", dist, Range::new(None, Some(fp.tolerance)), format!("{} instances, ‖·‖_(-s)", fp.instances));
        report.checks.push(c);
    }
    if !fp.slope_eps.is_empty() {
        let pts = points(&report, "linf-distance");
        fit_and_check(ctx, &mut report, "linf-distance", &pts, fp.slope);
    }
    Ok(report)
}
