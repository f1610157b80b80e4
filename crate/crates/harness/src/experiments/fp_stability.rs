use std::f64::consts::PI;

use mfc_core::pde::{solve_fokker_planck, TimeSeries, VectorField};
use mfc_core::rng::{random_measure, random_trig, stream_rng};
use mfc_core::spectral::{hs_distance, hs_inner_positive, SobolevWeight};

use crate::config::{FpStability, Range};
use crate::error::Result;
use crate::report::Report;
use crate::run::{estimate_or_nan, rows, strict_max, Context, Task, Value};

/// `sup_t ‖m¹_t - m²_t‖_{-s} / ‖m¹_0 - m²_0‖_{-s}` under one random drift.
fn amplification(f: &FpStability, seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, 0, 0);
    let a = random_trig(&mut rng, 1, f.drift_cutoff, 1.0);
    let norm = hs_inner_positive(&a, &a, &SobolevWeight::new(f.sobolev - 1.0)?)?.sqrt();
    let base = a.scale(f.drift_norm / norm).to_grid(f.resolution)?;
    // the time profile lies in [0, 1], so the H^{s-1} norm never exceeds drift_norm
    let samples = 40;
    let times: Vec<f64> = (0..=samples).map(|j| f.horizon * j as f64 / samples as f64).collect();
    let values: Vec<VectorField> = times.iter().map(|t| {
        let w = 0.5 * (1.0 + (2.0 * PI * t / f.horizon).sin());
        vec![base.map(|v| v * w)]
    }).collect();
    let alpha = TimeSeries::new(times, values)?;
    let m1 = random_measure(&mut rng, 1, f.measure_cutoff, 0.9, f.measure_decay);
    let m2 = random_measure(&mut rng, 1, f.measure_cutoff, 0.9, f.measure_decay);
    let s = SobolevWeight::new(f.sobolev)?;
    let a1 = solve_fokker_planck(&alpha, &m1, 0.0, f.horizon, f.steps)?;
    let a2 = solve_fokker_planck(&alpha, &m2, 0.0, f.horizon, f.steps)?;
    let d0 = hs_distance(&m1, &m2, &s)?;
    let mut sup = 0.0f64;
    for (x, y) in a1.values.iter().zip(&a2.values) {
        sup = sup.max(hs_distance(x, y, &s)?);
    }
    Ok(sup / d0)
}

pub fn run(ctx: &Context) -> Result<Report> {
    let f = ctx.cfg.fp_stability.clone();
    let mut tasks = Vec::new();
    for j in 0..f.drifts {
        let params = format!(
            "drift={j};norm={};drift_cutoff={};measure_cutoff={};measure_decay={};s={};horizon={};resolution={};steps={}",
            f.drift_norm, f.drift_cutoff, f.measure_cutoff, f.measure_decay, f.sobolev, f.horizon, f.resolution, f.steps
        );
        let (p2, f) = (params.clone(), f.clone());
        tasks.push(Task::new("ratio", params, j as f64, move |seed| Ok(vec![Value::new("ratio", p2.clone(), j as f64, amplification(&f, seed)?, 0.0)])));
    }
    let mut report = ctx.run(tasks);
    if f.drifts == 0 || f.fit == 0 {
        return Ok(report);
    }
    let v: Vec<f64> = rows(&report, "ratio").map(estimate_or_nan).collect();
    let c_prime = strict_max(v[..f.fit].iter().copied());
    let worst = strict_max(v.iter().copied());
    let within = v.iter().filter(|r| **r <= c_prime).count();
    let detail = format!("C' = {c_prime:.6} from {} drifts; {within}/{} within C'", f.fit, v.len());
    report.checks.push(ctx.check("max ratio / C'", worst / c_prime, Range::new(None, Some(f.outlier_factor)), detail));
    Ok(report)
}
