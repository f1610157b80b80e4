use std::f64::consts::PI;

use mfc_core::pde::{solve_viscous_hj, FarField, HamiltonianSpec, Window};

use crate::config::{FarFieldKind, TerminalData};
use crate::error::Result;
use crate::report::Report;
use crate::run::{fit_and_check, points, Context, Task, Value};

fn terminal(data: TerminalData) -> fn(f64) -> f64 {
    match data {
        TerminalData::Kink => |x| (PI * x).sin().abs(),
        TerminalData::Smooth => |x| (1.0 + x * x).sqrt(),
    }
}

fn case_name(data: TerminalData) -> &'static str {
    match data {
        TerminalData::Kink => "lipschitz-kink",
        TerminalData::Smooth => "smooth-convex",
    }
}

/// `sup |v^ν - v^0|` over the measurement region; both solves share the grid so the
/// first-order scheme's own dissipation largely cancels.
fn viscosity_error(data: TerminalData, window: &Window, radius: f64, nu: f64, horizon: f64) -> Result<f64> {
    let h = HamiltonianSpec::quadratic(1);
    let g = terminal(data);
    let zero = |_: f64| 0.0;
    let reference = solve_viscous_hj(&h, &zero, &g, 0.0, horizon, window, None)?;
    let viscous = solve_viscous_hj(&h, &zero, &g, nu, horizon, window, None)?;
    Ok(viscous.x.iter().zip(viscous.v.iter().zip(&reference.v)).filter(|(x, _)| x.abs() < radius).map(|(_, (a, b))| (a - b).abs()).fold(0.0, f64::max))
}

pub fn run(ctx: &Context) -> Result<Report> {
    let vv = &ctx.cfg.vanishing_viscosity;
    let mut tasks = Vec::new();
    for c in &vv.cases {
        let window = Window {
            lo: c.lo,
            hi: c.hi,
            cells: c.cells,
            far_field: match c.far_field {
                FarFieldKind::Periodic => FarField::Periodic,
                FarFieldKind::Linear => FarField::LinearExtrapolation,
            },
        };
        for &nu in &vv.nu {
            let (data, radius, horizon) = (c.data, c.radius.unwrap_or(f64::INFINITY), vv.horizon);
            let params = format!("nu={nu:e};horizon={horizon};lo={};hi={};cells={};radius={radius:e}", c.lo, c.hi, c.cells);
            let p2 = params.clone();
            tasks.push(Task::new(case_name(data), params, nu, move |_| {
                let e = viscosity_error(data, &window, radius, nu, horizon)?;
                Ok(vec![Value::new(case_name(data), p2.clone(), nu, e, 0.0)])
            }));
        }
    }
    let mut report = ctx.run(tasks);
    if !vv.nu.is_empty() {
        for c in &vv.cases {
            let pts = points(&report, case_name(c.data));
            fit_and_check(ctx, &mut report, case_name(c.data), &pts, c.slope);
        }
    }
    Ok(report)
}
