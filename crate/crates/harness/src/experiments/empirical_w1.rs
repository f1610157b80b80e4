use mfc_core::particle::{empirical_w1, Sampler};

use crate::config::SamplerKind;
use crate::error::Result;
use crate::report::Report;
use crate::run::{fit_and_check, points, Context, Task, Value};

fn case_name(dim: usize, sampler: SamplerKind) -> String {
    match sampler {
        SamplerKind::Uniform => format!("d{dim}-uniform"),
        SamplerKind::Gaussian => format!("d{dim}-gaussian"),
    }
}

pub fn run(ctx: &Context) -> Result<Report> {
    let budget = ctx.cfg.budget.transport_cells;
    let mut tasks = Vec::new();
    for c in &ctx.cfg.empirical_w1.cases {
        let sampler = match c.sampler {
            SamplerKind::Uniform => Sampler::UniformTorus,
            SamplerKind::Gaussian => Sampler::Gaussian { variance: c.variance },
        };
        let case = case_name(c.dim, c.sampler);
        for &n in &c.n {
            let (dim, reps, case2) = (c.dim, c.replications, case.clone());
            let params = format!("dim={dim};sampler={case};n={n};replications={reps}");
            let p2 = params.clone();
            tasks.push(Task::new(case.clone(), params, n as f64, move |seed| {
                let e = empirical_w1(dim, sampler, n, reps, seed, budget)?;
                Ok(vec![Value::new(case2.clone(), p2.clone(), n as f64, e.mean, e.stderr)])
            }));
        }
    }
    let mut report = ctx.run(tasks);
    for c in &ctx.cfg.empirical_w1.cases {
        if c.n.is_empty() {
            continue;
        }
        let case = case_name(c.dim, c.sampler);
        let pts = points(&report, &case);
        fit_and_check(ctx, &mut report, &case, &pts, c.slope);
    }
    Ok(report)
}
