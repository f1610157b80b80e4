//! Per-cell rows, fits and checks, and their CSV/JSON encodings.

use std::io::Write;
use std::path::Path;

use mfc_core::fit::RateFit;
use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellRow {
    pub experiment: String,
    pub case: String,
    pub cell: usize,
    /// `key=value` pairs joined by `;`.
    pub params: String,
    pub x: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub seed: u64,
    pub status: String,
}

impl CellRow {
    pub fn ok(&self) -> bool {
        self.status == "ok" || self.status == "approximate" || self.status == "uncertified"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitRecord {
    pub experiment: String,
    pub case: String,
    pub slope: f64,
    pub intercept: f64,
    pub stderr_slope: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

impl FitRecord {
    pub fn new(experiment: &str, case: &str, fit: &RateFit) -> Self {
        Self {
            experiment: experiment.into(),
            case: case.into(),
            slope: fit.slope,
            intercept: fit.intercept,
            stderr_slope: fit.stderr_slope,
            r_squared: fit.r_squared,
            points: fit.points.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub experiment: String,
    pub name: String,
    pub value: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub experiment: String,
    pub git_describe: String,
    pub cells: Vec<CellRow>,
    pub fits: Vec<FitRecord>,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub timings: Vec<f64>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.ok()).count()
    }

    pub fn merge(&mut self, other: Report) {
        let offset = self.cells.len();
        self.cells.extend(other.cells.into_iter().map(|mut c| {
            c.cell += offset;
            c
        }));
        self.fits.extend(other.fits);
        self.checks.extend(other.checks);
        self.timings.extend(other.timings);
    }

    pub fn write_cells(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["experiment", "case", "cell", "params", "x", "estimate", "stderr", "seed", "status"])?;
        for c in &self.cells {
            w.write_record([
                c.experiment.clone(),
                c.case.clone(),
                c.cell.to_string(),
                c.params.clone(),
                fmt(c.x),
                fmt(c.estimate),
                fmt(c.stderr),
                c.seed.to_string(),
                c.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_timings(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["experiment", "cell", "seconds"])?;
        for (c, t) in self.cells.iter().zip(&self.timings) {
            w.write_record([c.experiment.clone(), c.cell.to_string(), format!("{t:.6}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `cells.csv`, `timings.csv`, `summary.json` and `plot.py` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_cells(std::io::BufWriter::new(std::fs::File::create(dir.join("cells.csv"))?))?;
        self.write_timings(std::io::BufWriter::new(std::fs::File::create(dir.join("timings.csv"))?))?;
        let mut summary = std::io::BufWriter::new(std::fs::File::create(dir.join("summary.json"))?);
        serde_json::to_writer_pretty(&mut summary, self)?;
        summary.write_all(b"\n")?;
        std::fs::write(dir.join("plot.py"), PLOT_SCRIPT)?;
        Ok(())
    }
}

/// Shortest round-trip representation; NaN and infinities are spelled out.
fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:e}")
    }
}

pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Log-log plots of cells.csv, one panel per (experiment, case)."""
import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "cells.csv"
groups = defaultdict(list)
with open(path, newline="") as fh:
    for row in csv.DictReader(fh):
        x, y = float(row["x"]), float(row["estimate"])
        if row["status"] != "ok" or x <= 0 or y <= 0:
            continue
        groups[(row["experiment"], row["case"])].append((x, y, float(row["stderr"])))

if not groups:
    sys.exit("no positive cells to plot")
fig, axes = plt.subplots(len(groups), 1, figsize=(5, 3.5 * len(groups)), squeeze=False)
for ax, ((exp, case), pts) in zip(axes[:, 0], sorted(groups.items())):
    pts.sort()
    xs, ys, es = zip(*pts)
    ax.errorbar(xs, ys, yerr=es, fmt="o-", ms=3)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_title(f"{exp}: {case}")
fig.tight_layout()
out = path.rsplit(".", 1)[0] + ".png"
fig.savefig(out, dpi=120)
print(out)
"#;
