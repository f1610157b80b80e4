//! Experiment configuration. Every section defaults to the acceptance settings, so an
//! empty file is a valid config; unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Label written into every report; the subcommand name when absent.
    pub experiment: Option<String>,
    pub seed: u64,
    pub output: PathBuf,
    pub budget: Budget,
    pub empirical_w1: EmpiricalW1,
    pub vanishing_viscosity: VanishingViscosity,
    pub cole_hopf: ColeHopf,
    pub coupon: Coupon,
    pub supconv: SupConv,
    pub fixed_point: FixedPoint,
    pub mfc_gap: MfcGap,
    pub project: Project,
    pub mfc_regularity: MfcRegularity,
    pub fp_stability: FpStability,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 20_240_601,
            output: PathBuf::from("results"),
            budget: Budget::default(),
            empirical_w1: EmpiricalW1::default(),
            vanishing_viscosity: VanishingViscosity::default(),
            cole_hopf: ColeHopf::default(),
            coupon: Coupon::default(),
            supconv: SupConv::default(),
            fixed_point: FixedPoint::default(),
            mfc_gap: MfcGap::default(),
            project: Project::default(),
            mfc_regularity: MfcRegularity::default(),
            fp_stability: FpStability::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    /// Largest `n·m` cost matrix handed to an exact transport solver.
    pub transport_cells: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self { transport_cells: mfc_core::transport::DEFAULT_LP_BUDGET }
    }
}

/// Inclusive acceptance window; an absent side is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Range {
    pub fn new(min: Option<f64>, max: Option<f64>) -> Self {
        Self { min, max }
    }

    pub fn around(center: f64, tol: f64) -> Self {
        Self::new(Some(center - tol), Some(center + tol))
    }

    pub fn contains(&self, v: f64) -> bool {
        v.is_finite() && self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Uniform,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct W1Case {
    pub dim: usize,
    pub sampler: SamplerKind,
    #[serde(default = "unit")]
    pub variance: f64,
    pub n: Vec<usize>,
    pub replications: usize,
    pub slope: Range,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmpiricalW1 {
    pub cases: Vec<W1Case>,
}

impl Default for EmpiricalW1 {
    fn default() -> Self {
        Self {
            cases: vec![
                W1Case {
                    dim: 1,
                    sampler: SamplerKind::Uniform,
                    variance: 1.0,
                    n: (4..=12).map(|j| 1usize << j).collect(),
                    replications: 200,
                    slope: Range::new(Some(-0.57), Some(-0.43)),
                },
                W1Case {
                    dim: 3,
                    sampler: SamplerKind::Uniform,
                    variance: 1.0,
                    n: (5..=10).map(|j| 1usize << j).collect(),
                    replications: 50,
                    slope: Range::around(-1.0 / 3.0, 0.08),
                },
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalData {
    /// `|sin πx|` on the periodic unit window.
    Kink,
    /// `√(1 + x²)` on a window of the line.
    Smooth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FarFieldKind {
    Periodic,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViscosityCase {
    pub data: TerminalData,
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
    pub far_field: FarFieldKind,
    /// Errors are measured on `|x| < radius`; the whole window when absent.
    #[serde(default)]
    pub radius: Option<f64>,
    pub slope: Range,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VanishingViscosity {
    pub horizon: f64,
    pub nu: Vec<f64>,
    pub cases: Vec<ViscosityCase>,
}

impl Default for VanishingViscosity {
    fn default() -> Self {
        Self {
            horizon: 0.5,
            nu: (0..5).map(|j| 10f64.powf(-1.0 - 0.5 * j as f64)).collect(),
            cases: vec![
                ViscosityCase {
                    data: TerminalData::Kink,
                    lo: 0.0,
                    hi: 1.0,
                    cells: 1000,
                    far_field: FarFieldKind::Periodic,
                    radius: None,
                    slope: Range::new(Some(0.45), Some(1.05)),
                },
                ViscosityCase {
                    data: TerminalData::Smooth,
                    lo: -4.0,
                    hi: 4.0,
                    cells: 8000,
                    far_field: FarFieldKind::Linear,
                    radius: Some(1.5),
                    slope: Range::new(Some(0.85), None),
                },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColeHopf {
    pub dim: usize,
    pub horizon: f64,
    pub n: Vec<usize>,
    pub replications: usize,
    /// Reference cells per axis; the library default when absent.
    pub per_axis: Option<usize>,
    /// Entropic fallback when the exact problem exceeds the transport budget.
    pub approx_eps: Option<f64>,
    pub slope: Range,
}

impl Default for ColeHopf {
    fn default() -> Self {
        Self {
            dim: 2,
            horizon: 1.0,
            n: vec![16, 64, 256, 1024],
            replications: 200,
            per_axis: None,
            approx_eps: Some(0.02),
            slope: Range::new(Some(-0.65), None),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Coupon {
    pub n: Vec<usize>,
    pub trials: usize,
    pub p: f64,
    /// Tolerance on the occupied fraction against `1 - (1 - 1/N)^N`.
    pub fraction_tolerance: f64,
    /// Upper bound on the slope of `log P[B_{p,N}]` against `N`.
    pub max_log_slope: f64,
}

impl Default for Coupon {
    fn default() -> Self {
        Self { n: vec![100, 1000, 10_000], trials: 2000, p: 0.05, fraction_tolerance: 0.01, max_log_slope: -1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupConv {
    pub cutoff: usize,
    pub sobolev: f64,
    pub eps: Vec<f64>,
    /// Sampled `q` per benchmark.
    pub samples: usize,
    /// Multiplicative slack on the analytic bounds.
    pub slack: f64,
    pub gradient_eps: f64,
    pub gradient_step: f64,
    pub gradient_tolerance: f64,
}

impl Default for SupConv {
    fn default() -> Self {
        Self {
            cutoff: 8,
            sobolev: 2.0,
            eps: vec![0.002, 0.005, 0.01],
            samples: 100,
            slack: 1.05,
            gradient_eps: 0.01,
            gradient_step: 1e-4,
            gradient_tolerance: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPoint {
    pub instances: usize,
    /// Atom count is `2·cutoff + 1`; brute force needs at most 5.
    pub cutoff: usize,
    pub sobolev: f64,
    pub delta: f64,
    pub eps: f64,
    /// Constants of the density lower-bound precondition.
    pub c1: f64,
    pub eta: f64,
    pub tolerance: f64,
    /// Cutoff and scales of the `L^∞`-distance fit.
    pub slope_cutoff: usize,
    pub slope_eps: Vec<f64>,
    pub slope: Range,
}

impl Default for FixedPoint {
    fn default() -> Self {
        Self {
            instances: 20,
            cutoff: 2,
            sobolev: 2.0,
            delta: 0.1,
            eps: 0.005,
            c1: 0.05,
            eta: 0.1,
            tolerance: 1e-6,
            slope_cutoff: 4,
            slope_eps: (0..5).map(|i| 0.004 / 2f64.powi(i)).collect(),
            slope: Range::around(1.0, 0.2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfcGap {
    pub horizon: f64,
    pub n: Vec<usize>,
    pub replications: usize,
    pub resolution: usize,
    pub steps: usize,
    /// Allowed excursion of the gap below zero, in standard errors.
    pub sigmas: f64,
    pub slope: Range,
}

impl Default for MfcGap {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            n: (3..=8).map(|j| 1usize << j).collect(),
            replications: 400,
            resolution: 32,
            steps: 100,
            sigmas: 3.0,
            slope: Range::new(None, Some(-0.4)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Project {
    pub n: Vec<usize>,
    pub step: f64,
    /// The scaled residual must stay below `bound_factor` times the analytic bound.
    pub bound_factor: f64,
    pub slope: Range,
}

impl Default for Project {
    fn default() -> Self {
        Self { n: (2..=8).map(|j| 1usize << j).collect(), step: 1e-4, bound_factor: 1.2, slope: Range::around(-2.0, 0.2) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfcRegularity {
    pub horizon: f64,
    /// Pairs in the first fit; the second fit doubles them.
    pub pairs: usize,
    pub cutoff: usize,
    pub resolution: usize,
    pub steps: usize,
    pub tol: f64,
    pub sobolev: f64,
    /// Largest relative change of a fitted constant when the sample doubles.
    pub stability: f64,
}

impl Default for MfcRegularity {
    fn default() -> Self {
        Self { horizon: 0.5, pairs: 100, cutoff: 2, resolution: 32, steps: 100, tol: 1e-9, sobolev: 2.0, stability: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpStability {
    pub drifts: usize,
    /// Drifts used to fit `C'`; the rest are held out.
    pub fit: usize,
    /// `‖α‖_{H^{s-1}}` of every drift.
    pub drift_norm: f64,
    pub drift_cutoff: usize,
    pub measure_cutoff: usize,
    /// Mode amplitudes of the initial measures decay like `|k|^{-measure_decay}`.
    pub measure_decay: f64,
    pub sobolev: f64,
    pub horizon: f64,
    pub resolution: usize,
    pub steps: usize,
    pub outlier_factor: f64,
}

impl Default for FpStability {
    fn default() -> Self {
        Self {
            drifts: 50,
            fit: 25,
            drift_norm: 2.0,
            drift_cutoff: 4,
            measure_cutoff: 8,
            measure_decay: 1.0,
            sobolev: 2.0,
            horizon: 1.0,
            resolution: 64,
            steps: 200,
            outlier_factor: 1.5,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `.json` files are read as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }

    /// Section of the first NaN or infinite number, range bounds included.
    fn non_finite_field(&self) -> Option<&'static str> {
        let range = |r: &Range| [r.min, r.max].into_iter().flatten().collect::<Vec<_>>();
        let mut sections: Vec<(&'static str, Vec<f64>)> = Vec::new();
        for c in &self.empirical_w1.cases {
            sections.push(("empirical_w1", [vec![c.variance], range(&c.slope)].concat()));
        }
        let vv = &self.vanishing_viscosity;
        sections.push(("vanishing_viscosity", [vec![vv.horizon], vv.nu.clone()].concat()));
        for c in &vv.cases {
            sections.push(("vanishing_viscosity", [vec![c.lo, c.hi], c.radius.into_iter().collect(), range(&c.slope)].concat()));
        }
        let ch = &self.cole_hopf;
        sections.push(("cole_hopf", [vec![ch.horizon], ch.approx_eps.into_iter().collect(), range(&ch.slope)].concat()));
        let cp = &self.coupon;
        sections.push(("coupon", vec![cp.p, cp.fraction_tolerance, cp.max_log_slope]));
        let sc = &self.supconv;
        sections.push(("supconv", [vec![sc.sobolev, sc.slack, sc.gradient_eps, sc.gradient_step, sc.gradient_tolerance], sc.eps.clone()].concat()));
        let fp = &self.fixed_point;
        sections.push(("fixed_point", [vec![fp.sobolev, fp.delta, fp.eps, fp.c1, fp.eta, fp.tolerance], fp.slope_eps.clone(), range(&fp.slope)].concat()));
        let g = &self.mfc_gap;
        sections.push(("mfc_gap", [vec![g.horizon, g.sigmas], range(&g.slope)].concat()));
        let p = &self.project;
        sections.push(("project", [vec![p.step, p.bound_factor], range(&p.slope)].concat()));
        let r = &self.mfc_regularity;
        sections.push(("mfc_regularity", vec![r.horizon, r.tol, r.sobolev, r.stability]));
        let f = &self.fp_stability;
        sections.push(("fp_stability", vec![f.drift_norm, f.measure_decay, f.sobolev, f.horizon, f.outlier_factor]));
        sections.into_iter().find(|(_, v)| v.iter().any(|x| !x.is_finite())).map(|(name, _)| name)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let all_positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if let Some(name) = self.non_finite_field() {
            return bad(format!("{name}: every number must be finite"));
        }
        for c in &self.empirical_w1.cases {
            if c.dim == 0 || c.replications < 2 || c.n.contains(&0) {
                return bad("empirical_w1: need dim ≥ 1, replications ≥ 2 and N ≥ 1".into());
            }
            if c.sampler == SamplerKind::Gaussian && !(c.variance > 0.0) {
                return bad("empirical_w1: Gaussian variance must be positive".into());
            }
        }
        let vv = &self.vanishing_viscosity;
        if !(vv.horizon > 0.0) || !all_positive(&vv.nu) {
            return bad("vanishing_viscosity: horizon and every nu must be positive".into());
        }
        for c in &vv.cases {
            if !(c.hi > c.lo) || c.cells < 4 || c.radius.is_some_and(|r| !(r > 0.0)) {
                return bad("vanishing_viscosity: need hi > lo, cells ≥ 4, radius > 0".into());
            }
        }
        let ch = &self.cole_hopf;
        if ch.dim == 0 || ch.replications < 2 || ch.n.contains(&0) || !(ch.horizon > 0.0) {
            return bad("cole_hopf: need dim ≥ 1, replications ≥ 2, N ≥ 1, horizon > 0".into());
        }
        let cp = &self.coupon;
        if cp.trials < 2 || cp.n.contains(&0) || !(cp.p > 0.0 && cp.p < 1.0) {
            return bad("coupon: need trials ≥ 2, N ≥ 1, p in (0,1)".into());
        }
        let sc = &self.supconv;
        if !all_positive(&sc.eps) || !(sc.gradient_eps > 0.0) || !(sc.gradient_step > 0.0) || !(sc.sobolev > 0.0) {
            return bad("supconv: eps, step and s must be positive".into());
        }
        let fp = &self.fixed_point;
        if fp.cutoff == 0 || 2 * fp.cutoff + 1 > 5 {
            return bad("fixed_point: the brute-force oracle needs cutoff 1 or 2".into());
        }
        if !(fp.delta > 0.0) || !(fp.eps > 0.0) || !all_positive(&fp.slope_eps) || fp.slope_cutoff == 0 {
            return bad("fixed_point: delta, eps and slope_eps must be positive".into());
        }
        let g = &self.mfc_gap;
        if g.n.contains(&0) || g.replications < 2 || g.resolution < 4 || g.steps == 0 || !(g.horizon > 0.0) {
            return bad("mfc_gap: need N ≥ 1, replications ≥ 2, resolution ≥ 4, steps ≥ 1".into());
        }
        if self.project.n.iter().any(|&n| n < 2) || !(self.project.step > 0.0) {
            return bad("project: need N ≥ 2 and a positive step".into());
        }
        let r = &self.mfc_regularity;
        if r.cutoff == 0 || r.resolution < 4 || r.steps == 0 || !(r.horizon > 0.0) {
            return bad("mfc_regularity: need cutoff ≥ 1, resolution ≥ 4, steps ≥ 1".into());
        }
        let f = &self.fp_stability;
        if f.fit > f.drifts || f.drift_cutoff == 0 || f.resolution < 4 || f.steps == 0 || !(f.horizon > 0.0) || !(f.sobolev >= 1.0) {
            return bad("fp_stability: need fit ≤ drifts, cutoffs ≥ 1, resolution ≥ 4, s ≥ 1".into());
        }
        Ok(())
    }
}
