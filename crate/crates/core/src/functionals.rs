//! Measure functionals with flat derivatives under the zero-space-mean normalization,
//! their finite-dimensional projections, and derivative identities of the projections.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{random_measure, stream_rng};
use crate::spectral::{empirical, for_each_mode, hs_distance, norm2, SobolevWeight, SpectralField, SpectralMeasure, C64};
use crate::transport::{circle_transport, w1_circle, w1_discrete, w1_line, CircleMeasure, Metric, PointCloud};

/// An evaluable functional on probability measures of the torus.
///
/// `flat_derivative` returns the coefficients (at the argument's cutoff) of
/// `y ↦ δΦ/δm(m, y)` with zero constant mode.
pub trait MeasureFunctional: Send + Sync {
    fn dim(&self) -> usize;

    /// Smallest cutoff at which the functional's dependence on the measure is fully resolved.
    fn cutoff_hint(&self) -> usize;

    fn evaluate(&self, m: &SpectralMeasure) -> f64;

    fn flat_derivative(&self, _m: &SpectralMeasure) -> Option<SpectralField> {
        None
    }

    /// Local derivative used by ascent solvers; defaults to the flat derivative.
    fn ascent_direction(&self, m: &SpectralMeasure) -> Option<SpectralField> {
        self.flat_derivative(m)
    }

    /// `(Φ(m), ascent_direction(m))` in one pass, for functionals that share the work.
    fn value_and_direction(&self, m: &SpectralMeasure) -> (f64, Option<SpectralField>) {
        (self.evaluate(m), self.ascent_direction(m))
    }

    /// `Φ(m_x^N)` for points given row-major.
    fn project(&self, points: &[f64]) -> f64 {
        let m = empirical(points, self.dim(), self.cutoff_hint()).expect("nonempty point set");
        self.evaluate(&m)
    }

    fn lipschitz_d1(&self) -> Option<f64> {
        None
    }

    fn lipschitz_hs(&self, _s: &SobolevWeight) -> Option<f64> {
        None
    }

    /// Semi-concavity constant with respect to `‖·‖_{-s}`.
    fn semiconcavity_hs(&self, _s: &SobolevWeight) -> Option<f64> {
        None
    }

    /// Lipschitz constant of `m ↦ lift(δΦ/δm(m))` in `‖·‖_{-s}`.
    fn derivative_lipschitz_hs(&self, s: &SobolevWeight) -> Option<f64> {
        self.semiconcavity_hs(s)
    }

    /// `c ≥ 0` with `Φ(m') ≥ Φ(m) + ⟨δΦ/δm(m), m'-m⟩ - (c/2)‖m'-m‖²_{-s}`, i.e. `Φ + (c/2)‖·‖²` convex.
    fn semiconvexity_hs(&self, s: &SobolevWeight) -> Option<f64> {
        self.derivative_lipschitz_hs(s)
    }

    /// Bound on `|tr R^{N,i}|` for the projection's second-order correction.
    fn residual_bound(&self) -> Option<f64> {
        None
    }
}

impl<T: MeasureFunctional + ?Sized> MeasureFunctional for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn cutoff_hint(&self) -> usize {
        (**self).cutoff_hint()
    }
    fn evaluate(&self, m: &SpectralMeasure) -> f64 {
        (**self).evaluate(m)
    }
    fn flat_derivative(&self, m: &SpectralMeasure) -> Option<SpectralField> {
        (**self).flat_derivative(m)
    }
    fn ascent_direction(&self, m: &SpectralMeasure) -> Option<SpectralField> {
        (**self).ascent_direction(m)
    }
    fn value_and_direction(&self, m: &SpectralMeasure) -> (f64, Option<SpectralField>) {
        (**self).value_and_direction(m)
    }
    fn project(&self, points: &[f64]) -> f64 {
        (**self).project(points)
    }
    fn lipschitz_d1(&self) -> Option<f64> {
        (**self).lipschitz_d1()
    }
    fn lipschitz_hs(&self, s: &SobolevWeight) -> Option<f64> {
        (**self).lipschitz_hs(s)
    }
    fn semiconcavity_hs(&self, s: &SobolevWeight) -> Option<f64> {
        (**self).semiconcavity_hs(s)
    }
    fn derivative_lipschitz_hs(&self, s: &SobolevWeight) -> Option<f64> {
        (**self).derivative_lipschitz_hs(s)
    }
    fn semiconvexity_hs(&self, s: &SobolevWeight) -> Option<f64> {
        (**self).semiconvexity_hs(s)
    }
    fn residual_bound(&self) -> Option<f64> {
        (**self).residual_bound()
    }
}

pub type SharedFunctional = Arc<dyn MeasureFunctional>;

#[derive(Clone, Debug)]
pub struct ConstantFunctional {
    pub dim: usize,
    pub value: f64,
}

impl MeasureFunctional for ConstantFunctional {
    fn dim(&self) -> usize {
        self.dim
    }
    fn cutoff_hint(&self) -> usize {
        0
    }
    fn evaluate(&self, _m: &SpectralMeasure) -> f64 {
        self.value
    }
    fn flat_derivative(&self, m: &SpectralMeasure) -> Option<SpectralField> {
        Some(SpectralField::zeros(m.dim(), m.cutoff()))
    }
    fn project(&self, _points: &[f64]) -> f64 {
        self.value
    }
    fn lipschitz_d1(&self) -> Option<f64> {
        Some(0.0)
    }
    fn lipschitz_hs(&self, _s: &SobolevWeight) -> Option<f64> {
        Some(0.0)
    }
    fn semiconcavity_hs(&self, _s: &SobolevWeight) -> Option<f64> {
        Some(0.0)
    }
    fn semiconvexity_hs(&self, _s: &SobolevWeight) -> Option<f64> {
        Some(0.0)
    }
    fn residual_bound(&self) -> Option<f64> {
        Some(0.0)
    }
}

type VecFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Outer map `G: ℝ^k → ℝ` of a cylindrical functional, with optional global bounds.
#[derive(Clone)]
pub struct OuterMap {
    value: Arc<VecFn>,
    gradient: Arc<GradFn>,
    gradient_bound: Option<f64>,
    hessian_bound: Option<f64>,
    hessian_upper: Option<f64>,
    hessian_lower: Option<f64>,
}

impl OuterMap {
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { value: Arc::new(value), gradient: Arc::new(gradient), gradient_bound: None, hessian_bound: None, hessian_upper: None, hessian_lower: None }
    }

    /// Bound on the Euclidean norm of `∇G` over the reachable range.
    pub fn with_gradient_bound(mut self, b: f64) -> Self {
        self.gradient_bound = Some(b);
        self
    }

    /// Bound on the operator norm of `D²G`.
    pub fn with_hessian_bound(mut self, b: f64) -> Self {
        self.hessian_bound = Some(b);
        self
    }

    /// One-sided bound `D²G ≤ u·I`; defaults to the operator-norm bound.
    pub fn with_hessian_upper(mut self, u: f64) -> Self {
        self.hessian_upper = Some(u);
        self
    }

    /// One-sided bound `D²G ≥ -l·I`; defaults to the operator-norm bound.
    pub fn with_hessian_lower(mut self, l: f64) -> Self {
        self.hessian_lower = Some(l);
        self
    }

    fn upper(&self) -> Option<f64> {
        self.hessian_upper.or(self.hessian_bound)
    }

    fn lower(&self) -> Option<f64> {
        self.hessian_lower.or(self.hessian_bound)
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        (self.value)(y)
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        (self.gradient)(y)
    }
}

/// `Φ(m) = G(m(φ_1), …, m(φ_k))` with band-limited real test functions.
#[derive(Clone)]
pub struct CylindricalFunctional {
    tests: Vec<SpectralField>,
    outer: OuterMap,
}

impl CylindricalFunctional {
    pub fn new(tests: Vec<SpectralField>, outer: OuterMap) -> Result<Self> {
        let first = tests.first().ok_or_else(|| Error::InvalidArgument("at least one test function".into()))?;
        let dim = first.dim();
        for t in &tests {
            if t.dim() != dim {
                return Err(Error::DimensionMismatch(dim, t.dim()));
            }
            if t.hermitian_defect() > 1e-12 {
                return Err(Error::InvalidArgument("test functions must be real".into()));
            }
        }
        Ok(Self { tests, outer })
    }

    /// `m ↦ m(φ)`.
    pub fn linear(phi: SpectralField) -> Result<Self> {
        Self::new(vec![phi], OuterMap::new(|y| y[0], |_| vec![1.0]).with_gradient_bound(1.0).with_hessian_bound(0.0))
    }

    /// `m ↦ c·m(φ)²`.
    pub fn square(phi: SpectralField, c: f64) -> Result<Self> {
        let range = phi.coeffs().iter().map(|z| z.norm()).sum::<f64>();
        Self::new(
            vec![phi],
            OuterMap::new(move |y| c * y[0] * y[0], move |y| vec![2.0 * c * y[0]])
                .with_gradient_bound(2.0 * c.abs() * range)
                .with_hessian_bound(2.0 * c.abs())
                .with_hessian_upper(2.0 * c.max(0.0))
                .with_hessian_lower(2.0 * (-c).max(0.0)),
        )
    }

    pub fn tests(&self) -> &[SpectralField] {
        &self.tests
    }

    pub fn outer(&self) -> &OuterMap {
        &self.outer
    }

    pub fn moments(&self, m: &SpectralMeasure) -> Vec<f64> {
        self.tests.iter().map(|t| t.pairing(m.field()).expect("dimension checked")).collect()
    }

    fn sobolev_norms2(&self, s: &SobolevWeight) -> f64 {
        self.tests
            .iter()
            .map(|t| {
                let mut acc = 0.0;
                for_each_mode(t.dim(), t.cutoff(), |i, k| {
                    if k.iter().any(|&v| v != 0) {
                        acc += t.coeffs()[i].norm_sqr() * s.weight(k);
                    }
                });
                acc
            })
            .sum()
    }

    fn gradient_sup2(&self) -> f64 {
        self.tests.iter().map(|t| gradient_sup_bound(t).powi(2)).sum()
    }
}

/// `Σ_k |c_k| 2π|k|`: bounds the sup norm of the gradient of a trigonometric polynomial.
pub fn gradient_sup_bound(f: &SpectralField) -> f64 {
    let mut acc = 0.0;
    for_each_mode(f.dim(), f.cutoff(), |i, k| acc += f.coeffs()[i].norm() * 2.0 * PI * norm2(k).sqrt());
    acc
}

impl MeasureFunctional for CylindricalFunctional {
    fn dim(&self) -> usize {
        self.tests[0].dim()
    }

    fn cutoff_hint(&self) -> usize {
        self.tests.iter().map(|t| t.cutoff()).max().unwrap_or(0)
    }

    fn evaluate(&self, m: &SpectralMeasure) -> f64 {
        self.outer.value(&self.moments(m))
    }

    fn flat_derivative(&self, m: &SpectralMeasure) -> Option<SpectralField> {
        let grad = self.outer.gradient(&self.moments(m));
        let mut out = SpectralField::zeros(m.dim(), m.cutoff());
        for (g, t) in grad.iter().zip(&self.tests) {
            out = out.axpy(*g, &t.with_cutoff(m.cutoff())).expect("same shape");
        }
        let z = out.zero_index();
        out.coeffs_mut()[z] = C64::new(0.0, 0.0);
        Some(out)
    }

    fn project(&self, points: &[f64]) -> f64 {
        let d = self.dim();
        let n = (points.len() / d) as f64;
        let y: Vec<f64> = self
            .tests
            .iter()
            .map(|t| {
                if d == 1 {
                    t.eval_many_1d(points).iter().sum::<f64>() / n
                } else {
                    points.chunks(d).map(|x| t.eval(x)).sum::<f64>() / n
                }
            })
            .collect();
        self.outer.value(&y)
    }

    fn lipschitz_d1(&self) -> Option<f64> {
        let g = self.outer.gradient_bound?;
        Some(g * self.gradient_sup2().sqrt())
    }

    fn lipschitz_hs(&self, s: &SobolevWeight) -> Option<f64> {
        let g = self.outer.gradient_bound?;
        Some(g * self.sobolev_norms2(s).sqrt())
    }

    fn semiconcavity_hs(&self, s: &SobolevWeight) -> Option<f64> {
        Some(self.outer.upper()?.max(0.0) * self.sobolev_norms2(s))
    }

    fn derivative_lipschitz_hs(&self, s: &SobolevWeight) -> Option<f64> {
        let h = self.outer.hessian_bound?;
        Some(h * self.sobolev_norms2(s))
    }

    fn semiconvexity_hs(&self, s: &SobolevWeight) -> Option<f64> {
        Some(self.outer.lower()?.max(0.0) * self.sobolev_norms2(s))
    }

    fn residual_bound(&self) -> Option<f64> {
        Some(self.outer.hessian_bound? * self.gradient_sup2())
    }
}

/// Target of a distance-cost functional.
#[derive(Clone, Debug)]
pub enum DistanceTarget {
    Spectral(SpectralMeasure),
    Cloud(PointCloud),
}

/// `Φ(m) = d_1(m, target)`; not differentiable, so it exposes no flat derivative.
#[derive(Clone, Debug)]
pub struct DistanceCostFunctional {
    target: DistanceTarget,
    metric: Metric,
    cutoff: usize,
}

impl DistanceCostFunctional {
    /// Distance on the circle; `cutoff` is the working cutoff of the arguments.
    pub fn torus(target: DistanceTarget, cutoff: usize) -> Result<Self> {
        let dim = match &target {
            DistanceTarget::Spectral(m) => m.dim(),
            DistanceTarget::Cloud(c) => c.dim(),
        };
        if dim != 1 {
            return Err(Error::DimensionUnsupported(dim));
        }
        Ok(Self { target, metric: Metric::Torus, cutoff })
    }

    /// Distance on ℝ^d to a point-cloud target; only evaluable on point configurations.
    pub fn euclidean(target: PointCloud) -> Self {
        Self { target: DistanceTarget::Cloud(target), metric: Metric::Euclidean, cutoff: 0 }
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    fn target_circle(&self) -> CircleMeasure<'_> {
        match &self.target {
            DistanceTarget::Spectral(m) => CircleMeasure::Spectral(m.field()),
            DistanceTarget::Cloud(c) => CircleMeasure::Atoms { positions: c.points(), weights: c.weights() },
        }
    }
}

impl MeasureFunctional for DistanceCostFunctional {
    fn dim(&self) -> usize {
        match &self.target {
            DistanceTarget::Spectral(m) => m.dim(),
            DistanceTarget::Cloud(c) => c.dim(),
        }
    }

    fn cutoff_hint(&self) -> usize {
        self.cutoff
    }

    fn evaluate(&self, m: &SpectralMeasure) -> f64 {
        assert!(self.metric == Metric::Torus, "euclidean distance cost is evaluated on point configurations only");
        w1_circle(CircleMeasure::Spectral(m.field()), self.target_circle()).expect("one-dimensional inputs")
    }

    fn ascent_direction(&self, m: &SpectralMeasure) -> Option<SpectralField> {
        if self.metric != Metric::Torus {
            return None;
        }
        let tr = circle_transport(CircleMeasure::Spectral(m.field()), self.target_circle()).ok()?;
        Some(tr.potential(m.cutoff()))
    }

    fn value_and_direction(&self, m: &SpectralMeasure) -> (f64, Option<SpectralField>) {
        if self.metric != Metric::Torus {
            return (f64::NAN, None);
        }
        match circle_transport(CircleMeasure::Spectral(m.field()), self.target_circle()) {
            Ok(tr) => (tr.distance, Some(tr.potential(m.cutoff()))),
            Err(_) => (f64::NAN, None),
        }
    }

    fn project(&self, points: &[f64]) -> f64 {
        let cloud = PointCloud::uniform(self.dim(), points.to_vec()).expect("nonempty point set");
        match (&self.target, self.metric) {
            (_, Metric::Torus) => w1_circle(CircleMeasure::Atoms { positions: cloud.points(), weights: cloud.weights() }, self.target_circle())
                .expect("one-dimensional inputs"),
            (DistanceTarget::Cloud(t), Metric::Euclidean) if t.dim() == 1 => w1_line(&cloud, t).expect("1d"),
            (DistanceTarget::Cloud(t), Metric::Euclidean) => w1_discrete(&cloud, t, Metric::Euclidean).expect("within budget"),
            (DistanceTarget::Spectral(_), Metric::Euclidean) => unreachable!("euclidean targets are clouds"),
        }
    }

    fn lipschitz_d1(&self) -> Option<f64> {
        Some(1.0)
    }

    // the distance to a fixed target is convex in m
    fn semiconvexity_hs(&self, _s: &SobolevWeight) -> Option<f64> {
        Some(0.0)
    }

    /// For zero-mass μ band-limited at K, `|∫g dμ| ≤ ‖g'‖_{L²} max_{0<|k|≤K} sqrt(w(k)/(4π²k²)) ‖μ‖_{-s}`.
    fn lipschitz_hs(&self, s: &SobolevWeight) -> Option<f64> {
        if self.metric != Metric::Torus {
            return None;
        }
        let best = (1..=self.cutoff.max(1) as i64)
            .map(|k| s.weight(&[k]) / (4.0 * PI * PI * (k * k) as f64))
            .fold(0.0, f64::max);
        Some(best.sqrt())
    }
}

/// `D_mΦ(m, ·)`, one spectral field per axis.
pub fn intrinsic_gradient(phi: &dyn MeasureFunctional, m: &SpectralMeasure) -> Result<Vec<SpectralField>> {
    let g = phi.flat_derivative(m).ok_or(Error::NoDerivative)?;
    Ok((0..m.dim()).map(|a| g.derivative(a)).collect())
}

/// `Φ^N(x) = Φ(m_x^N)`.
pub fn project(phi: &dyn MeasureFunctional, points: &[f64]) -> f64 {
    phi.project(points)
}

#[derive(Clone, Debug)]
pub struct GradientCheck {
    pub finite_difference: Vec<f64>,
    pub analytic: Vec<f64>,
    pub discrepancy: f64,
}

/// Compares central differences of `Φ^N` in `x^i` with `(1/N) D_mΦ(m_x^N, x^i)`.
pub fn projection_gradient_check(phi: &dyn MeasureFunctional, points: &[f64], i: usize, step: f64) -> Result<GradientCheck> {
    let d = phi.dim();
    let n = points.len() / d;
    if i >= n {
        return Err(Error::InvalidArgument(format!("particle index {i} out of range")));
    }
    check_step(points, step)?;
    let m = empirical(points, d, phi.cutoff_hint())?;
    let grads = intrinsic_gradient(phi, &m)?;
    let xi = &points[i * d..(i + 1) * d];
    let analytic: Vec<f64> = grads.iter().map(|g| g.eval(xi) / n as f64).collect();
    let mut fd = Vec::with_capacity(d);
    let mut work = points.to_vec();
    for a in 0..d {
        work[i * d + a] = points[i * d + a] + step;
        let plus = phi.project(&work);
        work[i * d + a] = points[i * d + a] - step;
        let minus = phi.project(&work);
        work[i * d + a] = points[i * d + a];
        fd.push((plus - minus) / (2.0 * step));
    }
    let discrepancy = fd.iter().zip(&analytic).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(GradientCheck { finite_difference: fd, analytic, discrepancy })
}

fn check_step(points: &[f64], step: f64) -> Result<()> {
    let scale = points.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if !(step > 0.0) || scale + step == scale || step < 1e-7 * scale {
        return Err(Error::StepUnderflow(step));
    }
    Ok(())
}

/// Second-order projection correction at particle `i`.
#[derive(Clone, Debug)]
pub struct LaplacianResidual {
    /// `Δ_{x^i}Φ^N - (1/N) tr D_yD_mΦ(m_x^N, x^i)`.
    pub raw: f64,
    /// `N²·|raw|`, the estimate of `|tr R^{N,i}|`.
    pub scaled: f64,
}

/// Central-difference Laplacian of `Φ^N` in `x^i` minus `(1/N) tr D_yD_mΦ(m_x^N, x^i)`, scaled by `N²`.
pub fn laplacian_residual(phi: &dyn MeasureFunctional, points: &[f64], i: usize, step: f64) -> Result<LaplacianResidual> {
    let d = phi.dim();
    let n = points.len() / d;
    if i >= n {
        return Err(Error::InvalidArgument(format!("particle index {i} out of range")));
    }
    check_step(points, step)?;
    let m = empirical(points, d, phi.cutoff_hint())?;
    let g = phi.flat_derivative(&m).ok_or(Error::NoDerivative)?;
    let xi = &points[i * d..(i + 1) * d];
    let analytic = g.laplacian().eval(xi) / n as f64;
    let center = phi.project(points);
    let mut work = points.to_vec();
    let mut lap = 0.0;
    for a in 0..d {
        work[i * d + a] = points[i * d + a] + step;
        let plus = phi.project(&work);
        work[i * d + a] = points[i * d + a] - step;
        let minus = phi.project(&work);
        work[i * d + a] = points[i * d + a];
        lap += (plus - 2.0 * center + minus) / (step * step);
    }
    let raw = lap - analytic;
    Ok(LaplacianResidual { raw, scaled: (n * n) as f64 * raw.abs() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SemiconcavityMetric {
    D1,
    Hs(SobolevWeight),
}

/// Smallest `C` with `Φ((1-λ)m₀+λm₁) ≥ (1-λ)Φ(m₀)+λΦ(m₁) - (C/2)λ(1-λ)dist²` on the given triples.
pub fn semiconcavity_constant(
    phi: &dyn MeasureFunctional,
    metric: SemiconcavityMetric,
    triples: &[(SpectralMeasure, SpectralMeasure, f64)],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for (m0, m1, lambda) in triples {
        let ml = m0.mix(m1, *lambda)?;
        let gap = (1.0 - lambda) * phi.evaluate(m0) + lambda * phi.evaluate(m1) - phi.evaluate(&ml);
        let dist = match metric {
            SemiconcavityMetric::D1 => w1_circle(CircleMeasure::Spectral(m0.field()), CircleMeasure::Spectral(m1.field()))?,
            SemiconcavityMetric::Hs(s) => hs_distance(m0, m1, &s)?,
        };
        if dist > 0.0 {
            worst = worst.max(2.0 * gap / (lambda * (1.0 - lambda) * dist * dist));
        }
    }
    Ok(worst)
}

/// Samples `trials` random (m₀, m₁, λ) triples at the functional's cutoff and fits the constant.
pub fn check_semiconcavity(phi: &dyn MeasureFunctional, metric: SemiconcavityMetric, trials: usize, seed: u64) -> Result<f64> {
    let k = phi.cutoff_hint().max(1);
    let mut rng = stream_rng(seed, 0x5e11, 0);
    let triples: Vec<_> = (0..trials)
        .map(|_| {
            let m0 = random_measure(&mut rng, phi.dim(), k, 0.9, 1.0);
            let m1 = random_measure(&mut rng, phi.dim(), k, 0.9, 1.0);
            let lambda = rng.random_range(0.05..0.95);
            (m0, m1, lambda)
        })
        .collect();
    semiconcavity_constant(phi, metric, &triples)
}
