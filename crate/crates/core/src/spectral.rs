//! Fourier-side representation of measures and functions on the unit torus.
//!
//! Coefficients follow `c_k = ∫ e^{+i2πk·x} f(x) dx`, so a band-limited
//! function is reconstructed as `f(x) = Σ_k c_k e^{-i2πk·x}`. Multi-indices
//! live in `[-K, K]^d`, stored row-major with axis offset `K`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Calls `f(flat_index, multi_index)` for every multi-index in `[-K, K]^dim`.
pub fn for_each_mode(dim: usize, cutoff: usize, mut f: impl FnMut(usize, &[i64])) {
    let side = 2 * cutoff + 1;
    let total = side.pow(dim as u32);
    let mut k = vec![-(cutoff as i64); dim];
    for flat in 0..total {
        f(flat, &k);
        for a in (0..dim).rev() {
            if k[a] < cutoff as i64 {
                k[a] += 1;
                break;
            }
            k[a] = -(cutoff as i64);
        }
    }
}

/// Real samples of a function on the uniform grid `j/n`, row-major in `[0,n)^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    dim: usize,
    n: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(dim: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("grid dimension must be positive".into()));
        }
        if n < 4 {
            return Err(Error::ResolutionTooLow { needed: 4, got: n });
        }
        if values.len() != n.pow(dim as u32) {
            return Err(Error::InvalidArgument(format!(
                "grid of {} values does not have {}^{} entries",
                values.len(),
                n,
                dim
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("grid values must be finite".into()));
        }
        Ok(Self { dim, n, values })
    }

    pub fn constant(dim: usize, n: usize, c: f64) -> Result<Self> {
        Self::new(dim, n, vec![c; n.pow(dim as u32)])
    }

    pub fn from_fn(dim: usize, n: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let total = n.pow(dim as u32);
        let mut x = vec![0.0; dim];
        let mut values = Vec::with_capacity(total);
        for idx in 0..total {
            let mut r = idx;
            for a in (0..dim).rev() {
                x[a] = (r % n) as f64 / n as f64;
                r /= n;
            }
            values.push(f(&x));
        }
        Self::new(dim, n, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { dim: self.dim, n: self.n, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { dim: self.dim, n: self.n, values })
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        if self.n != other.n {
            return Err(Error::InvalidArgument(format!(
                "grid resolutions differ: {} vs {}",
                self.n, other.n
            )));
        }
        Ok(())
    }
}

/// Reusable d-dimensional complex FFT on an `n^d` row-major buffer.
#[derive(Clone)]
pub struct FftNd {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftNd {
    pub fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dim,
            n,
            forward: planner.plan_fft(n, FftDirection::Forward),
            inverse: planner.plan_fft(n, FftDirection::Inverse),
        }
    }

    /// `X_k = Σ_j x_j e^{-i2πk·j/n}` (unnormalized).
    pub fn forward(&self, buf: &mut [C64]) {
        self.run(buf, &self.forward);
    }

    /// `x_j = Σ_k X_k e^{+i2πk·j/n}` (unnormalized).
    pub fn inverse(&self, buf: &mut [C64]) {
        self.run(buf, &self.inverse);
    }

    fn run(&self, buf: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        debug_assert_eq!(buf.len(), n.pow(self.dim as u32));
        let mut line = vec![C64::new(0.0, 0.0); n];
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let outer = buf.len() / (n * stride);
            for o in 0..outer {
                for i in 0..stride {
                    let base = o * n * stride + i;
                    if stride == 1 {
                        plan.process_with_scratch(&mut buf[base..base + n], &mut scratch);
                        continue;
                    }
                    for j in 0..n {
                        line[j] = buf[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for j in 0..n {
                        buf[base + j * stride] = line[j];
                    }
                }
            }
        }
    }
}

/// Band-limited signed object given by its Fourier coefficients up to cutoff K.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    dim: usize,
    cutoff: usize,
    coeffs: Vec<C64>,
}

impl SpectralField {
    pub fn zeros(dim: usize, cutoff: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { dim, cutoff, coeffs: vec![C64::new(0.0, 0.0); (2 * cutoff + 1).pow(dim as u32)] }
    }

    pub fn from_coeffs(dim: usize, cutoff: usize, coeffs: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if coeffs.len() != (2 * cutoff + 1).pow(dim as u32) {
            return Err(Error::InvalidArgument("coefficient count does not match cutoff".into()));
        }
        Ok(Self { dim, cutoff, coeffs })
    }

    pub fn from_fn(dim: usize, cutoff: usize, f: impl Fn(&[i64]) -> C64) -> Self {
        let mut out = Self::zeros(dim, cutoff);
        for_each_mode(dim, cutoff, |i, k| out.coeffs[i] = f(k));
        out
    }

    /// Coefficients of the trigonometric interpolant of `f` (trapezoidal rule).
    pub fn from_grid(f: &GridField, cutoff: usize) -> Result<Self> {
        let n = f.resolution();
        if n < 2 * cutoff + 1 {
            return Err(Error::ResolutionTooLow { needed: 2 * cutoff + 1, got: n });
        }
        let dim = f.dim();
        let mut buf: Vec<C64> = f.values().iter().map(|&v| C64::new(v, 0.0)).collect();
        FftNd::new(dim, n).inverse(&mut buf);
        let scale = 1.0 / buf.len() as f64;
        let mut out = Self::zeros(dim, cutoff);
        for_each_mode(dim, cutoff, |i, k| {
            out.coeffs[i] = buf[wrap_index(k, n)] * scale;
        });
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.dim {
            return None;
        }
        let side = 2 * self.cutoff as i64 + 1;
        let mut idx = 0i64;
        for &ki in k {
            if ki.unsigned_abs() as usize > self.cutoff {
                return None;
            }
            idx = idx * side + ki + self.cutoff as i64;
        }
        Some(idx as usize)
    }

    pub fn get(&self, k: &[i64]) -> C64 {
        self.index_of(k).map_or(C64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn set(&mut self, k: &[i64], v: C64) {
        let i = self.index_of(k).expect("mode outside cutoff");
        self.coeffs[i] = v;
    }

    pub fn zero_index(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    pub fn mean(&self) -> C64 {
        self.coeffs[self.zero_index()]
    }

    pub fn map_modes(&self, f: impl Fn(&[i64], C64) -> C64) -> Self {
        let mut out = self.clone();
        for_each_mode(self.dim, self.cutoff, |i, k| out.coeffs[i] = f(k, self.coeffs[i]));
        out
    }

    /// Explicit truncation or zero-padding to another cutoff.
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let mut out = Self::zeros(self.dim, cutoff);
        for_each_mode(self.dim, cutoff, |i, k| out.coeffs[i] = self.get(k));
        out
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        if self.cutoff != other.cutoff {
            return Err(Error::CutoffMismatch(self.cutoff, other.cutoff));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x + y * a).collect();
        Ok(Self { dim: self.dim, cutoff: self.cutoff, coeffs })
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { dim: self.dim, cutoff: self.cutoff, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        let last = self.coeffs.len() - 1;
        for (i, c) in self.coeffs.iter().enumerate() {
            worst = worst.max((c - self.coeffs[last - i].conj()).norm());
        }
        worst
    }

    pub fn symmetrize(&mut self) {
        let last = self.coeffs.len() - 1;
        for i in 0..=last / 2 {
            let avg = (self.coeffs[i] + self.coeffs[last - i].conj()) * 0.5;
            self.coeffs[i] = avg;
            self.coeffs[last - i] = avg.conj();
        }
    }

    /// Point evaluation `Σ_k c_k e^{-i2πk·x}`, real part.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let side = 2 * self.cutoff + 1;
        let k0 = self.cutoff as i64;
        let tables: Vec<Vec<C64>> = x
            .iter()
            .map(|&xa| (0..side).map(|j| C64::from_polar(1.0, -2.0 * PI * (j as i64 - k0) as f64 * xa)).collect())
            .collect();
        let mut acc = 0.0;
        for_each_mode(self.dim, self.cutoff, |i, k| {
            let mut e = C64::new(1.0, 0.0);
            for (a, &ka) in k.iter().enumerate() {
                e *= tables[a][(ka + k0) as usize];
            }
            acc += (self.coeffs[i] * e).re;
        });
        acc
    }

    /// Fast evaluation in d = 1 at many points.
    pub fn eval_many_1d(&self, xs: &[f64]) -> Vec<f64> {
        assert_eq!(self.dim, 1);
        let k0 = self.cutoff;
        xs.iter()
            .map(|&x| {
                let step = C64::from_polar(1.0, -2.0 * PI * x);
                let mut e = step;
                let mut acc = self.coeffs[k0].re;
                for k in 1..=k0 {
                    // c_k e + c_{-k} conj(e)
                    acc += (self.coeffs[k0 + k] * e + self.coeffs[k0 - k] * e.conj()).re;
                    e *= step;
                }
                acc
            })
            .collect()
    }

    /// Coefficients of the partial derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        self.map_modes(|k, c| c * C64::new(0.0, -2.0 * PI * k[axis] as f64))
    }

    pub fn laplacian(&self) -> Self {
        self.map_modes(|k, c| c * (-4.0 * PI * PI * norm2(k)))
    }

    pub fn to_grid(&self, n: usize) -> Result<GridField> {
        if n < 2 * self.cutoff + 1 {
            return Err(Error::ResolutionTooLow { needed: 2 * self.cutoff + 1, got: n });
        }
        let mut buf = vec![C64::new(0.0, 0.0); n.pow(self.dim as u32)];
        for_each_mode(self.dim, self.cutoff, |i, k| buf[wrap_index(k, n)] += self.coeffs[i]);
        FftNd::new(self.dim, n).forward(&mut buf);
        GridField::new(self.dim, n, buf.iter().map(|c| c.re).collect())
    }

    /// `∫ g dμ` for a real band-limited `g` (self) against real `μ`, over common modes.
    pub fn pairing(&self, mu: &Self) -> Result<f64> {
        if self.dim != mu.dim {
            return Err(Error::DimensionMismatch(self.dim, mu.dim));
        }
        let kc = self.cutoff.min(mu.cutoff);
        let mut acc = 0.0;
        for_each_mode(self.dim, kc, |_, k| {
            acc += (self.get(k).conj() * mu.get(k)).re;
        });
        Ok(acc)
    }

    /// Sum of absolute values of the non-constant coefficients; bounds the sup norm of the oscillation.
    pub fn oscillation_bound(&self) -> f64 {
        let z = self.zero_index();
        self.coeffs.iter().enumerate().filter(|(i, _)| *i != z).map(|(_, c)| c.norm()).sum()
    }
}

pub(crate) fn norm2(k: &[i64]) -> f64 {
    k.iter().map(|&v| (v * v) as f64).sum()
}

pub(crate) fn wrap_index(k: &[i64], n: usize) -> usize {
    let mut idx = 0usize;
    for &ka in k {
        idx = idx * n + ka.rem_euclid(n as i64) as usize;
    }
    idx
}

/// Probability measure on the torus, represented by its truncated Fourier coefficients.
/// Invariants: `c_0 = 1` exactly and Hermitian symmetry.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMeasure {
    field: SpectralField,
}

pub const DEFAULT_TOL_NEG: f64 = 1e-8;

impl AsRef<SpectralField> for SpectralField {
    fn as_ref(&self) -> &SpectralField {
        self
    }
}

impl AsRef<SpectralField> for SpectralMeasure {
    fn as_ref(&self) -> &SpectralField {
        &self.field
    }
}

impl SpectralMeasure {
    /// Accepts a field with unit mass and Hermitian symmetry (to 1e-9), then enforces both exactly.
    pub fn from_field(mut field: SpectralField) -> Result<Self> {
        let c0 = field.mean();
        if (c0 - C64::new(1.0, 0.0)).norm() > 1e-9 {
            return Err(Error::NotNormalized { mean: c0.re });
        }
        if field.hermitian_defect() > 1e-9 {
            return Err(Error::InvalidArgument("coefficients are not Hermitian".into()));
        }
        field.symmetrize();
        let z = field.zero_index();
        field.coeffs[z] = C64::new(1.0, 0.0);
        Ok(Self { field })
    }

    pub fn lebesgue(dim: usize, cutoff: usize) -> Self {
        let mut field = SpectralField::zeros(dim, cutoff);
        let z = field.zero_index();
        field.coeffs[z] = C64::new(1.0, 0.0);
        Self { field }
    }

    pub fn field(&self) -> &SpectralField {
        &self.field
    }

    pub fn into_field(self) -> SpectralField {
        self.field
    }

    pub fn dim(&self) -> usize {
        self.field.dim
    }

    pub fn cutoff(&self) -> usize {
        self.field.cutoff
    }

    pub fn coeff(&self, k: &[i64]) -> C64 {
        self.field.get(k)
    }

    /// Minimum of the reconstructed density on a `4K`-per-axis grid (at least 8).
    pub fn min_density(&self) -> f64 {
        let n = (4 * self.cutoff()).max(8);
        self.field.to_grid(n).map(|g| g.min()).unwrap_or(f64::NAN)
    }

    pub fn check_nonnegative(&self, tol_neg: f64) -> Result<()> {
        let min = self.min_density();
        if min < -tol_neg {
            return Err(Error::NegativeDensity { min, tol: tol_neg });
        }
        Ok(())
    }

    pub fn to_density(&self, resolution: usize) -> Result<GridField> {
        self.field.to_grid(resolution)
    }

    /// Explicit repair: clip the density at zero on a grid and renormalize.
    pub fn clip_and_renormalize(&self, resolution: usize) -> Result<Self> {
        let g = self.to_density(resolution)?.map(|v| v.max(0.0));
        let mean = g.mean();
        let g = g.map(|v| v / mean);
        let field = SpectralField::from_grid(&g, self.cutoff())?;
        Self::from_field(field)
    }

    /// `(1-λ)·self + λ·other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        let f = self.field.scale(1.0 - lambda).axpy(lambda, &other.field)?;
        Self::from_field(f)
    }

    /// Adds a signed zero-mass perturbation; the result keeps unit mass but may lose positivity.
    pub fn perturbed(&self, direction: &SpectralField, t: f64) -> Result<Self> {
        let mut f = self.field.axpy(t, direction)?;
        let z = f.zero_index();
        f.coeffs[z] = C64::new(1.0, 0.0);
        f.symmetrize();
        Ok(Self { field: f })
    }

    /// Multiplies each coefficient by a real symmetric kernel multiplier with unit mass.
    pub fn convolve(&self, kernel: impl Fn(&[i64]) -> f64) -> Self {
        let mut field = self.field.map_modes(|k, c| c * kernel(k));
        let z = field.zero_index();
        field.coeffs[z] = C64::new(1.0, 0.0);
        Self { field }
    }

    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        Self { field: self.field.with_cutoff(cutoff) }
    }

    /// `∫ g dm` for a grid function, trapezoidal in space (exact for band-limited data).
    pub fn integrate_grid(&self, g: &GridField) -> Result<f64> {
        let k = self.cutoff().min((g.resolution() - 1) / 2);
        SpectralField::from_grid(g, k)?.pairing(&self.field)
    }

    pub fn heat(&self, t: f64) -> Result<Self> {
        Ok(Self { field: heat_multiplier(&self.field, t)? })
    }
}

/// Forward transform of a density; requires `f ≥ -tol_neg` and unit mean.
pub fn from_density(f: &GridField, cutoff: usize, tol_neg: f64) -> Result<SpectralMeasure> {
    let min = f.min();
    if min < -tol_neg {
        return Err(Error::NegativeDensity { min, tol: tol_neg });
    }
    let mean = f.mean();
    if (mean - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { mean });
    }
    let mut field = SpectralField::from_grid(f, cutoff)?;
    field.symmetrize();
    let z = field.zero_index();
    field.coeffs[z] = C64::new(1.0, 0.0);
    Ok(SpectralMeasure { field })
}

pub fn to_density(m: &SpectralMeasure, resolution: usize) -> Result<GridField> {
    m.to_density(resolution)
}

/// Empirical measure of points given as a flat row-major list of `dim`-vectors.
pub fn empirical(points: &[f64], dim: usize, cutoff: usize) -> Result<SpectralMeasure> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::InvalidArgument("point list length is not a multiple of dim".into()));
    }
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let n = points.len() / dim;
    let side = 2 * cutoff + 1;
    let mut field = SpectralField::zeros(dim, cutoff);
    let k0 = cutoff as i64;
    let mut tables = vec![C64::new(0.0, 0.0); dim * side];
    for p in points.chunks(dim) {
        for (a, &x) in p.iter().enumerate() {
            let x = x.rem_euclid(1.0);
            let step = C64::from_polar(1.0, 2.0 * PI * x);
            let row = &mut tables[a * side..(a + 1) * side];
            row[cutoff] = C64::new(1.0, 0.0);
            let mut e = C64::new(1.0, 0.0);
            for k in 1..=cutoff {
                e *= step;
                row[cutoff + k] = e;
                row[cutoff - k] = e.conj();
            }
        }
        if dim == 1 {
            for (c, t) in field.coeffs.iter_mut().zip(&tables) {
                *c += t;
            }
        } else {
            for_each_mode(dim, cutoff, |i, k| {
                let mut e = C64::new(1.0, 0.0);
                for (a, &ka) in k.iter().enumerate() {
                    e *= tables[a * side + (ka + k0) as usize];
                }
                field.coeffs[i] += e;
            });
        }
    }
    let inv = 1.0 / n as f64;
    for c in field.coeffs.iter_mut() {
        *c *= inv;
    }
    let z = field.zero_index();
    field.coeffs[z] = C64::new(1.0, 0.0);
    field.symmetrize();
    Ok(SpectralMeasure { field })
}

/// Sobolev weight `w(k) = 1 + Σ_i |k_i|^{2s}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevWeight {
    s: f64,
}

impl SobolevWeight {
    pub fn new(s: f64) -> Result<Self> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidSobolevOrder { s, min: 0.0 });
        }
        Ok(Self { s })
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn weight(&self, k: &[i64]) -> f64 {
        // zero frequencies contribute nothing, including at s = 0
        1.0 + k.iter().filter(|&&v| v != 0).map(|&v| (v.unsigned_abs() as f64).powf(2.0 * self.s)).sum::<f64>()
    }
}

/// `⟨p,q⟩_{-s} = Σ_k p_k conj(q_k) / w(k)`.
pub fn hs_inner(p: &impl AsRef<SpectralField>, q: &impl AsRef<SpectralField>, s: &SobolevWeight) -> Result<f64> {
    let (p, q) = (p.as_ref(), q.as_ref());
    p.check_compatible(q)?;
    let mut acc = 0.0;
    for_each_mode(p.dim, p.cutoff, |i, k| {
        acc += (p.coeffs[i] * q.coeffs[i].conj()).re / s.weight(k);
    });
    Ok(acc)
}

pub fn hs_norm(q: &impl AsRef<SpectralField>, s: &SobolevWeight) -> f64 {
    hs_inner(q, q, s).expect("self-compatible").max(0.0).sqrt()
}

/// `‖p - q‖_{-s}`.
pub fn hs_distance(p: &impl AsRef<SpectralField>, q: &impl AsRef<SpectralField>, s: &SobolevWeight) -> Result<f64> {
    Ok(hs_norm(&p.as_ref().sub(q.as_ref())?, s))
}

/// Positive-order inner product `⟨f,g⟩_s = Σ_k f_k conj(g_k) w(k)`.
pub fn hs_inner_positive(f: &impl AsRef<SpectralField>, g: &impl AsRef<SpectralField>, s: &SobolevWeight) -> Result<f64> {
    let (f, g) = (f.as_ref(), g.as_ref());
    f.check_compatible(g)?;
    let mut acc = 0.0;
    for_each_mode(f.dim, f.cutoff, |i, k| {
        acc += (f.coeffs[i] * g.coeffs[i].conj()).re * s.weight(k);
    });
    Ok(acc)
}

/// Coefficients `q_k / w(k)` of the H^s representative of an H^{-s} element.
pub fn dual_coeffs(q: &impl AsRef<SpectralField>, s: &SobolevWeight) -> SpectralField {
    q.as_ref().map_modes(|k, c| c / s.weight(k))
}

/// The H^s function `q*` on a grid of the given resolution.
pub fn dual_map(q: &impl AsRef<SpectralField>, s: &SobolevWeight, resolution: usize) -> Result<GridField> {
    dual_coeffs(q, s).to_grid(resolution)
}

/// Coefficients `g_k · w(k)`: the H^{-s} element representing the H^s function `g`.
/// This is the map appearing in the sup-convolution first-order condition.
pub fn sobolev_lift(g: &impl AsRef<SpectralField>, s: &SobolevWeight) -> SpectralField {
    g.as_ref().map_modes(|k, c| c * s.weight(k))
}

/// Heat semigroup `e^{tΔ}`: multiplies mode k by `e^{-4π²|k|² t}`.
pub fn heat_multiplier(f: &SpectralField, t: f64) -> Result<SpectralField> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(f.map_modes(|k, c| c * (-4.0 * PI * PI * norm2(k) * t).exp()))
}

/// Heat semigroup applied to grid samples through the FFT.
pub fn heat_multiplier_grid(f: &GridField, t: f64) -> Result<GridField> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let (dim, n) = (f.dim(), f.resolution());
    let mut buf: Vec<C64> = f.values().iter().map(|&v| C64::new(v, 0.0)).collect();
    let fft = FftNd::new(dim, n);
    fft.inverse(&mut buf);
    apply_symbol(&mut buf, dim, n, |k| (-4.0 * PI * PI * norm2(k) * t).exp());
    fft.forward(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    GridField::new(dim, n, buf.iter().map(|c| c.re * scale).collect())
}

/// Multiplies a buffer in FFT layout by `symbol(k)` with signed frequencies.
/// The Nyquist mode of even `n` is treated as `k = -n/2`.
pub(crate) fn apply_symbol(buf: &mut [C64], dim: usize, n: usize, symbol: impl Fn(&[i64]) -> f64) {
    let mut k = vec![0i64; dim];
    for (idx, c) in buf.iter_mut().enumerate() {
        let mut r = idx;
        for a in (0..dim).rev() {
            let j = (r % n) as i64;
            k[a] = if j <= (n as i64 - 1) / 2 { j } else { j - n as i64 };
            r /= n;
        }
        *c *= symbol(&k);
    }
}

/// Signed frequency of FFT bin `j` in a length-`n` transform.
pub(crate) fn signed_freq(j: usize, n: usize) -> i64 {
    let j = j as i64;
    if j <= (n as i64 - 1) / 2 {
        j
    } else {
        j - n as i64
    }
}
