//! Regularizations of measure functionals: Fejér mollification in Fourier coordinates,
//! mollification of the measure argument, sup-convolution in H^{-s}, and the shift
//! towards Lebesgue measure.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{MeasureFunctional, SharedFunctional};
use crate::rng::{experiment_id, stream_rng};
use crate::spectral::{dual_coeffs, for_each_mode, norm2, SobolevWeight, SpectralField, SpectralMeasure, C64};

/// Fejér kernel of rank `n`: `φ̂_k = Π_j (1 - |k_j|/n)` for `|k|_∞ < n`.
#[derive(Clone, Debug)]
pub struct FejerKernel {
    dim: usize,
    rank: usize,
}

impl FejerKernel {
    pub fn new(dim: usize, rank: usize) -> Result<Self> {
        if rank < 1 {
            return Err(Error::RankTooSmall);
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(Self { dim, rank })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeff(&self, k: &[i64]) -> f64 {
        let n = self.rank as f64;
        k.iter().map(|&v| (1.0 - v.unsigned_abs() as f64 / n).max(0.0)).product()
    }

    /// The kernel as a spectral object at cutoff `n - 1` (all its nonzero modes).
    pub fn field(&self) -> SpectralField {
        SpectralField::from_fn(self.dim, self.rank - 1, |k| C64::new(self.coeff(k), 0.0))
    }
}

/// Nonzero modes with `|k|_∞ < n`, one from each `±k` pair (first nonzero entry positive).
fn half_modes(dim: usize, rank: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    if rank < 2 {
        return out;
    }
    for_each_mode(dim, rank - 1, |_, k| {
        if let Some(&first) = k.iter().find(|&&v| v != 0) {
            if first > 0 {
                out.push(k.to_vec());
            }
        }
    });
    out
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut c = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut acc = 0.0;
    while i > 0 {
        acc += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    acc
}

/// Halton point `i` (1-based to skip the origin) in `[0,1)^dim`.
pub fn halton(i: usize, bases: &[u64]) -> Vec<f64> {
    bases.iter().map(|&b| radical_inverse(i as u64, b)).collect()
}

/// Tabulated inverse CDF of the bump `exp(-1/(1-u²))` on `[-1, 1]`.
struct BumpQuantile {
    cdf: Vec<f64>,
}

impl BumpQuantile {
    const CELLS: usize = 4096;

    fn new() -> Self {
        let n = Self::CELLS;
        let mut cdf = vec![0.0; n + 1];
        for j in 0..n {
            let u = -1.0 + 2.0 * (j as f64 + 0.5) / n as f64;
            cdf[j + 1] = cdf[j] + bump(u);
        }
        let total = cdf[n];
        cdf.iter_mut().for_each(|v| *v /= total);
        Self { cdf }
    }

    fn quantile(&self, p: f64) -> f64 {
        let n = Self::CELLS;
        let j = self.cdf.partition_point(|&c| c <= p).clamp(1, n);
        let (lo, hi) = (self.cdf[j - 1], self.cdf[j]);
        let frac = if hi > lo { (p - lo) / (hi - lo) } else { 0.5 };
        -1.0 + 2.0 * ((j - 1) as f64 + frac) / n as f64
    }
}

fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// `m ↦ avg_nodes Φ((1-η)·(m*φ_n) + η·𝕀_n(a,b))`.
///
/// Nodes `(a,b)` are Halton points pushed through the product bump law on the cube of
/// half-width `r/√(2|D|)`, `r = 1/(4|D|)`, which lies inside the ball where `𝕀_n(a,b)`
/// stays a probability density.
pub struct FejerMollified {
    inner: SharedFunctional,
    kernel: FejerKernel,
    eta: f64,
    // zero-mean parts of 𝕀_n(a,b) at cutoff n-1
    nodes: Vec<SpectralField>,
    fd_step: f64,
}

pub fn fejer_mollify(phi: SharedFunctional, rank: usize, eta: f64, mc_nodes: usize) -> Result<FejerMollified> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::EtaOutOfRange(eta));
    }
    let kernel = FejerKernel::new(phi.dim(), rank)?;
    if mc_nodes == 0 {
        return Err(Error::InvalidArgument("at least one quadrature node".into()));
    }
    let modes = half_modes(phi.dim(), rank);
    let nodes = if modes.is_empty() {
        vec![SpectralField::zeros(phi.dim(), 0)]
    } else {
        let count = modes.len();
        let radius = 1.0 / (4.0 * count as f64);
        let half_width = radius / ((2 * count) as f64).sqrt();
        let bases = primes(2 * count);
        let q = BumpQuantile::new();
        (1..=mc_nodes)
            .map(|i| {
                let u = halton(i, &bases);
                let mut f = SpectralField::zeros(phi.dim(), rank - 1);
                for (j, k) in modes.iter().enumerate() {
                    let a = half_width * q.quantile(u[2 * j]);
                    let b = half_width * q.quantile(u[2 * j + 1]);
                    f.set(k, C64::new(a, b));
                    let neg: Vec<i64> = k.iter().map(|v| -v).collect();
                    f.set(&neg, C64::new(a, -b));
                }
                f
            })
            .collect()
    };
    Ok(FejerMollified { inner: phi, kernel, eta, nodes, fd_step: 1e-6 })
}

impl FejerMollified {
    pub fn kernel(&self) -> &FejerKernel {
        &self.kernel
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn work_cutoff(&self, m: &SpectralMeasure) -> usize {
        m.cutoff().max(self.kernel.rank - 1)
    }

    /// The measures averaged over, for argument `m`.
    pub fn node_measures(&self, m: &SpectralMeasure) -> Vec<SpectralMeasure> {
        let k = self.work_cutoff(m);
        let smoothed = m.with_cutoff(k).convolve(|kk| self.kernel.coeff(kk)).into_field().scale(1.0 - self.eta);
        self.nodes
            .iter()
            .map(|node| {
                let mut f = smoothed.axpy(self.eta, &node.with_cutoff(k)).expect("same shape");
                let z = f.zero_index();
                f.coeffs_mut()[z] = C64::new(1.0, 0.0);
                SpectralMeasure::from_field(f).expect("unit mass, Hermitian")
            })
            .collect()
    }

    fn finite_difference_derivative(&self, m: &SpectralMeasure) -> SpectralField {
        let mut out = SpectralField::zeros(m.dim(), m.cutoff());
        let h = self.fd_step;
        for k in half_modes(m.dim(), self.kernel.rank.min(m.cutoff() + 1)) {
            let neg: Vec<i64> = k.iter().map(|v| -v).collect();
            let mut parts = [0.0; 2];
            for (slot, dir) in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)].into_iter().enumerate() {
                let mut e = SpectralField::zeros(m.dim(), m.cutoff());
                e.set(&k, dir);
                e.set(&neg, dir.conj());
                let plus = self.evaluate(&m.perturbed(&e, h).expect("same shape"));
                let minus = self.evaluate(&m.perturbed(&e, -h).expect("same shape"));
                parts[slot] = (plus - minus) / (4.0 * h);
            }
            let c = C64::new(parts[0], parts[1]);
            out.set(&k, c);
            out.set(&neg, c.conj());
        }
        out
    }
}

impl MeasureFunctional for FejerMollified {
    fn dim(&self) -> usize {
        self.kernel.dim
    }

    fn cutoff_hint(&self) -> usize {
        self.kernel.rank - 1
    }

    fn evaluate(&self, m: &SpectralMeasure) -> f64 {
        let nodes = self.node_measures(m);
        nodes.iter().map(|p| self.inner.evaluate(p)).sum::<f64>() / nodes.len() as f64
    }

    /// Exact chain rule under the node average when the inner functional is differentiable,
    /// central differences in Fourier coordinates otherwise.
    fn flat_derivative(&self, m: &SpectralMeasure) -> Option<SpectralField> {
        let nodes = self.node_measures(m);
        let k = self.work_cutoff(m);
        let mut acc = SpectralField::zeros(m.dim(), k);
        for p in &nodes {
            match self.inner.flat_derivative(p) {
                Some(g) => acc = acc.axpy(1.0, &g.with_cutoff(k)).expect("same shape"),
                None => return Some(self.finite_difference_derivative(m)),
            }
        }
        let scale = (1.0 - self.eta) / nodes.len() as f64;
        let mut out = acc.map_modes(|kk, c| c * scale * self.kernel.coeff(kk)).with_cutoff(m.cutoff());
        let z = out.zero_index();
        out.coeffs_mut()[z] = C64::new(0.0, 0.0);
        Some(out)
    }

    fn lipschitz_d1(&self) -> Option<f64> {
        Some((1.0 - self.eta) * self.inner.lipschitz_d1()?)
    }

    fn lipschitz_hs(&self, s: &SobolevWeight) -> Option<f64> {
        Some((1.0 - self.eta) * self.inner.lipschitz_hs(s)?)
    }

    fn semiconcavity_hs(&self, s: &SobolevWeight) -> Option<f64> {
        Some((1.0 - self.eta).powi(2) * self.inner.semiconcavity_hs(s)?)
    }

    fn derivative_lipschitz_hs(&self, s: &SobolevWeight) -> Option<f64> {
        Some((1.0 - self.eta).powi(2) * self.inner.derivative_lipschitz_hs(s)?)
    }

    fn semiconvexity_hs(&self, s: &SobolevWeight) -> Option<f64> {
        Some((1.0 - self.eta).powi(2) * self.inner.semiconvexity_hs(s)?)
    }
}

/// Product mollifier `ρ(x) = Π_j ρ₁(x_j)` with `ρ₁` a symmetric unit-mass profile on `[-1, 1]`,
/// scaled as `ρ_δ(x) = δ^{-d} ρ(x/δ)` and periodized.
#[derive(Clone, Debug)]
pub struct Mollifier {
    // ρ₁ at cell midpoints of a uniform grid on [-1, 1]
    samples: Vec<f64>,
    abs_moment: f64,
    second_moment: f64,
}

impl Mollifier {
    const CELLS: usize = 4096;

    /// The normalized C^∞ bump `exp(-1/(1-x²))`.
    pub fn bump() -> Self {
        let n = Self::CELLS;
        let h = 2.0 / n as f64;
        let raw: Vec<f64> = (0..n).map(|j| bump(-1.0 + (j as f64 + 0.5) * h)).collect();
        let mass: f64 = raw.iter().sum::<f64>() * h;
        Self::from_samples(raw.iter().map(|v| v / mass).collect()).expect("bump is a valid kernel")
    }

    /// Profile given as a function on `[-1, 1]`; must be nonnegative, symmetric and of unit mass.
    pub fn from_profile(profile: impl Fn(f64) -> f64) -> Result<Self> {
        let n = Self::CELLS;
        let h = 2.0 / n as f64;
        Self::from_samples((0..n).map(|j| profile(-1.0 + (j as f64 + 0.5) * h)).collect())
    }

    fn from_samples(samples: Vec<f64>) -> Result<Self> {
        let n = samples.len();
        let h = 2.0 / n as f64;
        if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::BadKernel("profile must be finite and nonnegative".into()));
        }
        let mass: f64 = samples.iter().sum::<f64>() * h;
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::BadKernel(format!("profile has mass {mass}, expected 1")));
        }
        let asym = (0..n).map(|j| (samples[j] - samples[n - 1 - j]).abs()).fold(0.0, f64::max);
        let peak = samples.iter().cloned().fold(0.0, f64::max);
        if asym > 1e-9 * peak.max(1.0) {
            return Err(Error::BadKernel("profile must be symmetric".into()));
        }
        let x = |j: usize| -1.0 + (j as f64 + 0.5) * h;
        let abs_moment = (0..n).map(|j| x(j).abs() * samples[j]).sum::<f64>() * h;
        let second_moment = (0..n).map(|j| x(j) * x(j) * samples[j]).sum::<f64>() * h;
        Ok(Self { samples, abs_moment, second_moment })
    }

    /// `ρ̂₁(ξ) = ∫ ρ₁(x) cos(2πξx) dx`.
    pub fn transform_1d(&self, xi: f64) -> f64 {
        let n = self.samples.len();
        let h = 2.0 / n as f64;
        // midpoint rule, accurate to machine precision for smooth compactly supported profiles
        let step = C64::from_polar(1.0, 2.0 * PI * xi * h);
        let mut e = C64::from_polar(1.0, 2.0 * PI * xi * (-1.0 + 0.5 * h));
        let mut acc = 0.0;
        for v in &self.samples {
            acc += v * e.re;
            e *= step;
        }
        acc * h
    }

    /// Fourier multiplier of `ρ_δ` at mode `k`.
    pub fn multiplier(&self, delta: f64, k: &[i64]) -> f64 {
        k.iter().map(|&v| if v == 0 { 1.0 } else { self.transform_1d(delta * v as f64) }).product()
    }

    /// `Γ` with `d_1(m*ρ_δ, m) ≤ Γ·δ`: the first absolute moment in `d = 1`,
    /// `√(d·∫x²ρ₁)` (an upper bound for `∫|x|ρ`) otherwise.
    pub fn gamma(&self, dim: usize) -> f64 {
        if dim == 1 {
            self.abs_moment
        } else {
            (dim as f64 * self.second_moment).sqrt()
        }
    }
}

/// `Φ^δ(m) = Φ(m * ρ_δ)`.
pub struct MeasureMollified {
    inner: SharedFunctional,
    delta: f64,
    rho: Arc<Mollifier>,
    // ρ̂₁(δk) for k = 0..table.len()
    table: Vec<f64>,
}

pub fn mollify_measure_arg(phi: SharedFunctional, delta: f64, rho: Mollifier) -> Result<MeasureMollified> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("mollification radius must be positive, got {delta}")));
    }
    let kmax = phi.cutoff_hint().max(64);
    let table = (0..=kmax).map(|k| rho.transform_1d(delta * k as f64)).collect();
    Ok(MeasureMollified { inner: phi, delta, rho: Arc::new(rho), table })
}

impl MeasureMollified {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mollifier(&self) -> &Mollifier {
        &self.rho
    }

    pub fn multiplier(&self, k: &[i64]) -> f64 {
        k.iter()
            .map(|&v| {
                let a = v.unsigned_abs() as usize;
                if a < self.table.len() {
                    self.table[a]
                } else {
                    self.rho.transform_1d(self.delta * a as f64)
                }
            })
            .product()
    }

    pub fn smoothed(&self, m: &SpectralMeasure) -> SpectralMeasure {
        m.convolve(|k| self.multiplier(k))
    }

    /// `sup_{k≠0} w(k)·ρ̂_δ(k)² / (4π²|k|²)`, scanned over the lattice until the kernel has decayed.
    fn smoothing_gain(&self, s: &SobolevWeight) -> f64 {
        let dim = self.dim();
        let reach = ((40.0 / self.delta).ceil() as usize).max(8);
        let per_axis = {
            let cap = (2_000_000f64).powf(1.0 / dim as f64) as usize;
            reach.min(cap.max(2))
        };
        let mut best = 0.0f64;
        let mut k = vec![0i64; dim];
        let total = (per_axis + 1).pow(dim as u32);
        for idx in 1..total {
            let mut r = idx;
            for a in 0..dim {
                k[a] = (r % (per_axis + 1)) as i64;
                r /= per_axis + 1;
            }
            let rho = self.multiplier(&k);
            best = best.max(s.weight(&k) * rho * rho / (4.0 * PI * PI * norm2(&k)));
        }
        best
    }
}

impl MeasureFunctional for MeasureMollified {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn cutoff_hint(&self) -> usize {
        self.inner.cutoff_hint()
    }

    fn evaluate(&self, m: &SpectralMeasure) -> f64 {
        self.inner.evaluate(&self.smoothed(m))
    }

    fn flat_derivative(&self, m: &SpectralMeasure) -> Option<SpectralField> {
        let g = self.inner.flat_derivative(&self.smoothed(m))?;
        Some(g.with_cutoff(m.cutoff()).map_modes(|k, c| c * self.multiplier(k)))
    }

    fn ascent_direction(&self, m: &SpectralMeasure) -> Option<SpectralField> {
        let g = self.inner.ascent_direction(&self.smoothed(m))?;
        Some(g.with_cutoff(m.cutoff()).map_modes(|k, c| c * self.multiplier(k)))
    }

    fn value_and_direction(&self, m: &SpectralMeasure) -> (f64, Option<SpectralField>) {
        let (v, g) = self.inner.value_and_direction(&self.smoothed(m));
        (v, g.map(|g| g.with_cutoff(m.cutoff()).map_modes(|k, c| c * self.multiplier(k))))
    }

    fn lipschitz_d1(&self) -> Option<f64> {
        self.inner.lipschitz_d1()
    }

    /// `c₁·sup_k √(w(k)) |ρ̂_δ(k)| / (2π|k|)`; grows like `δ^{-(s-1)}` as `δ → 0`.
    fn lipschitz_hs(&self, s: &SobolevWeight) -> Option<f64> {
        let c1 = self.inner.lipschitz_d1()?;
        Some(c1 * self.smoothing_gain(s).sqrt())
    }

    // |ρ̂_δ| ≤ 1, so convolving on both sides cannot enlarge these constants
    fn semiconcavity_hs(&self, s: &SobolevWeight) -> Option<f64> {
        self.inner.semiconcavity_hs(s)
    }

    fn derivative_lipschitz_hs(&self, s: &SobolevWeight) -> Option<f64> {
        self.inner.derivative_lipschitz_hs(s)
    }

    fn semiconvexity_hs(&self, s: &SobolevWeight) -> Option<f64> {
        self.inner.semiconvexity_hs(s)
    }
}

/// `Φ^λ(m) = Φ((1-λ)m + λ·Leb)`.
pub struct LambdaShifted {
    inner: SharedFunctional,
    lambda: f64,
}

pub fn lambda_shift(phi: SharedFunctional, lambda: f64) -> Result<LambdaShifted> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    Ok(LambdaShifted { inner: phi, lambda })
}

impl LambdaShifted {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn shifted(&self, m: &SpectralMeasure) -> SpectralMeasure {
        m.mix(&SpectralMeasure::lebesgue(m.dim(), m.cutoff()), self.lambda).expect("same shape")
    }
}

impl MeasureFunctional for LambdaShifted {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn cutoff_hint(&self) -> usize {
        self.inner.cutoff_hint()
    }

    fn evaluate(&self, m: &SpectralMeasure) -> f64 {
        self.inner.evaluate(&self.shifted(m))
    }

    fn flat_derivative(&self, m: &SpectralMeasure) -> Option<SpectralField> {
        Some(self.inner.flat_derivative(&self.shifted(m))?.scale(1.0 - self.lambda))
    }

    fn ascent_direction(&self, m: &SpectralMeasure) -> Option<SpectralField> {
        Some(self.inner.ascent_direction(&self.shifted(m))?.scale(1.0 - self.lambda))
    }

    fn value_and_direction(&self, m: &SpectralMeasure) -> (f64, Option<SpectralField>) {
        let (v, g) = self.inner.value_and_direction(&self.shifted(m));
        (v, g.map(|g| g.scale(1.0 - self.lambda)))
    }

    fn lipschitz_d1(&self) -> Option<f64> {
        Some((1.0 - self.lambda) * self.inner.lipschitz_d1()?)
    }

    fn lipschitz_hs(&self, s: &SobolevWeight) -> Option<f64> {
        Some((1.0 - self.lambda) * self.inner.lipschitz_hs(s)?)
    }

    fn semiconcavity_hs(&self, s: &SobolevWeight) -> Option<f64> {
        Some((1.0 - self.lambda).powi(2) * self.inner.semiconcavity_hs(s)?)
    }

    fn derivative_lipschitz_hs(&self, s: &SobolevWeight) -> Option<f64> {
        Some((1.0 - self.lambda).powi(2) * self.inner.derivative_lipschitz_hs(s)?)
    }

    fn semiconvexity_hs(&self, s: &SobolevWeight) -> Option<f64> {
        Some((1.0 - self.lambda).powi(2) * self.inner.semiconvexity_hs(s)?)
    }
}

/// Admissible set of the sup-convolution: weights on a fixed set of atoms, read through
/// their Fourier coefficients up to `K`. The default atoms are the `(2K+1)^d` equispaced
/// points, for which the atom-to-coefficient map is a bijection and `w_j = f(x_j)/P` for
/// the band-limited density `f`.
#[derive(Clone, Debug)]
pub struct AtomSpace {
    dim: usize,
    cutoff: usize,
    atoms: usize,
    modes: usize,
    positions: Vec<f64>,
    // e^{i2πk·x_j}, mode-major
    basis: Vec<C64>,
    weight: Vec<f64>,
    zero: usize,
    bijective: bool,
    // largest eigenvalue of the Gram matrix below
    curvature: f64,
    // Gram_{jl} = Re Σ_k conj(e_kj) e_kl / w(k): Hessian of ‖μ(w)‖²_{-s}/2 in the weights
    gram: Vec<f64>,
}

impl AtomSpace {
    pub fn new(dim: usize, cutoff: usize, s: &SobolevWeight) -> Self {
        let side = 2 * cutoff + 1;
        let atoms = side.pow(dim as u32);
        let mut positions = Vec::with_capacity(atoms * dim);
        for j in 0..atoms {
            let mut x = vec![0.0; dim];
            let mut r = j;
            for a in (0..dim).rev() {
                x[a] = (r % side) as f64 / side as f64;
                r /= side;
            }
            positions.extend(x);
        }
        let mut sp = Self::build(dim, cutoff, positions, s);
        sp.bijective = true;
        sp.curvature = atoms as f64;
        sp
    }

    /// Caller-chosen atoms (row-major positions).
    pub fn with_atoms(dim: usize, cutoff: usize, positions: Vec<f64>, s: &SobolevWeight) -> Result<Self> {
        if positions.is_empty() || positions.len() % dim != 0 {
            return Err(Error::InvalidArgument("atom positions must be a nonempty multiple of the dimension".into()));
        }
        let mut sp = Self::build(dim, cutoff, positions, s);
        // power iteration on the Gram operator E^H W^{-1} E
        let mut v = vec![1.0; sp.atoms];
        let mut lambda = 0.0;
        let mut out = vec![0.0; sp.atoms];
        for _ in 0..500 {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            let mu = sp.synth_raw(&v);
            let r: Vec<C64> = mu.iter().zip(&sp.weight).map(|(m, w)| m / w).collect();
            sp.analyze(&r, &mut out);
            let next: f64 = out.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.copy_from_slice(&out);
            if (next - lambda).abs() <= 1e-12 * next.abs() {
                lambda = next;
                break;
            }
            lambda = next;
        }
        sp.curvature = lambda * 1.01;
        Ok(sp)
    }

    fn build(dim: usize, cutoff: usize, positions: Vec<f64>, s: &SobolevWeight) -> Self {
        let atoms = positions.len() / dim;
        let modes = (2 * cutoff + 1).pow(dim as u32);
        let mut basis = vec![C64::new(0.0, 0.0); modes * atoms];
        let mut weight = vec![0.0; modes];
        let mut zero = 0;
        for_each_mode(dim, cutoff, |i, k| {
            weight[i] = s.weight(k);
            if k.iter().all(|&v| v == 0) {
                zero = i;
            }
            for j in 0..atoms {
                let x = &positions[j * dim..(j + 1) * dim];
                let phase: f64 = k.iter().zip(x).map(|(&kk, &xx)| kk as f64 * xx).sum();
                basis[i * atoms + j] = C64::from_polar(1.0, 2.0 * PI * phase);
            }
        });
        let mut gram = vec![0.0; atoms * atoms];
        for i in 0..modes {
            let row = &basis[i * atoms..(i + 1) * atoms];
            for j in 0..atoms {
                let a = row[j].conj() / weight[i];
                for l in 0..atoms {
                    gram[j * atoms + l] += (a * row[l]).re;
                }
            }
        }
        Self { dim, cutoff, atoms, modes, positions, basis, weight, zero, bijective: false, curvature: 0.0, gram }
    }

    pub fn atom_count(&self) -> usize {
        self.atoms
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Atom positions, row-major.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    fn synth_raw(&self, w: &[f64]) -> Vec<C64> {
        (0..self.modes)
            .map(|i| self.basis[i * self.atoms..(i + 1) * self.atoms].iter().zip(w).map(|(e, &wj)| e * wj).sum())
            .collect()
    }

    fn synth(&self, w: &[f64]) -> Vec<C64> {
        let mut mu = self.synth_raw(w);
        mu[self.zero] = C64::new(1.0, 0.0);
        mu
    }

    // ∂/∂w_j of Re Σ_i conj(r_i) μ_i(w)
    fn analyze(&self, r: &[C64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, ri) in r.iter().enumerate() {
            let row = &self.basis[i * self.atoms..(i + 1) * self.atoms];
            let rc = ri.conj();
            for (o, e) in out.iter_mut().zip(row) {
                *o += (rc * e).re;
            }
        }
    }

    /// Atom weights of a band-limited measure (negative where its density is negative at an atom).
    /// Only meaningful for the default equispaced atoms.
    pub fn weights_of(&self, m: &SpectralField) -> Vec<f64> {
        let mu = m.with_cutoff(self.cutoff);
        self.weights_of_coeffs(mu.coeffs())
    }

    fn weights_of_coeffs(&self, mu: &[C64]) -> Vec<f64> {
        let mut w = vec![0.0; self.atoms];
        for (i, c) in mu.iter().enumerate() {
            let row = &self.basis[i * self.atoms..(i + 1) * self.atoms];
            for (wj, e) in w.iter_mut().zip(row) {
                *wj += (c * e.conj()).re;
            }
        }
        w.iter_mut().for_each(|v| *v /= self.atoms as f64);
        w
    }

    pub fn measure(&self, w: &[f64]) -> SpectralMeasure {
        self.measure_of(&self.synth(w))
    }

    fn measure_of(&self, mu: &[C64]) -> SpectralMeasure {
        let f = SpectralField::from_coeffs(self.dim, self.cutoff, mu.to_vec()).expect("shape");
        SpectralMeasure::from_field(f).expect("unit mass, Hermitian")
    }

    fn penalty(&self, mu: &[C64], q: &[C64]) -> f64 {
        mu.iter().zip(q).zip(&self.weight).map(|((a, b), w)| (a - b).norm_sqr() / w).sum()
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupConvSolver {
    GradientAscent,
    FixedPoint,
    BruteForce,
}

#[derive(Clone, Debug)]
pub struct SupConvOptions {
    pub starts: usize,
    pub max_iter: usize,
    /// Stopping tolerance on the `‖·‖_{-s}` length of an outer step (fixed-point residual for that solver).
    pub tol: f64,
    pub seed: u64,
    pub damping: f64,
    pub brute_resolution: f64,
    /// Custom atom positions (row-major); `None` selects the `(2K+1)^d` equispaced atoms.
    pub atoms: Option<Vec<f64>>,
}

impl Default for SupConvOptions {
    fn default() -> Self {
        Self { starts: 8, max_iter: 1000, tol: 1e-11, seed: 0, damping: 0.5, brute_resolution: 0.01, atoms: None }
    }
}

#[derive(Clone, Debug)]
pub struct SupConvResult {
    pub value: f64,
    pub maximizer: SpectralMeasure,
    /// `(m_ε - q)/ε`, an element of H^{-s}.
    pub gradient: SpectralField,
    pub iterations: usize,
    pub residual: f64,
}

/// `sup_m { Φ(m) - ‖q - m‖²_{-s}/(2ε) }` over the atom space at `q`'s cutoff.
pub fn sup_convolve(phi: &dyn MeasureFunctional, q: &SpectralMeasure, eps: f64, s: &SobolevWeight, solver: SupConvSolver) -> Result<SupConvResult> {
    sup_convolve_with(phi, q, eps, s, solver, &SupConvOptions::default())
}

pub fn sup_convolve_with(
    phi: &dyn MeasureFunctional,
    q: &SpectralMeasure,
    eps: f64,
    s: &SobolevWeight,
    solver: SupConvSolver,
    opts: &SupConvOptions,
) -> Result<SupConvResult> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if q.dim() != phi.dim() {
        return Err(Error::DimensionMismatch(phi.dim(), q.dim()));
    }
    let space = match &opts.atoms {
        Some(p) => AtomSpace::with_atoms(q.dim(), q.cutoff(), p.clone(), s)?,
        None => AtomSpace::new(q.dim(), q.cutoff(), s),
    };
    let problem = Problem { phi, space: &space, q: q.field().coeffs(), eps };
    let (w, value, iterations, residual) = match solver {
        SupConvSolver::GradientAscent => problem.multistart(s, opts)?,
        SupConvSolver::BruteForce => problem.brute_force(opts)?,
        SupConvSolver::FixedPoint => {
            if !space.bijective {
                return Err(Error::InvalidArgument("the fixed-point solver needs the default equispaced atoms".into()));
            }
            let fp = fixed_point_iterate(phi, q, eps, s, opts.tol, opts.damping, opts.max_iter)?;
            let w = space.weights_of(fp.measure.field());
            let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
            if min < -1e-12 {
                return Err(Error::LowerBoundViolated { min_density: min * space.atoms as f64, threshold: 0.0 });
            }
            let w: Vec<f64> = w.iter().map(|v| v.max(0.0)).collect();
            let value = problem.objective(&space.synth(&w));
            (w, value, fp.iterations, fp.residual)
        }
    };
    let maximizer = space.measure(&w);
    let gradient = maximizer.field().sub(q.field())?.scale(1.0 / eps);
    Ok(SupConvResult { value, maximizer, gradient, iterations, residual })
}

struct Problem<'a> {
    phi: &'a dyn MeasureFunctional,
    space: &'a AtomSpace,
    q: &'a [C64],
    eps: f64,
}

impl Problem<'_> {
    fn objective(&self, mu: &[C64]) -> f64 {
        self.phi.evaluate(&self.space.measure_of(mu)) - self.space.penalty(mu, self.q) / (2.0 * self.eps)
    }

    fn value_and_direction(&self, mu: &[C64]) -> Result<(f64, Vec<C64>)> {
        let m = self.space.measure_of(mu);
        let (v, g) = self.phi.value_and_direction(&m);
        let g = g.ok_or(Error::NoDerivative)?;
        let value = v - self.space.penalty(mu, self.q) / (2.0 * self.eps);
        Ok((value, g.with_cutoff(self.space.cutoff).coeffs().to_vec()))
    }

    /// Exact maximizer over the simplex of `⟨g,μ⟩ - ‖μ-q‖²/(2ε) - (c/2)‖μ-μ_k‖²`.
    fn proximal_step(&self, g: &[C64], mu_k: &[C64], w_k: &[f64], c: f64) -> Vec<f64> {
        let sp = self.space;
        let (eps, denom) = (self.eps, 1.0 + self.eps * c);
        let target: Vec<C64> = (0..sp.modes)
            .map(|i| (g[i] * (eps * sp.weight[i]) + self.q[i] + mu_k[i] * (eps * c)) / denom)
            .collect();
        let w = if sp.bijective {
            let w = sp.weights_of_coeffs(&target);
            if w.iter().all(|&v| v >= 0.0) {
                return w;
            }
            w
        } else {
            w_k.to_vec()
        };
        // constrained case: FISTA with gradient restart on the concave quadratic
        let lip = (1.0 / eps + c) * sp.curvature;
        let grad_at = |w: &[f64], out: &mut [f64]| {
            let mu = sp.synth(w);
            let r: Vec<C64> = (0..sp.modes)
                .map(|i| g[i] + (self.q[i] - mu[i]) / (eps * sp.weight[i]) + (mu_k[i] - mu[i]) * (c / sp.weight[i]))
                .collect();
            sp.analyze(&r, out);
        };
        let mut x = project_simplex(&w);
        if w_k.iter().all(|v| v.is_finite()) {
            // start from whichever of the two candidates is closer to the unconstrained optimum
            let d = |a: &[f64]| a.iter().zip(&w).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
            if d(w_k) < d(&x) {
                x = w_k.to_vec();
            }
        }
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut grad = vec![0.0; sp.atoms];
        for it in 0..20_000 {
            grad_at(&y, &mut grad);
            let step: Vec<f64> = y.iter().zip(&grad).map(|(a, b)| a + b / lip).collect();
            let x_new = project_simplex(&step);
            let restart: f64 = y.iter().zip(&x_new).zip(&x).map(|((yy, xn), xo)| (yy - xn) * (xn - xo)).sum();
            let t_new = if restart > 0.0 { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
            let beta = if restart > 0.0 { 0.0 } else { (t - 1.0) / t_new };
            y = x_new.iter().zip(&x).map(|(xn, xo)| xn + beta * (xn - xo)).collect();
            x = x_new;
            t = t_new;
            if it % 20 == 19 {
                grad_at(&x, &mut grad);
                let scale = grad.iter().fold(1.0f64, |a, v| a.max(v.abs()));
                let best = grad.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let avg: f64 = grad.iter().zip(&x).map(|(a, b)| a * b).sum();
                // Frank-Wolfe gap bounds the suboptimality of x; enough to identify the support
                if best - avg <= 1e-10 * scale {
                    break;
                }
            }
        }
        // b = gradient at w = 0 of the linear part, H = (1/ε + c)·Gram
        let mut b = vec![0.0; sp.atoms];
        let r0: Vec<C64> = (0..sp.modes).map(|i| g[i] + (self.q[i] / eps + mu_k[i] * c) / sp.weight[i]).collect();
        sp.analyze(&r0, &mut b);
        let h = 1.0 / eps + c;
        polish_active_set(&sp.gram, h, &b, &x).unwrap_or(x)
    }

    /// Minorize-maximize ascent from `w0`. Each step maximizes the lower model
    /// `Φ(m_k) + ⟨g_k, m-m_k⟩ - (c/2)‖m-m_k‖²` minus the penalty, which never decreases the objective.
    fn ascend(&self, w0: Vec<f64>, c0: f64, opts: &SupConvOptions) -> Result<(Vec<f64>, f64, usize, f64)> {
        let sp = self.space;
        let mut w = w0;
        let mut mu = sp.synth(&w);
        let (mut value, mut g) = self.value_and_direction(&mu)?;
        let mut c = c0;
        let mut residual = f64::INFINITY;
        for it in 1..=opts.max_iter {
            let w_new = self.proximal_step(&g, &mu, &w, c);
            let mu_new = sp.synth(&w_new);
            let (value_new, g_new) = self.value_and_direction(&mu_new)?;
            let step = sp.penalty(&mu_new, &mu).sqrt();
            if value_new < value - 1e-13 * (1.0 + value.abs()) {
                // lower model was not a minorant: stiffen it
                c = if c > 0.0 { 2.0 * c } else { 1.0 / self.eps };
                continue;
            }
            residual = step;
            w = w_new;
            mu = mu_new;
            value = value_new;
            g = g_new;
            if step <= opts.tol {
                return Ok((w, value, it, residual));
            }
        }
        Err(Error::NonConvergence { iterations: opts.max_iter, residual })
    }

    fn multistart(&self, s: &SobolevWeight, opts: &SupConvOptions) -> Result<(Vec<f64>, f64, usize, f64)> {
        let sp = self.space;
        let c = self.phi.semiconvexity_hs(s).unwrap_or(0.0).max(0.0);
        let uniform = vec![1.0 / sp.atoms as f64; sp.atoms];
        let q_w = if sp.bijective { project_simplex(&sp.weights_of_coeffs(self.q)) } else { uniform.clone() };
        let starts: Vec<Vec<f64>> = (0..opts.starts.max(1))
            .map(|i| match i {
                0 => q_w.clone(),
                1 => uniform.clone(),
                _ => {
                    let mut rng = stream_rng(opts.seed, experiment_id("sup-convolution start"), i as u64);
                    let e: Vec<f64> = (0..sp.atoms).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                    let total: f64 = e.iter().sum();
                    e.iter().map(|v| v / total).collect()
                }
            })
            .collect();
        let runs: Vec<Result<(Vec<f64>, f64, usize, f64)>> =
            starts.into_par_iter().map(|w0| self.ascend(w0, c, opts)).collect();
        let mut best: Option<(Vec<f64>, f64, usize, f64)> = None;
        let mut total_iters = 0;
        let mut first_err = None;
        for r in runs {
            match r {
                Ok(run) => {
                    total_iters += run.2;
                    if best.as_ref().map_or(true, |b| run.1 > b.1) {
                        best = Some(run);
                    }
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        match best {
            Some((w, v, _, res)) => Ok((w, v, total_iters, res)),
            None => Err(first_err.expect("at least one start")),
        }
    }

    /// Exhaustive simplex grid at the given resolution, then pairwise mass-transfer pattern search.
    fn brute_force(&self, opts: &SupConvOptions) -> Result<(Vec<f64>, f64, usize, f64)> {
        let sp = self.space;
        if sp.atoms > 5 {
            return Err(Error::InvalidArgument(format!("brute force is limited to 5 atoms, got {}", sp.atoms)));
        }
        let steps = (1.0 / opts.brute_resolution).round() as usize;
        if steps == 0 {
            return Err(Error::InvalidArgument("brute-force resolution must be below 1".into()));
        }
        let mut counts = vec![0usize; sp.atoms];
        let mut best_w = vec![1.0 / sp.atoms as f64; sp.atoms];
        let mut best = f64::NEG_INFINITY;
        let mut evaluations = 0usize;
        let mut w = vec![0.0; sp.atoms];
        enumerate_compositions(&mut counts, 0, steps, &mut |c| {
            for (wj, &cj) in w.iter_mut().zip(c) {
                *wj = cj as f64 / steps as f64;
            }
            let v = self.objective(&sp.synth(&w));
            evaluations += 1;
            if v > best {
                best = v;
                best_w.copy_from_slice(&w);
            }
        });
        let mut h = opts.brute_resolution;
        while h > 1e-13 {
            let mut improved = false;
            for i in 0..sp.atoms {
                for j in 0..sp.atoms {
                    if i == j || best_w[j] <= 0.0 {
                        continue;
                    }
                    let t = h.min(best_w[j]);
                    let mut cand = best_w.clone();
                    cand[i] += t;
                    cand[j] -= t;
                    let v = self.objective(&sp.synth(&cand));
                    evaluations += 1;
                    if v > best {
                        best = v;
                        best_w = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        Ok((best_w, best, evaluations, h))
    }
}

/// Primal active-set refinement of `max b·w - (h/2) wᵀ G w` over the simplex, starting
/// from the support of `x`. Returns `None` if the working set does not settle.
fn polish_active_set(gram: &[f64], h: f64, b: &[f64], x: &[f64]) -> Option<Vec<f64>> {
    let p = b.len();
    let mut support: Vec<bool> = x.iter().map(|&v| v > 1e-12).collect();
    for _ in 0..4 * p + 4 {
        let idx: Vec<usize> = (0..p).filter(|&j| support[j]).collect();
        let n = idx.len();
        if n == 0 {
            return None;
        }
        // [hG_SS 1; 1ᵀ 0] [w; ν] = [b_S; 1]
        let mut a = vec![0.0; (n + 1) * (n + 1)];
        let mut rhs = vec![0.0; n + 1];
        for (r, &j) in idx.iter().enumerate() {
            for (cc, &l) in idx.iter().enumerate() {
                a[r * (n + 1) + cc] = h * gram[j * p + l];
            }
            a[r * (n + 1) + n] = 1.0;
            a[n * (n + 1) + r] = 1.0;
            rhs[r] = b[j];
        }
        rhs[n] = 1.0;
        let sol = solve_dense(&mut a, &mut rhs, n + 1)?;
        let mut w = vec![0.0; p];
        for (r, &j) in idx.iter().enumerate() {
            w[j] = sol[r];
        }
        let nu = sol[n];
        if let Some((worst, _)) = idx.iter().map(|&j| (j, w[j])).filter(|(_, v)| *v < 0.0).min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()) {
            support[worst] = false;
            continue;
        }
        let grad: Vec<f64> = (0..p).map(|j| b[j] - h * (0..p).map(|l| gram[j * p + l] * w[l]).sum::<f64>()).collect();
        let scale = grad.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        match (0..p).filter(|&j| !support[j]).max_by(|&i, &j| grad[i].partial_cmp(&grad[j]).unwrap()) {
            Some(j) if grad[j] - nu > 1e-12 * scale => support[j] = true,
            _ => return Some(w),
        }
    }
    None
}

// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap())?;
        if a[piv * n + col].abs() <= 1e-14 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r * n + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    Some(x)
}

fn enumerate_compositions(counts: &mut Vec<usize>, idx: usize, remaining: usize, f: &mut impl FnMut(&[usize])) {
    if idx + 1 == counts.len() {
        counts[idx] = remaining;
        f(counts);
        return;
    }
    for c in 0..=remaining {
        counts[idx] = c;
        enumerate_compositions(counts, idx + 1, remaining - c, f);
    }
}

/// Density threshold `c₁·γ·ε / δ^{2s + d/2 + η - 1}` below which the fixed-point
/// characterization of the maximizer is not guaranteed. `γ` is supplied by the caller.
#[derive(Clone, Copy, Debug)]
pub struct LowerBoundCondition {
    pub c1: f64,
    pub gamma: f64,
    pub delta: f64,
    pub eta: f64,
}

impl LowerBoundCondition {
    pub fn threshold(&self, eps: f64, s: f64, dim: usize) -> f64 {
        self.c1 * self.gamma * eps / self.delta.powf(2.0 * s + dim as f64 / 2.0 + self.eta - 1.0)
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointOptions {
    pub damping: f64,
    pub max_iter: usize,
    pub lower_bound: Option<LowerBoundCondition>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { damping: 0.5, max_iter: 10_000, lower_bound: None }
    }
}

struct FixedPointRun {
    measure: SpectralMeasure,
    iterations: usize,
    residual: f64,
}

fn fixed_point_iterate(
    phi: &dyn MeasureFunctional,
    q: &SpectralMeasure,
    eps: f64,
    s: &SobolevWeight,
    tol: f64,
    damping: f64,
    max_iter: usize,
) -> Result<FixedPointRun> {
    if let Some(l) = phi.derivative_lipschitz_hs(s) {
        if eps * l >= 1.0 {
            return Err(Error::ContractionViolated { eps, limit: 1.0 / l });
        }
    }
    // image of the map T: m ↦ q + ε·(δΦ/δm(m))*, and the residual ‖m - T(m)‖_{-s}
    let apply = |m: &SpectralMeasure| -> Result<(SpectralField, f64)> {
        let g = phi.flat_derivative(m).ok_or(Error::NoDerivative)?;
        let image = q.field().axpy(eps, &crate::spectral::sobolev_lift(&g.with_cutoff(q.cutoff()), s))?;
        let residual = crate::spectral::hs_norm(&m.field().sub(&image)?, s);
        Ok((image, residual))
    };
    let mut m = q.clone();
    let (mut image, mut residual) = apply(&m)?;
    for it in 0..max_iter {
        if residual <= tol {
            return Ok(FixedPointRun { measure: m, iterations: it, residual });
        }
        // the undamped step is kept when it beats the contraction the damped step guarantees
        let full = SpectralMeasure::from_field(image.clone())?;
        let (full_image, full_residual) = apply(&full)?;
        if full_residual <= (1.0 - damping) * residual {
            m = full;
            image = full_image;
            residual = full_residual;
            continue;
        }
        m = SpectralMeasure::from_field(m.field().scale(1.0 - damping).axpy(damping, &image)?)?;
        (image, residual) = apply(&m)?;
    }
    if residual <= tol {
        return Ok(FixedPointRun { measure: m, iterations: max_iter, residual });
    }
    Err(Error::NonConvergence { iterations: max_iter, residual })
}

/// Solves `m - q = ε·(δΦ/δm(m))*` by fixed-point iteration, damped whenever the full step stalls.
pub fn fixed_point_maximizer(phi: &dyn MeasureFunctional, q: &SpectralMeasure, eps: f64, s: &SobolevWeight, tol: f64) -> Result<SpectralMeasure> {
    fixed_point_maximizer_with(phi, q, eps, s, tol, &FixedPointOptions::default())
}

pub fn fixed_point_maximizer_with(
    phi: &dyn MeasureFunctional,
    q: &SpectralMeasure,
    eps: f64,
    s: &SobolevWeight,
    tol: f64,
    opts: &FixedPointOptions,
) -> Result<SpectralMeasure> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if let Some(lb) = &opts.lower_bound {
        let threshold = lb.threshold(eps, s.order(), q.dim());
        let min_density = q.min_density();
        if min_density < threshold {
            return Err(Error::LowerBoundViolated { min_density, threshold });
        }
    }
    Ok(fixed_point_iterate(phi, q, eps, s, tol, opts.damping, opts.max_iter)?.measure)
}

/// `q ↦ sup_m { Φ(m) - ‖q - m‖²_{-s}/(2ε) }` as a functional.
pub struct SupConvolved {
    inner: SharedFunctional,
    eps: f64,
    s: SobolevWeight,
    solver: SupConvSolver,
    opts: SupConvOptions,
}

impl SupConvolved {
    pub fn new(inner: SharedFunctional, eps: f64, s: SobolevWeight, solver: SupConvSolver, opts: SupConvOptions) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
        }
        Ok(Self { inner, eps, s, solver, opts })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn solve(&self, q: &SpectralMeasure) -> Result<SupConvResult> {
        sup_convolve_with(self.inner.as_ref(), q, self.eps, &self.s, self.solver, &self.opts)
    }
}

impl MeasureFunctional for SupConvolved {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn cutoff_hint(&self) -> usize {
        self.inner.cutoff_hint()
    }

    fn evaluate(&self, q: &SpectralMeasure) -> f64 {
        self.solve(q).map(|r| r.value).unwrap_or(f64::NAN)
    }

    /// `dual_coeffs((m_ε - q)/ε)`: pairing it with a perturbation gives `⟨(m_ε - q)/ε, ·⟩_{-s}`.
    fn flat_derivative(&self, q: &SpectralMeasure) -> Option<SpectralField> {
        let r = self.solve(q).ok()?;
        let mut g = dual_coeffs(&r.gradient, &self.s);
        let z = g.zero_index();
        g.coeffs_mut()[z] = C64::new(0.0, 0.0);
        Some(g)
    }

    fn lipschitz_d1(&self) -> Option<f64> {
        None
    }

    fn lipschitz_hs(&self, s: &SobolevWeight) -> Option<f64> {
        if s.order() == self.s.order() {
            self.inner.lipschitz_hs(s)
        } else {
            None
        }
    }

    fn semiconvexity_hs(&self, s: &SobolevWeight) -> Option<f64> {
        (s.order() == self.s.order()).then(|| 1.0 / self.eps)
    }

    fn derivative_lipschitz_hs(&self, _s: &SobolevWeight) -> Option<f64> {
        None
    }
}

/// Measure-argument mollification, then sup-convolution, then the shift towards Lebesgue measure.
pub fn regularize_pipeline(
    phi: SharedFunctional,
    delta: f64,
    rho: Mollifier,
    eps: f64,
    lambda: f64,
    s: SobolevWeight,
    solver: SupConvSolver,
    opts: SupConvOptions,
) -> Result<LambdaShifted> {
    let mollified: SharedFunctional = Arc::new(mollify_measure_arg(phi, delta, rho)?);
    let convolved: SharedFunctional = Arc::new(SupConvolved::new(mollified, eps, s, solver, opts)?);
    lambda_shift(convolved, lambda)
}
