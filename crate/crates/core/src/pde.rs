//! PDE solvers on the torus for the mean field control optimality system, the
//! N-particle HJB at tiny N, and whole-line viscous Hamilton-Jacobi equations.
//!
//! Periodic equations are integrated with fourth-order exponential time
//! differencing (ETDRK4). The heat part is applied exactly per mode and the
//! transport or Hamiltonian part is explicit.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functionals::{MeasureFunctional, SharedFunctional};
use crate::spectral::{signed_freq, wrap_index, FftNd, GridField, SobolevWeight, SpectralField, SpectralMeasure, C64};

/// Explicit periodic terms must satisfy `dt · max|speed|² ≤ CFL`.
///
/// With the heat part integrated exactly, forward Euler on `i2πk·c` damped by
/// `e^{-4π²k²dt}` is stable for `dt ≤ 2/c²` at every mode; the grid spacing
/// does not enter. Reaction rates `r` add `dt · r ≤ CFL`.
pub const CFL: f64 = 1.0;

/// Values sampled at ascending times.
#[derive(Clone, Debug)]
pub struct TimeSeries<T> {
    pub times: Vec<f64>,
    pub values: Vec<T>,
}

impl<T> TimeSeries<T> {
    pub fn new(times: Vec<f64>, values: Vec<T>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidArgument("time series needs matching nonempty times and values".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    /// A series valid at every time.
    pub fn constant(value: T) -> Self {
        Self { times: vec![0.0], values: vec![value] }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> &T {
        &self.values[0]
    }

    pub fn last(&self) -> &T {
        self.values.last().expect("nonempty")
    }
}

pub trait Interpolate: Clone {
    /// `(1-w)·self + w·other`.
    fn lerp(&self, other: &Self, w: f64) -> Self;
}

impl Interpolate for GridField {
    fn lerp(&self, other: &Self, w: f64) -> Self {
        self.zip_with(other, |a, b| (1.0 - w) * a + w * b).expect("series entries share a grid")
    }
}

impl Interpolate for Vec<GridField> {
    fn lerp(&self, other: &Self, w: f64) -> Self {
        self.iter().zip(other).map(|(a, b)| a.lerp(b, w)).collect()
    }
}

impl<T: Interpolate> TimeSeries<T> {
    /// Piecewise-linear in time, constant outside the sampled range.
    pub fn at(&self, t: f64) -> T {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1].clone();
        }
        let j = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[j]) / (self.times[j + 1] - self.times[j]);
        if w == 0.0 {
            return self.values[j].clone();
        }
        self.values[j].lerp(&self.values[j + 1], w)
    }
}

/// One grid field per axis.
pub type VectorField = Vec<GridField>;

type PointFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type PointVecFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
enum HamiltonianKind {
    /// `H = |p|²/2 + b·p`, `L = |a + b|²/2`; an empty drift means `b = 0`.
    QuadraticPlusDrift { drift: Vec<SpectralField> },
    Custom { h: Arc<PointFn>, dp_h: Arc<PointVecFn>, lagrangian: Arc<PointFn> },
}

/// Hamiltonian `H(x,p) = sup_a {-L(x,a) - a·p}` together with its Lagrangian.
#[derive(Clone)]
pub struct HamiltonianSpec {
    dim: usize,
    kind: HamiltonianKind,
}

impl std::fmt::Debug for HamiltonianSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            HamiltonianKind::QuadraticPlusDrift { drift } => {
                write!(f, "HamiltonianSpec::QuadraticPlusDrift {{ dim: {}, drift: {} }}", self.dim, !drift.is_empty())
            }
            HamiltonianKind::Custom { .. } => write!(f, "HamiltonianSpec::Custom {{ dim: {} }}", self.dim),
        }
    }
}

impl HamiltonianSpec {
    /// `H = |p|²/2`.
    pub fn quadratic(dim: usize) -> Self {
        Self { dim, kind: HamiltonianKind::QuadraticPlusDrift { drift: Vec::new() } }
    }

    /// `H = |p|²/2 + b(x)·p` for a real band-limited drift, one component per axis.
    pub fn quadratic_plus_drift(drift: Vec<SpectralField>) -> Result<Self> {
        let dim = drift.first().ok_or_else(|| Error::InvalidArgument("drift needs one component per axis".into()))?.dim();
        if drift.len() != dim {
            return Err(Error::DimensionMismatch(dim, drift.len()));
        }
        if drift.iter().any(|b| b.dim() != dim || b.hermitian_defect() > 1e-12) {
            return Err(Error::InvalidArgument("drift components must be real fields on the same torus".into()));
        }
        Ok(Self { dim, kind: HamiltonianKind::QuadraticPlusDrift { drift } })
    }

    /// Caller-supplied Legendre pair; validate with [`HamiltonianSpec::check_legendre`].
    pub fn custom(
        dim: usize,
        h: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        dp_h: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        lagrangian: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { dim, kind: HamiltonianKind::Custom { h: Arc::new(h), dp_h: Arc::new(dp_h), lagrangian: Arc::new(lagrangian) } }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            HamiltonianKind::QuadraticPlusDrift { drift } if !drift.is_empty() => drift.iter().map(|b| b.eval(x)).collect(),
            _ => vec![0.0; self.dim],
        }
    }

    pub fn hamiltonian(&self, x: &[f64], p: &[f64]) -> f64 {
        match &self.kind {
            HamiltonianKind::QuadraticPlusDrift { .. } => {
                let b = self.drift(x);
                p.iter().zip(&b).map(|(pi, bi)| 0.5 * pi * pi + bi * pi).sum()
            }
            HamiltonianKind::Custom { h, .. } => h(x, p),
        }
    }

    pub fn dp_hamiltonian(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        match &self.kind {
            HamiltonianKind::QuadraticPlusDrift { .. } => {
                let b = self.drift(x);
                p.iter().zip(&b).map(|(pi, bi)| pi + bi).collect()
            }
            HamiltonianKind::Custom { dp_h, .. } => dp_h(x, p),
        }
    }

    pub fn lagrangian(&self, x: &[f64], a: &[f64]) -> f64 {
        match &self.kind {
            HamiltonianKind::QuadraticPlusDrift { .. } => {
                let b = self.drift(x);
                a.iter().zip(&b).map(|(ai, bi)| 0.5 * (ai + bi) * (ai + bi)).sum()
            }
            HamiltonianKind::Custom { lagrangian, .. } => lagrangian(x, a),
        }
    }

    /// `|sup_a{-L(x,a) - a·p} - H(x,p)|`, with the supremum located at the
    /// envelope point `a* = -D_pH(x,p)` and certified against local probes.
    pub fn legendre_defect(&self, x: &[f64], p: &[f64]) -> f64 {
        let a_star: Vec<f64> = self.dp_hamiltonian(x, p).iter().map(|v| -v).collect();
        let objective = |a: &[f64]| -self.lagrangian(x, a) - a.iter().zip(p).map(|(u, v)| u * v).sum::<f64>();
        let at_star = objective(&a_star);
        let mut defect = (at_star - self.hamiltonian(x, p)).abs();
        let scale = 1e-3 * (1.0 + a_star.iter().map(|v| v * v).sum::<f64>().sqrt());
        let mut probe = a_star.clone();
        for axis in 0..self.dim {
            for sign in [-1.0, 1.0] {
                probe[axis] = a_star[axis] + sign * scale;
                defect = defect.max(objective(&probe) - at_star);
                probe[axis] = a_star[axis];
            }
        }
        defect
    }

    pub fn check_legendre(&self, samples: &[(Vec<f64>, Vec<f64>)], tol: f64) -> Result<()> {
        let defect = samples.iter().map(|(x, p)| self.legendre_defect(x, p)).fold(0.0, f64::max);
        if defect > tol {
            return Err(Error::LegendreInconsistent { defect });
        }
        Ok(())
    }

    /// Minimizer of the convex map `p ↦ H(x,p)` in one dimension.
    pub fn argmin_p(&self, x: &[f64]) -> f64 {
        match &self.kind {
            HamiltonianKind::QuadraticPlusDrift { .. } => -self.drift(x)[0],
            HamiltonianKind::Custom { dp_h, .. } => {
                let slope = |p: f64| dp_h(x, &[p])[0];
                let (mut lo, mut hi) = (-1.0, 1.0);
                while slope(lo) > 0.0 && lo > -1e12 {
                    lo *= 2.0;
                }
                while slope(hi) < 0.0 && hi < 1e12 {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if slope(mid) > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// `H_N(x,p) = (1/N) Σ_i H(x^i, N p_i)` on `(𝕋^1)^N`, paired with `L_N(x,a) = (1/N) Σ_i L(x^i, a_i)`.
    fn particle_system(&self, particles: usize) -> Self {
        let base = self.clone();
        let (b1, b2, b3) = (base.clone(), base.clone(), base);
        let nf = particles as f64;
        Self::custom(
            particles,
            move |x, p| (0..x.len()).map(|i| b1.hamiltonian(&x[i..i + 1], &[nf * p[i]])).sum::<f64>() / nf,
            move |x, p| (0..x.len()).map(|i| b2.dp_hamiltonian(&x[i..i + 1], &[nf * p[i]])[0]).collect(),
            move |x, a| (0..x.len()).map(|i| b3.lagrangian(&x[i..i + 1], &a[i..i + 1])).sum::<f64>() / nf,
        )
    }
}

/// Fourier machinery on the periodic `n^d` grid `j/n`.
struct Periodic {
    dim: usize,
    n: usize,
    fft: FftNd,
    lap: Vec<f64>,
    /// `2πk_a` per axis, with the Nyquist mode of even `n` zeroed.
    wave: Vec<Vec<f64>>,
    modes: Vec<Vec<i64>>,
}

impl Periodic {
    fn new(dim: usize, n: usize) -> Self {
        let total = n.pow(dim as u32);
        let mut lap = Vec::with_capacity(total);
        let mut wave = vec![Vec::with_capacity(total); dim];
        let mut modes = Vec::with_capacity(total);
        for idx in 0..total {
            let mut k = vec![0i64; dim];
            let mut r = idx;
            for a in (0..dim).rev() {
                k[a] = signed_freq(r % n, n);
                r /= n;
            }
            lap.push(-4.0 * PI * PI * k.iter().map(|&v| (v * v) as f64).sum::<f64>());
            for a in 0..dim {
                let nyquist = 2 * k[a].unsigned_abs() as usize == n;
                wave[a].push(if nyquist { 0.0 } else { 2.0 * PI * k[a] as f64 });
            }
            modes.push(k);
        }
        Self { dim, n, fft: FftNd::new(dim, n), lap, wave, modes }
    }

    fn len(&self) -> usize {
        self.lap.len()
    }

    fn to_coeffs(&self, values: &[f64]) -> Vec<C64> {
        let mut buf: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.fft.inverse(&mut buf);
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    fn to_values(&self, coeffs: &[C64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.fft.forward(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    // ∂_a of Σ c_k e^{-i2πk·x} has coefficients -i·2πk_a·c_k
    fn gradient(&self, coeffs: &[C64]) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|a| {
                let d: Vec<C64> = coeffs.iter().zip(&self.wave[a]).map(|(c, w)| c * C64::new(0.0, -w)).collect();
                self.to_values(&d)
            })
            .collect()
    }

    fn divergence(&self, comps: &[Vec<f64>]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        for (a, comp) in comps.iter().enumerate() {
            for ((o, c), w) in out.iter_mut().zip(self.to_coeffs(comp)).zip(&self.wave[a]) {
                *o += c * C64::new(0.0, -w);
            }
        }
        out
    }

    fn embed(&self, f: &SpectralField) -> Result<Vec<C64>> {
        if self.n < 2 * f.cutoff() + 1 {
            return Err(Error::ResolutionTooLow { needed: 2 * f.cutoff() + 1, got: self.n });
        }
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        crate::spectral::for_each_mode(f.dim(), f.cutoff(), |i, k| out[wrap_index(k, self.n)] = f.coeffs()[i]);
        Ok(out)
    }

    fn truncate(&self, coeffs: &[C64], cutoff: usize) -> SpectralField {
        SpectralField::from_fn(self.dim, cutoff, |k| coeffs[wrap_index(k, self.n)])
    }

    fn grid(&self, values: Vec<f64>) -> GridField {
        GridField::new(self.dim, self.n, values).expect("solver output is finite and sized")
    }

    fn point(&self, idx: usize, x: &mut [f64]) {
        let mut r = idx;
        for a in (0..self.dim).rev() {
            x[a] = (r % self.n) as f64 / self.n as f64;
            r /= self.n;
        }
    }

    fn hs_norm(&self, coeffs: &[C64], s: &SobolevWeight) -> f64 {
        let cut = (self.n - 1) / 2;
        coeffs
            .iter()
            .zip(&self.modes)
            .filter(|(_, k)| k.iter().all(|v| v.unsigned_abs() as usize <= cut))
            .map(|(c, k)| c.norm_sqr() / s.weight(k))
            .sum::<f64>()
            .sqrt()
    }
}

/// Per-step multipliers of ETDRK4 (Cox-Matthews) for `∂_τ w = Δw + N(w)`.
struct EtdStep {
    decay: Vec<f64>,
    half_decay: Vec<f64>,
    half_phi: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
}

const CONTOUR_POINTS: usize = 64;

impl EtdStep {
    fn new(lap: &[f64], h: f64) -> Self {
        let len = lap.len();
        let mut st = Self {
            decay: Vec::with_capacity(len),
            half_decay: Vec::with_capacity(len),
            half_phi: Vec::with_capacity(len),
            f1: Vec::with_capacity(len),
            f2: Vec::with_capacity(len),
            f3: Vec::with_capacity(len),
        };
        let roots: Vec<C64> = (0..CONTOUR_POINTS)
            .map(|j| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64))
            .collect();
        let mut cache: Option<(f64, [f64; 4])> = None;
        for &l in lap {
            let z = h * l;
            st.decay.push(z.exp());
            st.half_decay.push((z / 2.0).exp());
            // the phi-type functions are averaged over a unit circle around z, which avoids
            // the cancellation near z = 0 without a series switch
            let coeffs = match cache {
                Some((zc, c)) if zc == z => c,
                _ => {
                    let mut acc = [0.0; 4];
                    for r in roots.iter().map(|w| w + z) {
                        let e = r.exp();
                        let r3 = r * r * r;
                        acc[0] += (((r / 2.0).exp() - 1.0) / r).re;
                        acc[1] += ((-4.0 - r + e * (4.0 - 3.0 * r + r * r)) / r3).re;
                        acc[2] += ((2.0 + r + e * (r - 2.0)) / r3).re;
                        acc[3] += ((-4.0 - 3.0 * r - r * r + e * (4.0 - r)) / r3).re;
                    }
                    let c = acc.map(|a| a / CONTOUR_POINTS as f64);
                    cache = Some((z, c));
                    c
                }
            };
            st.half_phi.push(h * coeffs[0]);
            st.f1.push(h * coeffs[1]);
            st.f2.push(h * coeffs[2]);
            st.f3.push(h * coeffs[3]);
        }
        st
    }
}

/// Integrates `steps` ETDRK4 steps; `nonlin(s, w)` is evaluated at the fractional step position `s`.
/// Returns every snapshot, starting with `w0`.
fn etdrk4(
    lap: &[f64],
    w0: Vec<C64>,
    h: f64,
    steps: usize,
    mut nonlin: impl FnMut(f64, &[C64]) -> Result<Vec<C64>>,
) -> Result<Vec<Vec<C64>>> {
    let st = EtdStep::new(lap, h);
    let len = w0.len();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(w0);
    for j in 0..steps {
        let w = &out[j];
        let (s0, mid) = (j as f64, j as f64 + 0.5);
        let nw = nonlin(s0, w)?;
        let a: Vec<C64> = (0..len).map(|i| w[i] * st.half_decay[i] + nw[i] * st.half_phi[i]).collect();
        let na = nonlin(mid, &a)?;
        let b: Vec<C64> = (0..len).map(|i| w[i] * st.half_decay[i] + na[i] * st.half_phi[i]).collect();
        let nb = nonlin(mid, &b)?;
        let c: Vec<C64> = (0..len).map(|i| a[i] * st.half_decay[i] + (nb[i] * 2.0 - nw[i]) * st.half_phi[i]).collect();
        let nc = nonlin(s0 + 1.0, &c)?;
        let next: Vec<C64> = (0..len)
            .map(|i| w[i] * st.decay[i] + nw[i] * st.f1[i] + (na[i] + nb[i]) * (2.0 * st.f2[i]) + nc[i] * st.f3[i])
            .collect();
        if next.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonConvergence { iterations: j + 1, residual: f64::INFINITY });
        }
        out.push(next);
    }
    Ok(out)
}

/// Cubic Lagrange weights for reading a step-indexed sequence of length `len` at position `s`.
fn stencil(s: f64, len: usize) -> Vec<(usize, f64)> {
    if len < 4 {
        let i = (s.floor() as usize).min(len - 2);
        let w = s - i as f64;
        return vec![(i, 1.0 - w), (i + 1, w)];
    }
    let base = (s.floor() as isize - 1).clamp(0, len as isize - 4) as usize;
    (0..4)
        .map(|a| {
            let w = (0..4)
                .filter(|&b| b != a)
                .map(|b| (s - (base + b) as f64) / (a as f64 - b as f64))
                .product::<f64>();
            (base + a, w)
        })
        .collect()
}

/// Unit-spacing quadrature: composite Simpson, closing an odd count of intervals with the 3/8 rule.
fn quadrature(v: &[f64]) -> f64 {
    let intervals = v.len() - 1;
    match intervals {
        0 => 0.0,
        1 => 0.5 * (v[0] + v[1]),
        2 => (v[0] + 4.0 * v[1] + v[2]) / 3.0,
        3 => 3.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]) / 8.0,
        _ if intervals % 2 == 1 => quadrature(&v[..intervals - 2]) + quadrature(&v[intervals - 3..]),
        _ => {
            let inner: f64 = v[1..intervals].iter().enumerate().map(|(i, x)| if i % 2 == 0 { 4.0 * x } else { 2.0 * x }).sum();
            (v[0] + v[intervals] + inner) / 3.0
        }
    }
}

fn blend(seq: &[Vec<f64>], s: f64) -> Vec<f64> {
    if s.fract() == 0.0 {
        return seq[s as usize].clone();
    }
    let mut out = vec![0.0; seq[0].len()];
    for (i, w) in stencil(s, seq.len()) {
        for (o, v) in out.iter_mut().zip(&seq[i]) {
            *o += w * v;
        }
    }
    out
}

fn check_interval(t0: f64, t1: f64, steps: usize) -> Result<f64> {
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("need t0 < t1, got [{t0}, {t1}]")));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("at least one time step".into()));
    }
    Ok((t1 - t0) / steps as f64)
}

fn max_speed(field: &[GridField]) -> f64 {
    let len = field.first().map_or(0, |f| f.values().len());
    (0..len).map(|i| field.iter().map(|c| c.values()[i].powi(2)).sum::<f64>().sqrt()).fold(0.0, f64::max)
}

fn cfl_check(h: f64, speed: f64, rate: f64) -> Result<()> {
    let stable_dt = (CFL / (speed * speed)).min(CFL / rate);
    if h > stable_dt {
        return Err(Error::CFLViolation { dt: h, stable_dt });
    }
    Ok(())
}

fn max_divergence(p: &Periodic, field: &[GridField]) -> f64 {
    let comps: Vec<Vec<f64>> = field.iter().map(|c| c.values().to_vec()).collect();
    p.to_values(&p.divergence(&comps)).iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn check_vector_field(alpha: &TimeSeries<VectorField>, dim: usize, n: usize) -> Result<()> {
    for v in &alpha.values {
        if v.len() != dim {
            return Err(Error::DimensionMismatch(dim, v.len()));
        }
        if v.iter().any(|c| c.dim() != dim || c.resolution() != n) {
            return Err(Error::InvalidArgument("drift components must share the solution grid".into()));
        }
    }
    Ok(())
}

/// Solves `-∂_t v - Δv - α·Dv = f` on `[t0, t1]` with `v(t1) = g`; snapshots ascend in time.
pub fn solve_linear_backward(
    alpha: &TimeSeries<VectorField>,
    g: &GridField,
    f: Option<&TimeSeries<GridField>>,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<TimeSeries<GridField>> {
    let h = check_interval(t0, t1, steps)?;
    let (dim, n) = (g.dim(), g.resolution());
    check_vector_field(alpha, dim, n)?;
    let speed = alpha.values.iter().map(|v| max_speed(v)).fold(0.0, f64::max);
    cfl_check(h, speed, 0.0)?;
    let p = Periodic::new(dim, n);
    let snaps = etdrk4(&p.lap, p.to_coeffs(g.values()), h, steps, |s, w| {
        let t = t1 - s * h;
        let a = alpha.at(t);
        let grads = p.gradient(w);
        let mut vals = vec![0.0; p.len()];
        for (ax, comp) in a.iter().enumerate() {
            for (v, (ai, gi)) in vals.iter_mut().zip(comp.values().iter().zip(&grads[ax])) {
                *v += ai * gi;
            }
        }
        if let Some(f) = f {
            for (v, fi) in vals.iter_mut().zip(f.at(t).values()) {
                *v += fi;
            }
        }
        Ok(p.to_coeffs(&vals))
    })?;
    backward_series(&p, snaps, t0, h)
}

fn backward_series(p: &Periodic, mut snaps: Vec<Vec<C64>>, t0: f64, h: f64) -> Result<TimeSeries<GridField>> {
    snaps.reverse();
    let times = (0..snaps.len()).map(|j| t0 + j as f64 * h).collect();
    TimeSeries::new(times, snaps.iter().map(|c| p.grid(p.to_values(c))).collect())
}

/// Grid-evaluated Hamiltonian; quadratic drifts are sampled once.
struct GridHamiltonian<'a> {
    spec: &'a HamiltonianSpec,
    drift: Vec<Vec<f64>>,
    points: Vec<f64>,
}

impl<'a> GridHamiltonian<'a> {
    fn new(spec: &'a HamiltonianSpec, p: &Periodic) -> Self {
        let d = p.dim;
        let mut points = vec![0.0; p.len() * d];
        for i in 0..p.len() {
            p.point(i, &mut points[i * d..(i + 1) * d]);
        }
        let drift = match &spec.kind {
            HamiltonianKind::QuadraticPlusDrift { drift } if !drift.is_empty() => {
                drift.iter().map(|b| points.chunks(d).map(|x| b.eval(x)).collect()).collect()
            }
            _ => Vec::new(),
        };
        Self { spec, drift, points }
    }

    fn x(&self, i: usize) -> &[f64] {
        let d = self.spec.dim;
        &self.points[i * d..(i + 1) * d]
    }

    fn b(&self, i: usize, a: usize) -> f64 {
        if self.drift.is_empty() {
            0.0
        } else {
            self.drift[a][i]
        }
    }

    fn is_quadratic(&self) -> bool {
        matches!(self.spec.kind, HamiltonianKind::QuadraticPlusDrift { .. })
    }

    fn h(&self, i: usize, p: &[f64]) -> f64 {
        if self.is_quadratic() {
            p.iter().enumerate().map(|(a, pa)| 0.5 * pa * pa + self.b(i, a) * pa).sum()
        } else {
            self.spec.hamiltonian(self.x(i), p)
        }
    }

    fn dp_h(&self, i: usize, p: &[f64]) -> Vec<f64> {
        if self.is_quadratic() {
            p.iter().enumerate().map(|(a, pa)| pa + self.b(i, a)).collect()
        } else {
            self.spec.dp_hamiltonian(self.x(i), p)
        }
    }

    fn lagrangian(&self, i: usize, act: &[f64]) -> f64 {
        if self.is_quadratic() {
            act.iter().enumerate().map(|(a, v)| 0.5 * (v + self.b(i, a)).powi(2)).sum()
        } else {
            self.spec.lagrangian(self.x(i), act)
        }
    }
}

/// Backward HJB in coefficient form; returns snapshots ordered from `t1` down to `t0`.
fn hjb_core(
    p: &Periodic,
    gh: &GridHamiltonian<'_>,
    source: &dyn Fn(f64) -> Option<Vec<f64>>,
    terminal: &[f64],
    h: f64,
    steps: usize,
) -> Result<Vec<Vec<C64>>> {
    let d = p.dim;
    etdrk4(&p.lap, p.to_coeffs(terminal), h, steps, |s, w| {
        let grads = p.gradient(w);
        let f = source(s);
        let mut vals = vec![0.0; p.len()];
        let mut speed = 0.0f64;
        let mut pt = vec![0.0; d];
        for (i, v) in vals.iter_mut().enumerate() {
            for a in 0..d {
                pt[a] = grads[a][i];
            }
            let dp = gh.dp_h(i, &pt);
            speed = speed.max(dp.iter().map(|x| x * x).sum::<f64>().sqrt());
            *v = -gh.h(i, &pt) + f.as_ref().map_or(0.0, |f| f[i]);
        }
        cfl_check(h, speed, 0.0)?;
        Ok(p.to_coeffs(&vals))
    })
}

/// Output of the semilinear HJB solver.
#[derive(Clone, Debug)]
pub struct HjbSolution {
    pub u: TimeSeries<GridField>,
    /// `sup_t ‖Du(t)‖_∞`.
    pub gradient_bound: f64,
}

/// Solves `-∂_t u - Δu + H(x,Du) = f` on `[t0, t1]` with `u(t1) = g`.
pub fn solve_hjb_semilinear(
    f: &TimeSeries<GridField>,
    g: &GridField,
    ham: &HamiltonianSpec,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<HjbSolution> {
    let h = check_interval(t0, t1, steps)?;
    let (dim, n) = (g.dim(), g.resolution());
    if ham.dim() != dim {
        return Err(Error::DimensionMismatch(dim, ham.dim()));
    }
    let p = Periodic::new(dim, n);
    let gh = GridHamiltonian::new(ham, &p);
    let source = |s: f64| Some(f.at(t1 - s * h).into_values());
    let snaps = hjb_core(&p, &gh, &source, g.values(), h, steps)?;
    let gradient_bound = snaps
        .iter()
        .map(|c| {
            let grads = p.gradient(c);
            (0..p.len()).map(|i| grads.iter().map(|g| g[i] * g[i]).sum::<f64>().sqrt()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    Ok(HjbSolution { u: backward_series(&p, snaps, t0, h)?, gradient_bound })
}

/// Forward Fokker-Planck in coefficient form; the zero mode is never touched.
fn fp_core(p: &Periodic, alpha: &dyn Fn(f64) -> VectorField, m0: Vec<C64>, h: f64, steps: usize) -> Result<Vec<Vec<C64>>> {
    etdrk4(&p.lap, m0, h, steps, |s, w| {
        let a = alpha(s);
        let dens = p.to_values(w);
        let comps: Vec<Vec<f64>> = a.iter().map(|c| c.values().iter().zip(&dens).map(|(ai, mi)| -ai * mi).collect()).collect();
        Ok(p.divergence(&comps))
    })
}

/// Solves `∂_t m = Δm - div(m α)` on `[t0, t1]` from `m0`; measures keep `m0`'s cutoff.
pub fn solve_fokker_planck(
    alpha: &TimeSeries<VectorField>,
    m0: &SpectralMeasure,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<TimeSeries<SpectralMeasure>> {
    let h = check_interval(t0, t1, steps)?;
    let first = alpha.first();
    let dim = m0.dim();
    let n = first.first().ok_or_else(|| Error::InvalidArgument("drift has no components".into()))?.resolution();
    check_vector_field(alpha, dim, n)?;
    let p = Periodic::new(dim, n);
    let speed = alpha.values.iter().map(|v| max_speed(v)).fold(0.0, f64::max);
    let rate = alpha.values.iter().map(|v| max_divergence(&p, v)).fold(0.0, f64::max);
    cfl_check(h, speed, rate)?;
    let snaps = fp_core(&p, &|s| alpha.at(t0 + s * h), p.embed(m0.field())?, h, steps)?;
    let times = (0..=steps).map(|j| t0 + j as f64 * h).collect();
    let measures = snaps.iter().map(|c| SpectralMeasure::from_field(p.truncate(c, m0.cutoff()))).collect::<Result<Vec<_>>>()?;
    TimeSeries::new(times, measures)
}

/// Mean field control data: `inf ∫(∫L dm_t + F(m_t))dt + G(m_T)` over Fokker-Planck flows.
#[derive(Clone)]
pub struct MfcProblem {
    pub hamiltonian: HamiltonianSpec,
    pub running: SharedFunctional,
    pub terminal: SharedFunctional,
    pub horizon: f64,
}

impl MfcProblem {
    pub fn new(hamiltonian: HamiltonianSpec, running: SharedFunctional, terminal: SharedFunctional, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        let d = hamiltonian.dim();
        for phi in [&running, &terminal] {
            if phi.dim() != d {
                return Err(Error::DimensionMismatch(d, phi.dim()));
            }
        }
        Ok(Self { hamiltonian, running, terminal, horizon })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }
}

#[derive(Clone, Debug)]
pub struct MfcOptions {
    pub resolution: usize,
    pub steps: usize,
    /// Picard relaxation `θ`.
    pub theta: f64,
    pub max_iter: usize,
    /// Stop when `sup_t ‖m^{j+1}_t - m^j_t‖_{-s}` falls below this.
    pub tol: f64,
    /// Sobolev order `s` of the residual norm.
    pub sobolev: f64,
    /// Report a stalled iteration as `PicardStalled` instead of a flagged result.
    pub strict: bool,
    /// Starting flow, sampled on the solver's time grid; the heat flow of `m0` otherwise.
    pub initial_flow: Option<Vec<SpectralMeasure>>,
}

impl Default for MfcOptions {
    fn default() -> Self {
        Self { resolution: 64, steps: 200, theta: 0.3, max_iter: 400, tol: 1e-10, sobolev: 2.0, strict: false, initial_flow: None }
    }
}

#[derive(Clone, Debug)]
pub struct MfcSolution {
    pub u: TimeSeries<GridField>,
    pub m: TimeSeries<SpectralMeasure>,
    /// Feedback `-D_pH(x, Du)`.
    pub alpha: TimeSeries<VectorField>,
    /// Cost of the returned pair `(m, α)`.
    pub value: f64,
    pub picard_residual: f64,
    pub iterations: usize,
    /// False when the Picard iteration stalled; the best iterate is returned.
    pub certified: bool,
}

struct Sweep {
    u: Vec<Vec<C64>>,
    alpha: Vec<VectorField>,
    flow: Vec<Vec<C64>>,
}

struct MfcRun<'a> {
    problem: &'a MfcProblem,
    p: Periodic,
    gh: GridHamiltonian<'a>,
    cutoff: usize,
    h: f64,
    steps: usize,
}

impl MfcRun<'_> {
    fn measure(&self, c: &[C64]) -> Result<SpectralMeasure> {
        SpectralMeasure::from_field(self.p.truncate(c, self.cutoff))
    }

    fn field_values(&self, f: &SpectralField) -> Result<Vec<f64>> {
        Ok(self.p.to_values(&self.p.embed(f)?))
    }

    fn sweep(&self, flow: &[Vec<C64>]) -> Result<Sweep> {
        let measures = flow.iter().map(|c| self.measure(c)).collect::<Result<Vec<_>>>()?;
        let sources = measures
            .iter()
            .map(|m| self.problem.running.flat_derivative(m).ok_or(Error::NoDerivative).and_then(|g| self.field_values(&g)))
            .collect::<Result<Vec<_>>>()?;
        let terminal = self.problem.terminal.flat_derivative(measures.last().expect("flow")).ok_or(Error::NoDerivative)?;
        let steps = self.steps;
        let source = |s: f64| Some(blend(&sources, steps as f64 - s));
        let mut u = hjb_core(&self.p, &self.gh, &source, &self.field_values(&terminal)?, self.h, steps)?;
        u.reverse();
        let d = self.p.dim;
        let alpha: Vec<VectorField> = u
            .iter()
            .map(|c| {
                let grads = self.p.gradient(c);
                let mut comps = vec![vec![0.0; self.p.len()]; d];
                let mut pt = vec![0.0; d];
                for i in 0..self.p.len() {
                    for a in 0..d {
                        pt[a] = grads[a][i];
                    }
                    for (a, v) in self.gh.dp_h(i, &pt).into_iter().enumerate() {
                        comps[a][i] = -v;
                    }
                }
                comps.into_iter().map(|c| self.p.grid(c)).collect()
            })
            .collect();
        let per_axis: Vec<Vec<Vec<f64>>> = (0..d).map(|ax| alpha.iter().map(|a| a[ax].values().to_vec()).collect()).collect();
        let drift = |s: f64| -> VectorField {
            if s.fract() == 0.0 {
                return alpha[s as usize].clone();
            }
            per_axis.iter().map(|seq| self.p.grid(blend(seq, s))).collect()
        };
        let new_flow = fp_core(&self.p, &drift, flow[0].clone(), self.h, steps)?;
        Ok(Sweep { u, alpha, flow: new_flow })
    }

    fn value(&self, sweep: &Sweep) -> Result<f64> {
        let d = self.p.dim;
        let mut running = Vec::with_capacity(self.steps + 1);
        for (c, a) in sweep.flow.iter().zip(&sweep.alpha) {
            let dens = self.p.to_values(c);
            let mut act = vec![0.0; d];
            let mut lag = 0.0;
            for (i, mi) in dens.iter().enumerate() {
                for ax in 0..d {
                    act[ax] = a[ax].values()[i];
                }
                lag += self.gh.lagrangian(i, &act) * mi;
            }
            running.push(lag / dens.len() as f64 + self.problem.running.evaluate(&self.measure(c)?));
        }
        let integral = self.h * quadrature(&running);
        Ok(integral + self.problem.terminal.evaluate(&self.measure(sweep.flow.last().expect("flow"))?))
    }
}

/// Damped Picard iteration on the optimality system from `(t0, m0)`.
///
/// A CFL violation triggers a restart with a finer time step.
pub fn solve_mfc(problem: &MfcProblem, t0: f64, m0: &SpectralMeasure, opts: &MfcOptions) -> Result<MfcSolution> {
    let mut steps = opts.steps;
    for _ in 0..4 {
        match solve_mfc_steps(problem, t0, m0, opts, steps) {
            Err(Error::CFLViolation { stable_dt, .. }) if opts.initial_flow.is_none() => {
                steps = ((problem.horizon - t0) / (0.8 * stable_dt)).ceil() as usize;
            }
            other => return other,
        }
    }
    solve_mfc_steps(problem, t0, m0, opts, steps)
}

fn solve_mfc_steps(problem: &MfcProblem, t0: f64, m0: &SpectralMeasure, opts: &MfcOptions, steps: usize) -> Result<MfcSolution> {
    let h = check_interval(t0, problem.horizon, steps)?;
    if !(opts.theta > 0.0 && opts.theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("relaxation {} outside (0,1]", opts.theta)));
    }
    let (dim, n) = (problem.dim(), opts.resolution);
    if m0.dim() != dim {
        return Err(Error::DimensionMismatch(dim, m0.dim()));
    }
    let s = SobolevWeight::new(opts.sobolev)?;
    let p = Periodic::new(dim, n);
    let gh = GridHamiltonian::new(&problem.hamiltonian, &p);
    let run = MfcRun { problem, cutoff: (n - 1) / 2, h, steps, gh, p };
    let start = run.p.embed(m0.field())?;
    let mut flow = match &opts.initial_flow {
        Some(ms) if ms.len() == steps + 1 => {
            let mut f = ms.iter().map(|m| run.p.embed(m.field())).collect::<Result<Vec<_>>>()?;
            f[0] = start.clone();
            f
        }
        Some(ms) => return Err(Error::InvalidArgument(format!("initial flow has {} entries, need {}", ms.len(), steps + 1))),
        None => {
            let zero: VectorField = (0..dim).map(|_| GridField::constant(dim, n, 0.0)).collect::<Result<_>>()?;
            fp_core(&run.p, &|_| zero.clone(), start, h, steps)?
        }
    };
    let mut best = (f64::INFINITY, flow.clone());
    let mut iterations = 0;
    let theta = opts.theta;
    for it in 1..=opts.max_iter {
        iterations = it;
        let sw = run.sweep(&flow)?;
        let mut residual = 0.0f64;
        for (old, new) in flow.iter_mut().zip(&sw.flow) {
            let delta: Vec<C64> = old.iter().zip(new).map(|(o, nw)| (nw - o) * theta).collect();
            residual = residual.max(run.p.hs_norm(&delta, &s));
            for (o, dl) in old.iter_mut().zip(&delta) {
                *o += dl;
            }
        }
        if residual < best.0 {
            best = (residual, flow.clone());
        }
        if residual < opts.tol {
            break;
        }
    }
    let (picard_residual, flow) = best;
    let certified = picard_residual < opts.tol;
    if !certified && opts.strict {
        return Err(Error::PicardStalled { residual: picard_residual });
    }
    let sw = run.sweep(&flow)?;
    let value = run.value(&sw)?;
    let times: Vec<f64> = (0..=steps).map(|j| t0 + j as f64 * h).collect();
    let u = TimeSeries::new(times.clone(), sw.u.iter().map(|c| run.p.grid(run.p.to_values(c))).collect())?;
    let m = TimeSeries::new(times.clone(), sw.flow.iter().map(|c| run.measure(c)).collect::<Result<Vec<_>>>()?)?;
    let alpha = TimeSeries::new(times, sw.alpha)?;
    Ok(MfcSolution { u, m, alpha, value, picard_residual, iterations, certified })
}

/// `V^N` on `(𝕋^1)^N` at the initial time.
#[derive(Clone, Debug)]
pub struct HjbnSolution {
    pub particles: usize,
    pub values: GridField,
    coeffs: SpectralField,
}

impl HjbnSolution {
    /// Trigonometric interpolation of `V^N(t0, ·)`.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.coeffs.eval(x)
    }
}

/// Solves `-∂_tV - Σ_iΔ_{x^i}V + (1/N)Σ_i H(x^i, N D_{x^i}V) = F(m_x^N)`, `V(T) = G(m_x^N)` for `N ≤ 3`, `d = 1`.
pub fn solve_hjbn_small(problem: &MfcProblem, particles: usize, t0: f64, resolution: usize, steps: usize) -> Result<HjbnSolution> {
    if problem.dim() != 1 {
        return Err(Error::DimensionUnsupported(problem.dim()));
    }
    if !(1..=3).contains(&particles) {
        return Err(Error::InvalidArgument(format!("tiny-N solver supports N in 1..=3, got {particles}")));
    }
    let needed = (2 * problem.running.cutoff_hint().max(problem.terminal.cutoff_hint()) + 1).max(8);
    if resolution < needed {
        return Err(Error::GridTooCoarse(format!("resolution {resolution} below {needed}")));
    }
    let h = check_interval(t0, problem.horizon, steps)?;
    let ham = problem.hamiltonian.particle_system(particles);
    let p = Periodic::new(particles, resolution);
    let gh = GridHamiltonian::new(&ham, &p);
    let mut x = vec![0.0; particles];
    let mut source = Vec::with_capacity(p.len());
    let mut terminal = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        p.point(i, &mut x);
        source.push(problem.running.project(&x));
        terminal.push(problem.terminal.project(&x));
    }
    let snaps = hjb_core(&p, &gh, &|_| Some(source.clone()), &terminal, h, steps)?;
    let values = p.grid(p.to_values(snaps.last().expect("snapshots")));
    let coeffs = SpectralField::from_grid(&values, (resolution - 1) / 2)?;
    Ok(HjbnSolution { particles, values, coeffs })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FarField {
    Periodic,
    /// Ghost values extend the solution linearly; the Laplacian vanishes at the ends.
    LinearExtrapolation,
}

/// Computational window `[lo, hi]` of the real line.
#[derive(Clone, Copy, Debug)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
    pub far_field: FarField,
}

impl Window {
    pub fn dx(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let count = match self.far_field {
            FarField::Periodic => self.cells,
            FarField::LinearExtrapolation => self.cells + 1,
        };
        (0..count).map(|j| self.lo + j as f64 * self.dx()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ViscousSolution {
    pub x: Vec<f64>,
    /// `v^ν(0, x)`.
    pub v: Vec<f64>,
    pub steps: usize,
}

/// Solves `-∂_t v - νΔv + H(x, Dv) = F`, `v(T) = G` on a window of the line.
///
/// Godunov flux for the convex Hamiltonian, backward Euler for the diffusion.
/// With `steps = None` each step takes 0.9 of the monotonicity limit `dx / max|H_p|`.
pub fn solve_viscous_hj(
    ham: &HamiltonianSpec,
    running: &dyn Fn(f64) -> f64,
    terminal: &dyn Fn(f64) -> f64,
    nu: f64,
    horizon: f64,
    window: &Window,
    steps: Option<usize>,
) -> Result<ViscousSolution> {
    if ham.dim() != 1 {
        return Err(Error::DimensionUnsupported(ham.dim()));
    }
    if !(nu >= 0.0) || !(horizon > 0.0) || !(window.hi > window.lo) || window.cells < 4 {
        return Err(Error::InvalidArgument("need nu >= 0, T > 0 and a nondegenerate window".into()));
    }
    let x = window.nodes();
    let m = x.len();
    let dx = window.dx();
    let pbar: Vec<f64> = x.iter().map(|&xi| ham.argmin_p(&[xi])).collect();
    let f: Vec<f64> = x.iter().map(|&xi| running(xi)).collect();
    let mut v: Vec<f64> = x.iter().map(|&xi| terminal(xi)).collect();
    let periodic = window.far_field == FarField::Periodic;
    let fixed_dt = steps.map(|s| horizon / s.max(1) as f64);
    let mut tau = 0.0;
    let mut count = 0usize;
    let mut flux = vec![0.0; m];
    while tau < horizon * (1.0 - 1e-14) {
        let mut speed = 0.0f64;
        for j in 0..m {
            let (left, right) = neighbours(&v, j, periodic);
            let (dm, dp) = ((v[j] - left) / dx, (right - v[j]) / dx);
            let xj = [x[j]];
            let hl = ham.hamiltonian(&xj, &[dm.max(pbar[j])]);
            let hr = ham.hamiltonian(&xj, &[dp.min(pbar[j])]);
            flux[j] = hl.max(hr);
            speed = speed.max(ham.dp_hamiltonian(&xj, &[dm])[0].abs()).max(ham.dp_hamiltonian(&xj, &[dp])[0].abs());
        }
        let stable_dt = if speed > 0.0 { dx / speed } else { f64::INFINITY };
        let dt = match fixed_dt {
            Some(dt) => {
                if dt > stable_dt {
                    return Err(Error::CFLViolation { dt, stable_dt });
                }
                dt
            }
            None => (0.9 * stable_dt).min(horizon - tau).min(horizon / 16.0),
        };
        let rhs: Vec<f64> = (0..m).map(|j| v[j] - dt * (flux[j] - f[j])).collect();
        v = if nu > 0.0 { implicit_diffusion(&rhs, nu * dt / (dx * dx), periodic) } else { rhs };
        tau += dt;
        count += 1;
        if fixed_dt.is_some() && count == steps.unwrap_or(0) {
            break;
        }
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonConvergence { iterations: count, residual: f64::INFINITY });
    }
    Ok(ViscousSolution { x, v, steps: count })
}

fn neighbours(v: &[f64], j: usize, periodic: bool) -> (f64, f64) {
    let m = v.len();
    if periodic {
        (v[(j + m - 1) % m], v[(j + 1) % m])
    } else if j == 0 {
        (2.0 * v[0] - v[1], v[1])
    } else if j == m - 1 {
        (v[m - 2], 2.0 * v[m - 1] - v[m - 2])
    } else {
        (v[j - 1], v[j + 1])
    }
}

/// Solves `(I - r·D²) w = rhs` with the second difference `D²` of the far-field closure.
fn implicit_diffusion(rhs: &[f64], r: f64, periodic: bool) -> Vec<f64> {
    let m = rhs.len();
    let mut sub = vec![-r; m];
    let mut diag = vec![1.0 + 2.0 * r; m];
    let mut sup = vec![-r; m];
    if periodic {
        return cyclic_tridiagonal(-r, 1.0 + 2.0 * r, -r, rhs);
    }
    // linear extrapolation: D² vanishes at both ends
    diag[0] = 1.0;
    sup[0] = 0.0;
    diag[m - 1] = 1.0;
    sub[m - 1] = 0.0;
    thomas(&sub, &diag, &sup, rhs)
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = rhs.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..m {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / denom;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Constant-coefficient cyclic tridiagonal solve by Sherman-Morrison.
fn cyclic_tridiagonal(a: f64, b: f64, c: f64, rhs: &[f64]) -> Vec<f64> {
    let m = rhs.len();
    let gamma = -b;
    let sub = vec![a; m];
    let sup = vec![c; m];
    let mut diag = vec![b; m];
    diag[0] = b - gamma;
    diag[m - 1] = b - a * c / gamma;
    let y = thomas(&sub, &diag, &sup, rhs);
    let mut u = vec![0.0; m];
    u[0] = gamma;
    u[m - 1] = a;
    let z = thomas(&sub, &diag, &sup, &u);
    let factor = (y[0] + c * y[m - 1] / gamma) / (1.0 + z[0] + c * z[m - 1] / gamma);
    y.iter().zip(&z).map(|(yi, zi)| yi - factor * zi).collect()
}
