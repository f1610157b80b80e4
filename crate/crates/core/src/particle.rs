//! Monte Carlo estimators on interacting particle systems.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fit::{fit_loglog, RateFit};
use crate::pde::{solve_mfc, MfcOptions, MfcProblem, MfcSolution, TimeSeries, VectorField};
use crate::rng::{experiment_id, stream_rng};
use crate::spectral::{SpectralField, SpectralMeasure, C64};
use crate::transport::{w1_approx, w1_circle, w1_discrete_with_budget, w1_line, CircleMeasure, Metric, PointCloud, DEFAULT_LP_BUDGET};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Diffusion {
    /// `dX = α dt + dW`.
    Unit,
    /// `dX = α dt + √2 dW`.
    Sqrt2,
}

impl Diffusion {
    pub fn sigma(self) -> f64 {
        match self {
            Diffusion::Unit => 1.0,
            Diffusion::Sqrt2 => std::f64::consts::SQRT_2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleRunConfig {
    pub particles: usize,
    pub replications: usize,
    pub dt: f64,
    pub diffusion: Diffusion,
    pub seed: u64,
}

impl ParticleRunConfig {
    /// √2 diffusion and `dt = horizon / 200`.
    pub fn new(particles: usize, replications: usize, horizon: f64, seed: u64) -> Self {
        Self { particles, replications, dt: horizon / 200.0, diffusion: Diffusion::Sqrt2, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 || self.replications == 0 {
            return Err(Error::InvalidArgument("need at least one particle and one replication".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step {} must be positive", self.dt)));
        }
        Ok(())
    }
}

/// Sample mean with its 1σ standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replications: usize,
}

impl MCEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let m = samples.len();
        let mean = samples.iter().sum::<f64>() / m as f64;
        let stderr = if m > 1 {
            (samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (m - 1) as f64 / m as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, replications: m }
    }
}

/// Runs `task(r, rng_r)` for every replication; results come back in replication order.
fn replicate<T: Send>(m: usize, seed: u64, experiment: &str, task: impl Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync) -> Result<Vec<T>> {
    let id = experiment_id(experiment);
    (0..m).into_par_iter().map(|r| task(r, &mut stream_rng(seed, id, r as u64))).collect()
}

/// A time-dependent feedback `α(t, x)` on the torus, spectrally interpolated in space and
/// linearly in time.
#[derive(Clone, Debug)]
pub struct Feedback {
    dim: usize,
    times: Vec<f64>,
    comps: Vec<Vec<SpectralField>>,
}

impl Feedback {
    pub fn zero(dim: usize) -> Self {
        Self { dim, times: vec![0.0], comps: vec![vec![SpectralField::zeros(dim, 0); dim]] }
    }

    pub fn from_series(alpha: &TimeSeries<VectorField>) -> Result<Self> {
        let first = alpha.first();
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("feedback has no components".into()));
        }
        let n = first[0].resolution();
        let comps = alpha
            .values
            .iter()
            .map(|v| {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch(dim, v.len()));
                }
                v.iter().map(|g| SpectralField::from_grid(g, (n - 1) / 2)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim, times: alpha.times.clone(), comps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn snapshot(&self, t: f64) -> Vec<SpectralField> {
        let last = self.times.len() - 1;
        if last == 0 || t <= self.times[0] {
            return self.comps[0].clone();
        }
        if t >= self.times[last] {
            return self.comps[last].clone();
        }
        let j = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[j]) / (self.times[j + 1] - self.times[j]);
        self.comps[j]
            .iter()
            .zip(&self.comps[j + 1])
            .map(|(a, b)| a.scale(1.0 - w).add(&b.scale(w)).expect("matching cutoffs"))
            .collect()
    }

    /// `α(t, x^i)` for row-major points, written row-major into a new vector.
    pub fn eval_points(&self, t: f64, points: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let fields = self.snapshot(t);
        let mut out = vec![0.0; points.len()];
        if d == 1 {
            out = fields[0].eval_many_1d(points);
        } else {
            for (x, o) in points.chunks(d).zip(out.chunks_mut(d)) {
                for (a, f) in fields.iter().enumerate() {
                    o[a] = f.eval(x);
                }
            }
        }
        out
    }
}

/// Cost of one particle path started at `init` under `feedback`, Euler-Maruyama with a left-point rule.
fn particle_cost(problem: &MfcProblem, t0: f64, init: &[f64], feedback: &Feedback, steps: usize, h: f64, sigma: f64, rng: &mut ChaCha8Rng) -> f64 {
    let d = problem.dim();
    let n = init.len() / d;
    let mut x = init.to_vec();
    let noise = sigma * h.sqrt();
    let mut cost = 0.0;
    for j in 0..steps {
        let t = t0 + j as f64 * h;
        let a = feedback.eval_points(t, &x);
        let lag: f64 = x.chunks(d).zip(a.chunks(d)).map(|(xi, ai)| problem.hamiltonian.lagrangian(xi, ai)).sum::<f64>() / n as f64;
        cost += h * (lag + problem.running.project(&x));
        for (xi, ai) in x.iter_mut().zip(&a) {
            let z: f64 = rng.sample(StandardNormal);
            // coordinates stay in [0,1): functionals see torus points
            *xi = (*xi + ai * h + noise * z).rem_euclid(1.0);
        }
    }
    cost + problem.terminal.project(&x)
}

fn check_problem(problem: &MfcProblem, t0: f64, cfg: &ParticleRunConfig, feedback: &Feedback) -> Result<usize> {
    cfg.validate()?;
    if feedback.dim() != problem.dim() {
        return Err(Error::DimensionMismatch(problem.dim(), feedback.dim()));
    }
    if !(t0 < problem.horizon) {
        return Err(Error::InvalidArgument(format!("t0 = {t0} not before the horizon {}", problem.horizon)));
    }
    Ok(((problem.horizon - t0) / cfg.dt).ceil().max(1.0) as usize)
}

/// Inverse-CDF sampling of a one-dimensional band-limited density.
fn sample_1d(m: &SpectralMeasure, u: f64) -> f64 {
    let f = m.field();
    let k0 = f.cutoff() as i64;
    let coeffs: Vec<(i64, C64)> = (1..=k0).map(|k| (k, f.get(&[k]))).collect();
    let cdf = |x: f64| {
        let mut acc = x;
        for &(k, c) in &coeffs {
            // c_k ∫_0^x e^{-i2πky} dy + conjugate
            let w = 2.0 * PI * k as f64;
            let e = C64::from_polar(1.0, -w * x);
            acc += 2.0 * (c * (C64::new(1.0, 0.0) - e) / C64::new(0.0, w)).re;
        }
        acc
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut x = u;
    for _ in 0..100 {
        let g = cdf(x) - u;
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo < 1e-14 {
            break;
        }
        let rho = m.field().eval(&[x]);
        let newton = x - g / rho;
        x = if rho > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    x
}

/// `count` i.i.d. draws from `m`, row-major.
pub fn sample_measure(m: &SpectralMeasure, count: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let d = m.dim();
    let probe = m.field().to_grid((4 * m.cutoff() + 8).max(16))?;
    let min = probe.values().iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-12 {
        return Err(Error::SamplingFailure(format!("density takes the negative value {min:e}")));
    }
    if d == 1 {
        return Ok((0..count).map(|_| sample_1d(m, rng.random_range(0.0..1.0))).collect());
    }
    let bound = m.field().get(&vec![0; d]).re + m.field().oscillation_bound();
    let mut out = Vec::with_capacity(count * d);
    let mut x = vec![0.0; d];
    let mut attempts = 0usize;
    let cap = 1000 * count.max(1);
    while out.len() < count * d {
        attempts += 1;
        if attempts > cap {
            return Err(Error::SamplingFailure(format!("rejection sampler exceeded {cap} proposals")));
        }
        for v in x.iter_mut() {
            *v = rng.random_range(0.0..1.0);
        }
        if rng.random_range(0.0..bound) < m.field().eval(&x) {
            out.extend_from_slice(&x);
        }
    }
    Ok(out)
}

/// Lifted value: particles start i.i.d. from `m` and all follow `feedback`.
pub fn estimate_vhat(problem: &MfcProblem, t0: f64, m: &SpectralMeasure, cfg: &ParticleRunConfig, feedback: &Feedback) -> Result<MCEstimate> {
    let steps = check_problem(problem, t0, cfg, feedback)?;
    if m.dim() != problem.dim() {
        return Err(Error::DimensionMismatch(problem.dim(), m.dim()));
    }
    let h = (problem.horizon - t0) / steps as f64;
    let sigma = cfg.diffusion.sigma();
    let samples = replicate(cfg.replications, cfg.seed, "vhat", |_, rng| {
        let init = sample_measure(m, cfg.particles, rng)?;
        Ok(particle_cost(problem, t0, &init, feedback, steps, h, sigma, rng))
    })?;
    Ok(MCEstimate::from_samples(&samples))
}

#[derive(Clone, Debug)]
pub struct UpperBound {
    pub estimate: MCEstimate,
    pub mfc: MfcSolution,
}

/// N-particle cost from `x` under the optimal mean-field feedback for `m_x^N`.
pub fn estimate_vn_upper(problem: &MfcProblem, t0: f64, x: &[f64], cfg: &ParticleRunConfig, opts: &MfcOptions) -> Result<UpperBound> {
    let d = problem.dim();
    if x.len() != cfg.particles * d {
        return Err(Error::InvalidArgument(format!("{} coordinates for {} particles in dimension {d}", x.len(), cfg.particles)));
    }
    let start: Vec<f64> = x.iter().map(|v| v.rem_euclid(1.0)).collect();
    let m0 = crate::spectral::empirical(&start, d, (opts.resolution - 1) / 2)?;
    let mfc = solve_mfc(problem, t0, &m0, opts)?;
    let estimate = estimate_vn_upper_with(problem, t0, &start, cfg, &Feedback::from_series(&mfc.alpha)?)?;
    Ok(UpperBound { estimate, mfc })
}

/// N-particle cost from `x` under a given feedback.
pub fn estimate_vn_upper_with(problem: &MfcProblem, t0: f64, x: &[f64], cfg: &ParticleRunConfig, feedback: &Feedback) -> Result<MCEstimate> {
    let steps = check_problem(problem, t0, cfg, feedback)?;
    let h = (problem.horizon - t0) / steps as f64;
    let sigma = cfg.diffusion.sigma();
    let start: Vec<f64> = x.iter().map(|v| v.rem_euclid(1.0)).collect();
    let samples = replicate(cfg.replications, cfg.seed, "vn-upper", |_, rng| Ok(particle_cost(problem, t0, &start, feedback, steps, h, sigma, rng)))?;
    Ok(MCEstimate::from_samples(&samples))
}

// ---- Gaussian reference and the Cole-Hopf value ---------------------------------

/// Product-quantile quantization of `𝒩(0, variance·I)`: `per_axis` equal-mass cells per
/// coordinate, each represented by its conditional mean.
#[derive(Clone, Debug)]
pub struct GaussianReference {
    pub cloud: PointCloud,
    /// Upper bound on `d_1(reference, 𝒩)` from the within-cell second moment.
    pub quantization_error: f64,
}

pub fn gaussian_reference(dim: usize, variance: f64, per_axis: usize) -> Result<GaussianReference> {
    if dim == 0 || per_axis == 0 || !(variance > 0.0) {
        return Err(Error::InvalidArgument("need dim ≥ 1, per_axis ≥ 1, variance > 0".into()));
    }
    let total = per_axis
        .checked_pow(dim as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or_else(|| Error::InvalidArgument(format!("{per_axis}^{dim} reference points")))?;
    let std = Normal::standard();
    let sigma = variance.sqrt();
    let q = per_axis as f64;
    let edge = |j: usize| if j == 0 { f64::NEG_INFINITY } else if j == per_axis { f64::INFINITY } else { std.inverse_cdf(j as f64 / q) };
    let dens = |z: f64| if z.is_finite() { std.pdf(z) } else { 0.0 };
    let centers: Vec<f64> = (0..per_axis).map(|j| (dens(edge(j)) - dens(edge(j + 1))) * q).collect();
    // E(Z - c(Z))² = 1 - Σ_j c_j²/Q per standardized axis
    let within = (1.0 - centers.iter().map(|c| c * c).sum::<f64>() / q).max(0.0);
    let mut points = Vec::with_capacity(total * dim);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        points.extend(idx.iter().map(|&j| sigma * centers[j]));
        for v in idx.iter_mut().rev() {
            *v += 1;
            if *v < per_axis {
                break;
            }
            *v = 0;
        }
    }
    let cloud = PointCloud::uniform(dim, points)?;
    Ok(GaussianReference { cloud, quantization_error: sigma * (dim as f64 * within).sqrt() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColeHopfOptions {
    /// Reference cells per axis; `None` picks 512 in d = 1, `⌈√N⌉` in d = 2, 32 in d ≥ 3.
    pub per_axis: Option<usize>,
    pub budget: usize,
    /// Entropic regularization used when the exact problem exceeds the budget; `None` makes that an error.
    pub approx_eps: Option<f64>,
}

impl Default for ColeHopfOptions {
    fn default() -> Self {
        Self { per_axis: None, budget: DEFAULT_LP_BUDGET, approx_eps: None }
    }
}

#[derive(Clone, Debug)]
pub struct ColeHopfEstimate {
    /// Jackknife bias-corrected `-(1/N) log E[e^{-N d_1}]` with its jackknife stderr.
    pub estimate: MCEstimate,
    /// Plug-in value `-(1/N) log(mean)`.
    pub plug_in: f64,
    pub mean_distance: f64,
    pub quantization_error: f64,
    /// Set when the entropic fallback replaced exact transport.
    pub approximate: bool,
}

fn log_mean_exp(v: &[f64]) -> f64 {
    let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + (v.iter().map(|x| (x - top).exp()).sum::<f64>() / v.len() as f64).ln()
}

fn default_per_axis(dim: usize, n: usize) -> usize {
    match dim {
        1 => 512,
        2 => (n as f64).sqrt().ceil() as usize,
        _ => 32,
    }
}

fn distance_to_reference(sample: &PointCloud, reference: &GaussianReference, opts: &ColeHopfOptions) -> Result<(f64, bool)> {
    if sample.dim() == 1 {
        return Ok((w1_line(sample, &reference.cloud)?, false));
    }
    match w1_discrete_with_budget(sample, &reference.cloud, Metric::Euclidean, opts.budget) {
        Err(Error::BudgetExceeded { .. }) if opts.approx_eps.is_some() => {
            Ok((w1_approx(sample, &reference.cloud, Metric::Euclidean, opts.approx_eps.expect("checked"))?, true))
        }
        other => other.map(|v| (v, false)),
    }
}

/// `V^N(0,0) = -(1/N) log E[exp(-N d_1(m_ξ^N, 𝒩_T))]` with `ξ^i` i.i.d. `𝒩(0, T·I)`.
pub fn cole_hopf_vn(cfg: &ParticleRunConfig, horizon: f64, dim: usize, opts: &ColeHopfOptions) -> Result<ColeHopfEstimate> {
    cfg.validate()?;
    if horizon < 1.0 / (2.0 * PI) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} below 1/(2π)")));
    }
    let n = cfg.particles;
    let reference = gaussian_reference(dim, horizon, opts.per_axis.unwrap_or_else(|| default_per_axis(dim, n)))?;
    let entries = n * reference.cloud.len();
    if dim > 1 && entries > opts.budget && opts.approx_eps.is_none() {
        return Err(Error::BudgetExceeded { entries, budget: opts.budget });
    }
    let sigma = horizon.sqrt();
    let runs = replicate(cfg.replications, cfg.seed, "cole-hopf", |_, rng| {
        let pts: Vec<f64> = (0..n * dim).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        distance_to_reference(&PointCloud::uniform(dim, pts)?, &reference, opts)
    })?;
    let approximate = runs.iter().any(|r| r.1);
    let dists: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let m = dists.len();
    let expo: Vec<f64> = dists.iter().map(|d| -(n as f64) * d).collect();
    let value = |v: &[f64]| -log_mean_exp(v) / n as f64;
    let plug_in = value(&expo);
    let estimate = if m > 1 {
        let loo: Vec<f64> = (0..m)
            .map(|i| {
                let rest: Vec<f64> = expo.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                value(&rest)
            })
            .collect();
        let avg = loo.iter().sum::<f64>() / m as f64;
        let var = loo.iter().map(|v| (v - avg) * (v - avg)).sum::<f64>() * (m - 1) as f64 / m as f64;
        MCEstimate { mean: m as f64 * plug_in - (m - 1) as f64 * avg, stderr: var.sqrt(), replications: m }
    } else {
        MCEstimate { mean: plug_in, stderr: 0.0, replications: 1 }
    };
    Ok(ColeHopfEstimate {
        estimate,
        plug_in,
        mean_distance: dists.iter().sum::<f64>() / m as f64,
        quantization_error: reference.quantization_error,
        approximate,
    })
}

// ---- coupon collector -----------------------------------------------------------

#[derive(Clone, Debug)]
pub struct CouponStats {
    pub occupied_fraction: MCEstimate,
    /// Empirical probability of more than `(1-p)N` occupied cells.
    pub prob_bpn: MCEstimate,
    /// `1 - (1 - 1/N)^N`.
    pub exact_fraction: f64,
    /// `log P[B_{p,N}]` from the exact occupancy distribution.
    pub exact_log_prob_bpn: f64,
}

/// `log P[exactly j cells occupied after N draws into N cells]`, `j = 0..=N`.
pub fn occupancy_log_distribution(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut lp = vec![f64::NEG_INFINITY; n + 1];
    lp[0] = 0.0;
    for t in 0..n {
        // after t draws at most t cells are occupied
        for j in (1..=(t + 1).min(n)).rev() {
            let stay = lp[j] + (j as f64 / nf).ln();
            let grow = lp[j - 1] + ((nf - j as f64 + 1.0) / nf).ln();
            lp[j] = log_add(stay, grow);
        }
        lp[0] = f64::NEG_INFINITY;
    }
    lp
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn coupon_occupancy(n: usize, trials: usize, p: f64, seed: u64) -> Result<CouponStats> {
    if n == 0 || trials == 0 {
        return Err(Error::InvalidArgument("need N ≥ 1 and at least one trial".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} outside (0,1)")));
    }
    let threshold = (1.0 - p) * n as f64;
    let runs = replicate(trials, seed, "coupon", |_, rng| {
        let mut hit = vec![false; n];
        let mut count = 0usize;
        for _ in 0..n {
            let c = rng.random_range(0..n);
            if !hit[c] {
                hit[c] = true;
                count += 1;
            }
        }
        Ok((count as f64 / n as f64, if count as f64 > threshold { 1.0 } else { 0.0 }))
    })?;
    let fractions: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let events: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let dist = occupancy_log_distribution(n);
    let exact_log_prob_bpn = dist.iter().enumerate().filter(|(j, _)| *j as f64 > threshold).fold(f64::NEG_INFINITY, |acc, (_, &l)| log_add(acc, l));
    Ok(CouponStats {
        occupied_fraction: MCEstimate::from_samples(&fractions),
        prob_bpn: MCEstimate::from_samples(&events),
        exact_fraction: -(n as f64 * (-1.0 / n as f64).ln_1p()).exp_m1(),
        exact_log_prob_bpn,
    })
}

// ---- empirical d_1 rates --------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampler {
    UniformTorus,
    Gaussian { variance: f64 },
}

#[derive(Clone, Debug)]
pub struct W1Rate {
    pub cells: Vec<(usize, MCEstimate)>,
    pub fit: RateFit,
}

/// `E d_1(m^N, reference)` for one `N`. The uniform torus reference is exact in d = 1 and an
/// independent `N`-sample (torus metric) in higher dimension; Gaussian targets use [`gaussian_reference`].
pub fn empirical_w1(dim: usize, sampler: Sampler, n: usize, replications: usize, seed: u64, budget: usize) -> Result<MCEstimate> {
    if dim == 0 || n == 0 || replications == 0 {
        return Err(Error::InvalidArgument("need dim, N and M at least 1".into()));
    }
    let label = format!("w1-{dim}-{n}");
    let samples = match sampler {
        Sampler::UniformTorus => {
            if dim > 1 && n * n > budget {
                return Err(Error::BudgetExceeded { entries: n * n, budget });
            }
            replicate(replications, seed, &label, |_, rng| {
                let pts: Vec<f64> = (0..n * dim).map(|_| rng.random_range(0.0..1.0)).collect();
                if dim == 1 {
                    let w = vec![1.0 / n as f64; n];
                    return w1_circle(CircleMeasure::Atoms { positions: &pts, weights: &w }, CircleMeasure::Uniform);
                }
                let other: Vec<f64> = (0..n * dim).map(|_| rng.random_range(0.0..1.0)).collect();
                w1_discrete_with_budget(&PointCloud::uniform(dim, pts)?, &PointCloud::uniform(dim, other)?, Metric::Torus, budget)
            })?
        }
        Sampler::Gaussian { variance } => {
            let reference = gaussian_reference(dim, variance, default_per_axis(dim, n))?;
            let opts = ColeHopfOptions { per_axis: None, budget, approx_eps: None };
            let sigma = variance.sqrt();
            replicate(replications, seed, &label, |_, rng| {
                let pts: Vec<f64> = (0..n * dim).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
                Ok(distance_to_reference(&PointCloud::uniform(dim, pts)?, &reference, &opts)?.0)
            })?
        }
    };
    Ok(MCEstimate::from_samples(&samples))
}

/// Fits `log E d_1` against `log N`.
pub fn empirical_w1_rate(dim: usize, sampler: Sampler, n_list: &[usize], replications: usize, seed: u64, budget: usize) -> Result<W1Rate> {
    let cells = n_list
        .iter()
        .map(|&n| empirical_w1(dim, sampler, n, replications, seed, budget).map(|e| (n, e)))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_loglog(&cells.iter().map(|(n, e)| (*n as f64, e.mean)).collect::<Vec<_>>())?;
    Ok(W1Rate { cells, fit })
}
