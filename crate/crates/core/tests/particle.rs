use std::f64::consts::PI;
use std::sync::Arc;

use mfc_core::fit::fit_loglog;
use mfc_core::functionals::*;
use mfc_core::particle::*;
use mfc_core::pde::*;
use mfc_core::rng::{random_measure, stream_rng};
use mfc_core::spectral::*;
use mfc_core::transport::{w1_line, PointCloud};
use mfc_core::Error;

fn cos_field(cutoff: usize, k: i64, amp: f64) -> SpectralField {
    let mut f = SpectralField::zeros(1, cutoff);
    f.set(&[k], C64::new(amp / 2.0, 0.0));
    f.set(&[-k], C64::new(amp / 2.0, 0.0));
    f
}

fn sin_field(cutoff: usize, k: i64, amp: f64) -> SpectralField {
    // sin(2πkx) = (e^{i2πkx} - e^{-i2πkx}) / 2i, and e^{-i2πkx} carries index k
    let mut f = SpectralField::zeros(1, cutoff);
    f.set(&[k], C64::new(0.0, amp / 2.0));
    f.set(&[-k], C64::new(0.0, -amp / 2.0));
    f
}

fn zero() -> SharedFunctional {
    Arc::new(ConstantFunctional { dim: 1, value: 0.0 })
}

fn convex_problem(horizon: f64) -> MfcProblem {
    let f: SharedFunctional = Arc::new(CylindricalFunctional::square(cos_field(2, 1, 1.0), 1.0).unwrap());
    let g: SharedFunctional = Arc::new(CylindricalFunctional::square(cos_field(2, 1, 0.5).add(&cos_field(2, 2, 0.5)).unwrap(), 2.0).unwrap());
    MfcProblem::new(HamiltonianSpec::quadratic(1), f, g, horizon).unwrap()
}

fn quick_mfc() -> MfcOptions {
    MfcOptions { resolution: 32, steps: 100, ..MfcOptions::default() }
}

/// Deterministic, clustered initial configuration.
fn clustered(n: usize) -> Vec<f64> {
    (0..n).map(|i| {
        let u = (i as f64 + 0.5) / n as f64;
        (0.3 + 0.5 * u - 0.05 * (2.0 * PI * u).sin()).rem_euclid(1.0)
    }).collect()
}

fn agree(a: &MCEstimate, b: &MCEstimate, sigmas: f64) -> bool {
    (a.mean - b.mean).abs() <= sigmas * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}

// ---- lifted value ------------------------------------------------------------

#[test]
fn zero_costs_give_zero() {
    let problem = MfcProblem::new(HamiltonianSpec::quadratic(1), zero(), zero(), 1.0).unwrap();
    let cfg = ParticleRunConfig::new(8, 20, 1.0, 1);
    let m = random_measure(&mut stream_rng(1, 1, 0), 1, 3, 0.5, 1.0);
    let e = estimate_vhat(&problem, 0.0, &m, &cfg, &Feedback::zero(1)).unwrap();
    assert_eq!((e.mean, e.stderr, e.replications), (0.0, 0.0, 20));
    let u = estimate_vn_upper(&problem, 0.0, &clustered(8), &cfg, &quick_mfc()).unwrap();
    assert_eq!(u.estimate.mean, 0.0);
    assert_eq!(u.mfc.value, 0.0);
}

#[test]
fn linear_terminal_cost_matches_heat_flow() {
    let (a, b, t) = (0.8, -0.6, 0.02);
    let phi = cos_field(1, 1, a).add(&sin_field(1, 1, b)).unwrap();
    let g: SharedFunctional = Arc::new(CylindricalFunctional::linear(phi).unwrap());
    let problem = MfcProblem::new(HamiltonianSpec::quadratic(1), zero(), g, t).unwrap();
    let m = random_measure(&mut stream_rng(2, 1, 0), 1, 3, 0.7, 1.0);
    let cfg = ParticleRunConfig::new(16, 400, t, 2);
    let e = estimate_vhat(&problem, 0.0, &m, &cfg, &Feedback::zero(1)).unwrap();
    // ∫cos(2πx) dm = Re m̂¹ and ∫sin(2πx) dm = Im m̂¹ with m̂^k = ∫e^{i2πkx} dm
    let mk = m.coeff(&[1]);
    let oracle = (-4.0 * PI * PI * t).exp() * (a * mk.re + b * mk.im);
    assert!((e.mean - oracle).abs() < 3.0 * e.stderr, "{} ± {} vs {oracle}", e.mean, e.stderr);
    assert!(e.stderr < 0.01);
}

#[test]
fn sampler_reproduces_low_moments() {
    let mut rng = stream_rng(3, 1, 0);
    let m = random_measure(&mut rng, 1, 3, 0.9, 0.5);
    let xs = sample_measure(&m, 20_000, &mut rng).unwrap();
    for k in 1..=3 {
        let c = m.coeff(&[k]);
        let (mut re, mut im) = (0.0, 0.0);
        for x in &xs {
            re += (2.0 * PI * k as f64 * x).cos();
            im += (2.0 * PI * k as f64 * x).sin();
        }
        let n = xs.len() as f64;
        // each mean has stderr at most 1/√(2n)
        assert!((re / n - c.re).abs() < 4.0 / (2.0 * n).sqrt() && (im / n - c.im).abs() < 4.0 / (2.0 * n).sqrt(), "k={k}");
    }
    let m2 = random_measure(&mut rng, 2, 2, 0.9, 1.0);
    let ys = sample_measure(&m2, 20_000, &mut rng).unwrap();
    let c = m2.coeff(&[1, 0]);
    let re: f64 = ys.chunks(2).map(|p| (2.0 * PI * p[0]).cos()).sum::<f64>() / 20_000.0;
    assert!((re - c.re).abs() < 4.0 / 200.0);
    let mut bad = SpectralField::zeros(1, 1);
    bad.set(&[0], C64::new(1.0, 0.0));
    bad.set(&[1], C64::new(0.9, 0.0));
    bad.set(&[-1], C64::new(0.9, 0.0));
    let bad = SpectralMeasure::from_field(bad).unwrap();
    assert!(matches!(sample_measure(&bad, 10, &mut rng), Err(Error::SamplingFailure(_))));
}

#[test]
fn estimates_are_bit_identical_across_thread_counts() {
    let problem = convex_problem(0.5);
    let m = random_measure(&mut stream_rng(4, 1, 0), 1, 3, 0.5, 1.0);
    let cfg = ParticleRunConfig::new(8, 16, 0.5, 9);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| estimate_vhat(&problem, 0.0, &m, &cfg, &Feedback::zero(1)).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    let c = estimate_vhat(&problem, 0.0, &m, &ParticleRunConfig { seed: 10, ..cfg.clone() }, &Feedback::zero(1)).unwrap();
    assert_ne!(a.mean, c.mean);
}

#[test]
fn invalid_configurations_are_rejected() {
    let problem = convex_problem(0.5);
    let m = SpectralMeasure::lebesgue(1, 2);
    for cfg in [
        ParticleRunConfig { particles: 0, ..ParticleRunConfig::new(4, 4, 0.5, 0) },
        ParticleRunConfig { replications: 0, ..ParticleRunConfig::new(4, 4, 0.5, 0) },
        ParticleRunConfig { dt: 0.0, ..ParticleRunConfig::new(4, 4, 0.5, 0) },
    ] {
        assert!(estimate_vhat(&problem, 0.0, &m, &cfg, &Feedback::zero(1)).is_err());
    }
    let cfg = ParticleRunConfig::new(4, 4, 0.5, 0);
    assert!(matches!(estimate_vhat(&problem, 0.0, &m, &cfg, &Feedback::zero(2)), Err(Error::DimensionMismatch(..))));
    assert!(estimate_vn_upper(&problem, 0.0, &[0.1, 0.2], &cfg, &quick_mfc()).is_err());
}

// ---- upper bound on V^N ----------------------------------------------------------

#[test]
fn convex_upper_bound_lies_above_mfc_value_and_gap_shrinks() {
    let problem = convex_problem(1.0);
    let mut pts = Vec::new();
    for n in [8usize, 16, 32, 64] {
        let cfg = ParticleRunConfig::new(n, 200, 1.0, 11);
        let ub = estimate_vn_upper(&problem, 0.0, &clustered(n), &cfg, &quick_mfc()).unwrap();
        assert!(ub.mfc.certified);
        let gap = ub.estimate.mean - ub.mfc.value;
        assert!(gap >= -3.0 * ub.estimate.stderr, "N={n}: gap {gap} stderr {}", ub.estimate.stderr);
        pts.push((n as f64, gap));
    }
    let fit = fit_loglog(&pts).unwrap();
    assert!(fit.slope <= -0.4, "gap slope {}", fit.slope);
}

#[test]
fn upper_bound_is_exchangeable() {
    let problem = convex_problem(0.5);
    let x = clustered(12);
    let mut rev = x.clone();
    rev.reverse();
    rev.rotate_left(5);
    let cfg = ParticleRunConfig::new(12, 300, 0.5, 12);
    let a = estimate_vn_upper(&problem, 0.0, &x, &cfg, &quick_mfc()).unwrap();
    let b = estimate_vn_upper(&problem, 0.0, &rev, &cfg, &quick_mfc()).unwrap();
    assert!((a.mfc.value - b.mfc.value).abs() < 1e-10);
    assert!(agree(&a.estimate, &b.estimate, 4.0), "{:?} vs {:?}", a.estimate, b.estimate);
}

#[test]
fn halving_the_time_step_is_consistent() {
    let problem = convex_problem(0.5);
    let x = clustered(16);
    let ub = estimate_vn_upper(&problem, 0.0, &x, &ParticleRunConfig::new(16, 300, 0.5, 13), &quick_mfc()).unwrap();
    let feedback = Feedback::from_series(&ub.mfc.alpha).unwrap();
    let half = ParticleRunConfig { dt: 0.5 / 400.0, ..ParticleRunConfig::new(16, 300, 0.5, 14) };
    let fine = estimate_vn_upper_with(&problem, 0.0, &x, &half, &feedback).unwrap();
    assert!(agree(&ub.estimate, &fine, 4.0), "{:?} vs {:?}", ub.estimate, fine);
}

// ---- Gaussian reference and Cole-Hopf ----------------------------------------------

#[test]
fn gaussian_reference_is_centered_and_bounded() {
    for (dim, per_axis) in [(1, 512), (2, 16), (3, 6)] {
        let r = gaussian_reference(dim, 0.5, per_axis).unwrap();
        assert_eq!(r.cloud.len(), per_axis.pow(dim as u32));
        for a in 0..dim {
            let mean: f64 = (0..r.cloud.len()).map(|i| r.cloud.point(i)[a]).sum::<f64>() / r.cloud.len() as f64;
            assert!(mean.abs() < 1e-12);
            let var: f64 = (0..r.cloud.len()).map(|i| r.cloud.point(i)[a].powi(2)).sum::<f64>() / r.cloud.len() as f64;
            // conditional means lose exactly the within-cell variance
            assert!(var < 0.5 && 0.5 - var <= (r.quantization_error.powi(2) / dim as f64) * (1.0 + 1e-9), "dim {dim}");
        }
    }
    let coarse = gaussian_reference(1, 1.0, 64).unwrap();
    let fine = gaussian_reference(1, 1.0, 512).unwrap();
    assert!(fine.quantization_error < coarse.quantization_error);
    // against a 200k-point quantile sample of 𝒩(0,1) the exact line distance stays under the bound
    let dense: Vec<f64> = {
        let n = 200_000;
        let cloud = gaussian_reference(1, 1.0, n).unwrap().cloud;
        cloud.points().to_vec()
    };
    let d = w1_line(&fine.cloud, &PointCloud::uniform(1, dense).unwrap()).unwrap();
    assert!(d <= fine.quantization_error, "{d} > {}", fine.quantization_error);
}

/// `-log ∫ exp(-E|ξ - Z|) 𝒩_T(dξ)` by nested trapezoid quadrature.
fn single_particle_oracle(t: f64) -> f64 {
    let s = t.sqrt();
    let n = 2000;
    let grid: Vec<(f64, f64)> = (0..=n)
        .map(|j| {
            let z = -9.0 + 18.0 * j as f64 / n as f64;
            let w = if j == 0 || j == n { 0.5 } else { 1.0 } * 18.0 / n as f64;
            (s * z, w * (-z * z / 2.0).exp() / (2.0 * PI).sqrt())
        })
        .collect();
    let d1 = |x: f64| grid.iter().map(|(z, w)| w * (x - z).abs()).sum::<f64>();
    -grid.iter().map(|(x, w)| w * (-d1(*x)).exp()).sum::<f64>().ln()
}

#[test]
fn single_particle_cole_hopf_matches_quadrature() {
    let t = 0.3;
    let cfg = ParticleRunConfig { diffusion: Diffusion::Unit, ..ParticleRunConfig::new(1, 4000, t, 15) };
    let e = cole_hopf_vn(&cfg, t, 1, &ColeHopfOptions::default()).unwrap();
    let oracle = single_particle_oracle(t);
    assert!(!e.approximate);
    assert!((e.estimate.mean - oracle).abs() < 3.0 * e.estimate.stderr + e.quantization_error, "{:?} vs {oracle}", e.estimate);
}

#[test]
fn cole_hopf_values_are_positive_and_decreasing() {
    let t = 1.0 / (2.0 * PI);
    let mut prev = f64::INFINITY;
    for n in [4usize, 16, 64] {
        let cfg = ParticleRunConfig { diffusion: Diffusion::Unit, ..ParticleRunConfig::new(n, 60, t, 16) };
        let e = cole_hopf_vn(&cfg, t, 2, &ColeHopfOptions::default()).unwrap();
        assert!(e.estimate.mean > 0.0 && e.plug_in > 0.0);
        assert!(e.plug_in <= e.mean_distance + 1e-12, "Jensen: -log E e^(-Nd)/N ≤ E d");
        assert!(e.estimate.mean < prev);
        prev = e.estimate.mean;
    }
}

#[test]
fn cole_hopf_preconditions_and_fallback() {
    let cfg = ParticleRunConfig { diffusion: Diffusion::Unit, ..ParticleRunConfig::new(16, 4, 1.0, 17) };
    assert!(cole_hopf_vn(&cfg, 0.1, 1, &ColeHopfOptions::default()).is_err());
    let tight = ColeHopfOptions { per_axis: Some(8), budget: 100, approx_eps: None };
    assert!(matches!(cole_hopf_vn(&cfg, 1.0, 2, &tight), Err(Error::BudgetExceeded { .. })));
    let fallback = ColeHopfOptions { approx_eps: Some(0.05), ..tight };
    let approx = cole_hopf_vn(&cfg, 1.0, 2, &fallback).unwrap();
    assert!(approx.approximate);
    let exact = cole_hopf_vn(&cfg, 1.0, 2, &ColeHopfOptions { per_axis: Some(8), ..ColeHopfOptions::default() }).unwrap();
    assert!(!exact.approximate);
    // the rounded entropic plan is feasible, so its cost bounds the exact distance from above
    assert!(approx.mean_distance >= exact.mean_distance - 1e-12);
}

// ---- coupon collector ----------------------------------------------------------------

#[test]
fn single_cell_is_always_hit() {
    let s = coupon_occupancy(1, 50, 0.3, 1).unwrap();
    assert_eq!(s.occupied_fraction.mean, 1.0);
    assert_eq!(s.prob_bpn.mean, 1.0);
    assert_eq!(s.exact_log_prob_bpn, 0.0);
}

#[test]
fn occupancy_distribution_matches_enumeration() {
    for n in 1..=5usize {
        let mut counts = vec![0u64; n + 1];
        let total = n.pow(n as u32);
        for code in 0..total {
            let mut seen = vec![false; n];
            let mut c = code;
            for _ in 0..n {
                seen[c % n] = true;
                c /= n;
            }
            counts[seen.iter().filter(|&&s| s).count()] += 1;
        }
        let lp = occupancy_log_distribution(n);
        for j in 0..=n {
            let p = counts[j] as f64 / total as f64;
            assert!((lp[j].exp() - p).abs() < 1e-13, "n={n} j={j}");
        }
    }
}

#[test]
fn large_occupancy_matches_exact_fraction() {
    let n = 10_000;
    let s = coupon_occupancy(n, 200, 0.05, 2).unwrap();
    let exact = 1.0 - (1.0 - 1.0 / n as f64).powi(n as i32);
    assert!((s.exact_fraction - exact).abs() < 1e-12);
    assert!((s.occupied_fraction.mean - 0.6321).abs() < 0.01);
    assert!((s.occupied_fraction.mean - exact).abs() < 4.0 * s.occupied_fraction.stderr + 1e-12);
    assert_eq!(s.prob_bpn.mean, 0.0);
    let lp = occupancy_log_distribution(2000);
    let mean: f64 = lp.iter().enumerate().map(|(j, l)| j as f64 * l.exp()).sum::<f64>() / 2000.0;
    assert!((mean - (1.0 - (1.0 - 1.0 / 2000f64).powi(2000))).abs() < 1e-10);
}

#[test]
fn high_occupancy_probability_decays() {
    let mut prev = 0.0;
    for n in [10usize, 30, 100, 300] {
        let s = coupon_occupancy(n, 10, 0.05, 3).unwrap();
        assert!(s.exact_log_prob_bpn < prev, "N={n}");
        prev = s.exact_log_prob_bpn;
    }
    // a loose threshold is hit often enough to compare simulation with the exact law
    let s = coupon_occupancy(20, 4000, 0.4, 4).unwrap();
    let p = s.exact_log_prob_bpn.exp();
    assert!((s.prob_bpn.mean - p).abs() < 4.0 * (p * (1.0 - p) / 4000.0).sqrt());
}

// ---- empirical d_1 rates ---------------------------------------------------------------

#[test]
fn one_dimensional_uniform_rate() {
    let r = empirical_w1_rate(1, Sampler::UniformTorus, &[16, 64, 256, 1024], 100, 5, 1 << 22).unwrap();
    assert!((r.fit.slope + 0.5).abs() < 0.07, "slope {}", r.fit.slope);
}

#[test]
fn stderr_follows_clt_scaling() {
    let a = empirical_w1(1, Sampler::UniformTorus, 64, 400, 6, 1 << 22).unwrap();
    let b = empirical_w1(1, Sampler::UniformTorus, 64, 1600, 6, 1 << 22).unwrap();
    let ratio = a.stderr / b.stderr;
    assert!((ratio / 2.0 - 1.0).abs() < 0.2, "{ratio}");
}

#[test]
fn multidimensional_samplers_respect_budget() {
    assert!(matches!(empirical_w1(3, Sampler::UniformTorus, 100, 2, 7, 1000), Err(Error::BudgetExceeded { .. })));
    let g = empirical_w1(2, Sampler::Gaussian { variance: 1.0 }, 16, 10, 7, 1 << 22).unwrap();
    assert!(g.mean > 0.0);
    let u = empirical_w1(2, Sampler::UniformTorus, 16, 10, 7, 1 << 22).unwrap();
    // two-sample torus distance never exceeds the torus diameter
    assert!(u.mean > 0.0 && u.mean <= 2f64.sqrt() / 2.0);
}
