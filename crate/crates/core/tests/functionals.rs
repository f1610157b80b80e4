use std::f64::consts::PI;

use mfc_core::functionals::*;
use mfc_core::rng::{random_measure, random_trig, stream_rng};
use mfc_core::spectral::*;
use mfc_core::transport::{w1_circle, CircleMeasure, PointCloud};
use mfc_core::Error;
use proptest::prelude::*;
use rand::Rng;

fn cos_field(cutoff: usize, k: i64, amp: f64) -> SpectralField {
    let mut f = SpectralField::zeros(1, cutoff);
    f.set(&[k], C64::new(amp / 2.0, 0.0));
    f.set(&[-k], C64::new(amp / 2.0, 0.0));
    f
}

fn w1(a: &SpectralMeasure, b: &SpectralMeasure) -> f64 {
    w1_circle(CircleMeasure::Spectral(a.field()), CircleMeasure::Spectral(b.field())).unwrap()
}

fn random_points(seed: u64, n: usize, dim: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, 7, 0);
    (0..n * dim).map(|_| rng.random_range(0.0..1.0)).collect()
}

#[test]
fn linear_intrinsic_gradient_is_minus_two_pi_sine() {
    let phi = CylindricalFunctional::linear(cos_field(3, 1, 1.0)).unwrap();
    for seed in 0..3 {
        let m = random_measure(&mut stream_rng(seed, 1, 0), 1, 3, 0.8, 1.0);
        let g = &intrinsic_gradient(&phi, &m).unwrap()[0];
        for j in 0..17 {
            let x = j as f64 / 17.0;
            assert!((g.eval(&[x]) + 2.0 * PI * (2.0 * PI * x).sin()).abs() < 1e-12);
        }
    }
}

#[test]
fn constant_functional_has_zero_gradient() {
    let phi = ConstantFunctional { dim: 2, value: 3.0 };
    let m = random_measure(&mut stream_rng(2, 1, 0), 2, 2, 0.5, 1.0);
    for g in intrinsic_gradient(&phi, &m).unwrap() {
        assert!(g.coeffs().iter().all(|c| c.norm() == 0.0));
    }
    assert_eq!(project(&phi, &[0.1, 0.2, 0.7, 0.3]), 3.0);
}

#[test]
fn distance_cost_has_no_derivative() {
    let target = random_measure(&mut stream_rng(3, 1, 0), 1, 4, 0.6, 1.0);
    let phi = DistanceCostFunctional::torus(DistanceTarget::Spectral(target), 4).unwrap();
    let m = SpectralMeasure::lebesgue(1, 4);
    assert!(matches!(intrinsic_gradient(&phi, &m), Err(Error::NoDerivative)));
    assert!(matches!(projection_gradient_check(&phi, &[0.1, 0.4], 0, 1e-4), Err(Error::NoDerivative)));
    assert!(matches!(laplacian_residual(&phi, &[0.1, 0.4], 0, 1e-3), Err(Error::NoDerivative)));
}

// Oracle: central differences in t of Φ(m + t(δ_y - m)) give δΦ/δm(m,y) - ∫δΦ/δm dm;
// a second central difference in y recovers D_mΦ(m,y).
#[test]
fn square_intrinsic_gradient_matches_dirac_perturbations() {
    let cutoff = 3;
    let phi = CylindricalFunctional::square(cos_field(cutoff, 1, 1.0).add(&cos_field(cutoff, 2, 0.5)).unwrap(), 1.5).unwrap();
    let m = random_measure(&mut stream_rng(4, 1, 0), 1, cutoff, 0.8, 1.0);
    let grad = &intrinsic_gradient(&phi, &m).unwrap()[0];
    let flat = |y: f64| {
        let dirac = empirical(&[y], 1, cutoff).unwrap();
        let t = 1e-5;
        let plus = phi.evaluate(&m.mix(&dirac, t).unwrap());
        let minus = phi.evaluate(&m.mix(&dirac, -t).unwrap());
        (plus - minus) / (2.0 * t)
    };
    for y in [0.05, 0.3, 0.55, 0.81] {
        let h = 1e-3;
        let fd = (flat(y + h) - flat(y - h)) / (2.0 * h);
        assert!((fd - grad.eval(&[y])).abs() < 1e-4 * (1.0 + fd.abs()), "y={y}: {fd} vs {}", grad.eval(&[y]));
    }
}

#[test]
fn projection_examples() {
    let mass = ConstantFunctional { dim: 1, value: 1.0 };
    let x = random_points(5, 9, 1);
    assert_eq!(project(&mass, &x), 1.0);
    let f = cos_field(2, 1, 1.0).add(&cos_field(2, 2, 0.3)).unwrap();
    let lin = CylindricalFunctional::linear(f.clone()).unwrap();
    let mean = x.iter().map(|&v| f.eval(&[v])).sum::<f64>() / 9.0;
    assert!((project(&lin, &x) - mean).abs() < 1e-13);
    let sq = CylindricalFunctional::square(f, 1.0).unwrap();
    let mut rev = x.clone();
    rev.reverse();
    rev.swap(1, 4);
    assert!((project(&sq, &x) - project(&sq, &rev)).abs() < 1e-14);
    let m = empirical(&x, 1, 2).unwrap();
    assert!((sq.evaluate(&m) - project(&sq, &x)).abs() < 1e-13);
}

#[test]
fn projection_gradient_identity_linear() {
    let lin = CylindricalFunctional::linear(cos_field(2, 1, 1.0).add(&cos_field(2, 2, 0.4)).unwrap()).unwrap();
    let x = random_points(6, 12, 1);
    for i in [0, 5, 11] {
        assert!(projection_gradient_check(&lin, &x, i, 1e-5).unwrap().discrepancy < 1e-8);
    }
    // N = 1: D_xΦ¹(x) = D_mΦ(δ_x, x)
    let lin = CylindricalFunctional::linear(cos_field(1, 1, 1.0)).unwrap();
    let c = projection_gradient_check(&lin, &[0.37], 0, 1e-5).unwrap();
    let exact = -2.0 * PI * (2.0 * PI * 0.37f64).sin();
    assert!((c.analytic[0] - exact).abs() < 1e-12);
    assert!(c.discrepancy < 1e-8);
}

#[test]
fn projection_gradient_identity_two_dimensional() {
    let mut rng = stream_rng(7, 1, 0);
    let tests = vec![random_trig(&mut rng, 2, 2, 1.0), random_trig(&mut rng, 2, 2, 1.0)];
    let outer = OuterMap::new(|y| y[0] * y[1] + y[0].sin(), |y| vec![y[1] + y[0].cos(), y[0]]);
    let phi = CylindricalFunctional::new(tests, outer).unwrap();
    let x = random_points(8, 6, 2);
    let c = projection_gradient_check(&phi, &x, 3, 1e-5).unwrap();
    assert!(c.discrepancy < 1e-8, "{c:?}");
}

#[test]
fn projection_gradient_discrepancy_is_second_order() {
    let phi = CylindricalFunctional::square(cos_field(2, 1, 1.0).add(&cos_field(2, 2, 0.5)).unwrap(), 1.0).unwrap();
    let x = random_points(9, 8, 1);
    let steps = [2e-2, 1e-2, 5e-3, 2.5e-3];
    let disc: Vec<f64> = steps.iter().map(|&h| projection_gradient_check(&phi, &x, 2, h).unwrap().discrepancy).collect();
    let slope = ols_slope(&steps.map(f64::ln), &disc.iter().map(|d| d.ln()).collect::<Vec<_>>());
    assert!((slope - 2.0).abs() < 0.3, "slope {slope}, {disc:?}");
}

fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn laplacian_residual_vanishes_for_linear() {
    let lin = CylindricalFunctional::linear(cos_field(2, 1, 1.0)).unwrap();
    let x = random_points(10, 16, 1);
    let r = laplacian_residual(&lin, &x, 4, 1e-4).unwrap();
    // the only error left is the O(h²) truncation of the second difference, magnified by N²
    assert!(r.raw.abs() < 1e-6, "{r:?}");
}

// Oracle: Φ = (m(φ))² has second flat derivative 2φ(y)φ(y'), so N²·raw = 2φ'(x^i)².
#[test]
fn laplacian_residual_square_matches_closed_form() {
    let phi_t = cos_field(1, 1, 1.0);
    let phi = CylindricalFunctional::square(phi_t.clone(), 1.0).unwrap();
    let x = random_points(11, 8, 1);
    for i in [0, 3, 7] {
        let r = laplacian_residual(&phi, &x, i, 1e-3).unwrap();
        let d = phi_t.derivative(0).eval(&[x[i]]);
        let exact = 2.0 * d * d;
        assert!((r.scaled - exact).abs() < 1e-3 * (1.0 + exact), "i={i}: {} vs {exact}", r.scaled);
    }
}

#[test]
fn laplacian_residual_bounded_uniformly_in_n() {
    let phi = CylindricalFunctional::square(cos_field(2, 1, 1.0).add(&cos_field(2, 2, 0.5)).unwrap(), 1.0).unwrap();
    let bound = phi.residual_bound().unwrap();
    let mut worst = 0.0f64;
    for (j, n) in [4usize, 16, 64, 256].into_iter().enumerate() {
        let x = random_points(12 + j as u64, n, 1);
        for i in [0, n / 2, n - 1] {
            worst = worst.max(laplacian_residual(&phi, &x, i, 1e-3).unwrap().scaled);
        }
    }
    assert!(worst <= 1.2 * bound, "{worst} vs {bound}");
}

#[test]
fn step_underflow_is_reported() {
    let phi = CylindricalFunctional::linear(cos_field(1, 1, 1.0)).unwrap();
    for h in [0.0, 1e-300, -1e-3] {
        assert!(matches!(laplacian_residual(&phi, &[0.2, 0.6], 0, h), Err(Error::StepUnderflow(_))));
        assert!(matches!(projection_gradient_check(&phi, &[0.2, 0.6], 0, h), Err(Error::StepUnderflow(_))));
    }
}

#[test]
fn semiconcavity_examples() {
    let lin = CylindricalFunctional::linear(cos_field(3, 1, 1.0)).unwrap();
    assert!(check_semiconcavity(&lin, SemiconcavityMetric::D1, 40, 1).unwrap() < 1e-9);
    // ‖φ‖_Lip = 1
    let sq = CylindricalFunctional::square(cos_field(3, 1, 1.0 / (2.0 * PI)), 1.0).unwrap();
    let c = check_semiconcavity(&sq, SemiconcavityMetric::D1, 40, 2).unwrap();
    assert!(c > 0.0 && c <= 2.0 + 1e-9, "{c}");
    let s = SobolevWeight::new(1.0).unwrap();
    let ch = check_semiconcavity(&sq, SemiconcavityMetric::Hs(s), 40, 3).unwrap();
    assert!(ch <= sq.semiconcavity_hs(&s).unwrap() * (1.0 + 1e-9), "{ch}");
    let concave = CylindricalFunctional::square(cos_field(3, 1, 1.0), -1.0).unwrap();
    assert!(check_semiconcavity(&concave, SemiconcavityMetric::D1, 40, 4).unwrap() < 1e-9);
}

#[test]
fn distance_cost_evaluates_and_is_one_lipschitz() {
    let mut rng = stream_rng(13, 1, 0);
    let target = random_measure(&mut rng, 1, 4, 0.9, 1.0);
    let phi = DistanceCostFunctional::torus(DistanceTarget::Spectral(target.clone()), 4).unwrap();
    assert_eq!(phi.lipschitz_d1(), Some(1.0));
    for _ in 0..20 {
        let a = random_measure(&mut rng, 1, 4, 0.9, 1.0);
        let b = random_measure(&mut rng, 1, 4, 0.9, 1.0);
        assert!((phi.evaluate(&a) - w1(&a, &target)).abs() < 1e-12);
        assert!((phi.evaluate(&a) - phi.evaluate(&b)).abs() <= w1(&a, &b) + 1e-9);
    }
    let cloud = PointCloud::uniform(2, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
    let eu = DistanceCostFunctional::euclidean(cloud);
    assert!((eu.project(&[0.0, 1.0, 1.0, 1.0]) - 1.0).abs() < 1e-12);
    assert!(DistanceCostFunctional::torus(DistanceTarget::Spectral(SpectralMeasure::lebesgue(2, 2)), 2).is_err());
}

fn measure_pair() -> impl Strategy<Value = (SpectralMeasure, SpectralMeasure)> {
    any::<u64>().prop_map(|seed| {
        let mut rng = stream_rng(seed, 21, 0);
        (random_measure(&mut rng, 1, 3, 0.9, 1.0), random_measure(&mut rng, 1, 3, 0.9, 1.0))
    })
}

fn random_cylindrical(seed: u64) -> CylindricalFunctional {
    let mut rng = stream_rng(seed, 22, 0);
    let tests = vec![random_trig(&mut rng, 1, 3, 1.0), random_trig(&mut rng, 1, 3, 1.0)];
    let a: f64 = rng.random_range(-2.0..2.0);
    let outer = OuterMap::new(move |y| (a * y[0]).sin() + y[0] * y[1] + y[1] * y[1], move |y| vec![a * (a * y[0]).cos() + y[1], y[0] + 2.0 * y[1]]);
    CylindricalFunctional::new(tests, outer).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn flat_derivative_has_zero_space_mean((m, _) in measure_pair(), seed in any::<u64>()) {
        let g = random_cylindrical(seed).flat_derivative(&m).unwrap();
        prop_assert!(g.mean().norm() < 1e-10);
        prop_assert!(g.to_grid(16).unwrap().mean().abs() < 1e-10);
    }

    // Midpoint rule of ∫₀¹ ⟨δΦ/δm(m_λ), m₂-m₁⟩ dλ reproduces Φ(m₂)-Φ(m₁).
    #[test]
    fn flat_derivative_integrates_along_segments((m1, m2) in measure_pair(), seed in any::<u64>()) {
        let phi = random_cylindrical(seed);
        let diff = m2.field().sub(m1.field()).unwrap();
        let steps = 200;
        let integral: f64 = (0..steps)
            .map(|j| {
                let ml = m1.mix(&m2, (j as f64 + 0.5) / steps as f64).unwrap();
                phi.flat_derivative(&ml).unwrap().pairing(&diff).unwrap()
            })
            .sum::<f64>() / steps as f64;
        let delta = phi.evaluate(&m2) - phi.evaluate(&m1);
        prop_assert!((integral - delta).abs() < 1e-4 * (1.0 + delta.abs()), "{} vs {}", integral, delta);
    }

    #[test]
    fn directional_derivative_consistency((m, mp) in measure_pair(), seed in any::<u64>()) {
        let phi = random_cylindrical(seed);
        let t = 1e-6;
        let fd = (phi.evaluate(&m.mix(&mp, t).unwrap()) - phi.evaluate(&m.mix(&mp, -t).unwrap())) / (2.0 * t);
        let g = phi.flat_derivative(&m).unwrap().pairing(&mp.field().sub(m.field()).unwrap()).unwrap();
        prop_assert!((fd - g).abs() < 1e-7 * (1.0 + g.abs()));
    }
}
