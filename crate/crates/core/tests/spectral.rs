use std::f64::consts::PI;

use mfc_core::rng::{random_measure, random_trig, stream_rng};
use mfc_core::spectral::*;
use mfc_core::Error;
use proptest::prelude::*;

// Midpoint-rule quadrature of ∫₀¹ e^{i2πkx} f(x) dx, independent of the FFT path.
fn quad_coeff(f: impl Fn(f64) -> f64, k: i64) -> C64 {
    let n = 20_000;
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        let x = (j as f64 + 0.5) / n as f64;
        acc += C64::from_polar(f(x), 2.0 * PI * k as f64 * x);
    }
    acc / n as f64
}

fn direct_sum(coeffs: &SpectralField, x: f64) -> f64 {
    (-(coeffs.cutoff() as i64)..=coeffs.cutoff() as i64)
        .map(|k| (coeffs.get(&[k]) * C64::from_polar(1.0, -2.0 * PI * k as f64 * x)).re)
        .sum()
}

#[test]
fn constant_density_is_lebesgue() {
    let f = GridField::constant(1, 16, 1.0).unwrap();
    let m = from_density(&f, 4, DEFAULT_TOL_NEG).unwrap();
    assert_eq!(m.coeff(&[0]), C64::new(1.0, 0.0));
    for k in 1..=4 {
        assert!(m.coeff(&[k]).norm() < 1e-15);
    }
}

#[test]
fn cosine_density_matches_quadrature_oracle() {
    let f = GridField::from_fn(1, 32, |x| 1.0 + (2.0 * PI * x[0]).cos()).unwrap();
    let m = from_density(&f, 3, DEFAULT_TOL_NEG).unwrap();
    let oracle = quad_coeff(|x| 1.0 + (2.0 * PI * x).cos(), 1);
    assert!((oracle - C64::new(0.5, 0.0)).norm() < 1e-10);
    assert!((m.coeff(&[1]) - oracle).norm() < 1e-10);
    assert!((m.coeff(&[-1]) - oracle).norm() < 1e-10);
}

#[test]
fn sine_density_sign_convention() {
    let f = GridField::from_fn(1, 32, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).sin()).unwrap();
    let m = from_density(&f, 3, DEFAULT_TOL_NEG).unwrap();
    let oracle = quad_coeff(|x| 1.0 + 0.5 * (2.0 * PI * x).sin(), 1);
    assert!((oracle - C64::new(0.0, 0.25)).norm() < 1e-10, "quadrature gives {oracle}");
    assert!((m.coeff(&[1]) - oracle).norm() < 1e-10);
}

#[test]
fn from_density_errors() {
    let neg = GridField::from_fn(1, 16, |x| 1.0 + 2.0 * (2.0 * PI * x[0]).cos()).unwrap();
    assert!(matches!(from_density(&neg, 2, DEFAULT_TOL_NEG), Err(Error::NegativeDensity { .. })));
    let heavy = GridField::constant(1, 16, 1.5).unwrap();
    assert!(matches!(from_density(&heavy, 2, DEFAULT_TOL_NEG), Err(Error::NotNormalized { .. })));
}

#[test]
fn to_density_oracles() {
    let leb = SpectralMeasure::lebesgue(1, 3);
    let g = to_density(&leb, 8).unwrap();
    assert!(g.values().iter().all(|v| (v - 1.0).abs() < 1e-15));

    let mut f = SpectralField::zeros(1, 2);
    f.set(&[0], C64::new(1.0, 0.0));
    f.set(&[1], C64::new(0.5, 0.0));
    f.set(&[-1], C64::new(0.5, 0.0));
    let m = SpectralMeasure::from_field(f.clone()).unwrap();
    let g = to_density(&m, 9).unwrap();
    for (j, v) in g.values().iter().enumerate() {
        let x = j as f64 / 9.0;
        assert!((v - direct_sum(&f, x)).abs() < 1e-13);
        assert!((v - (1.0 + (2.0 * PI * x).cos())).abs() < 1e-13);
    }
    assert!(matches!(to_density(&m, 4), Err(Error::ResolutionTooLow { .. })));
}

#[test]
fn empirical_oracles() {
    let m = empirical(&[0.0], 1, 5).unwrap();
    for k in -5..=5 {
        assert!((m.coeff(&[k]) - C64::new(1.0, 0.0)).norm() < 1e-14);
    }
    let m = empirical(&[0.0, 0.5], 1, 2).unwrap();
    assert!(m.coeff(&[1]).norm() < 1e-15);
    let pts = [0.0, 0.25, 0.5, 0.75];
    let m = empirical(&pts, 1, 4).unwrap();
    let oracle = |k: i64| pts.iter().map(|&x| C64::from_polar(1.0, 2.0 * PI * k as f64 * x)).sum::<C64>() / 4.0;
    assert!((m.coeff(&[2]) - oracle(2)).norm() < 1e-14);
    assert!(m.coeff(&[2]).norm() < 1e-14);
    assert!((m.coeff(&[4]) - C64::new(1.0, 0.0)).norm() < 1e-14);
    assert_eq!(empirical(&[], 1, 2), Err(Error::EmptyPointSet));
}

#[test]
fn empirical_two_dimensional_matches_direct_sum() {
    let pts = [0.1, 0.7, 0.35, 0.2, 0.9, 0.55];
    let m = empirical(&pts, 2, 3).unwrap();
    for k in [[1i64, 0], [2, -1], [-3, 3], [0, 2]] {
        let oracle = pts
            .chunks(2)
            .map(|x| C64::from_polar(1.0, 2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1])))
            .sum::<C64>()
            / 3.0;
        assert!((m.coeff(&k) - oracle).norm() < 1e-13);
    }
}

#[test]
fn hs_inner_oracles() {
    let s2 = SobolevWeight::new(2.0).unwrap();
    for s in [0.0, 1.0, 2.5] {
        let w = SobolevWeight::new(s).unwrap();
        assert!((hs_norm(&SpectralMeasure::lebesgue(1, 4), &w) - 1.0).abs() < 1e-15);
    }
    let dirac = empirical(&[0.0], 1, 1).unwrap();
    assert!((hs_inner(&dirac, &dirac, &s2).unwrap() - 2.0).abs() < 1e-14);

    // ‖δ_0 - δ_{1/2}‖²_{-2} at K = 8: only odd modes survive with |2|² = 4.
    let a = empirical(&[0.0], 1, 8).unwrap();
    let b = empirical(&[0.5], 1, 8).unwrap();
    let oracle: f64 = (-8i64..=8)
        .map(|k| {
            let diff = 1.0 - (PI * k as f64).cos();
            diff * diff / (1.0 + (k as f64).powi(4))
        })
        .sum();
    let got = hs_distance(&a, &b, &s2).unwrap().powi(2);
    assert!((got - oracle).abs() < 1e-13);
    assert!((hs_distance(&b, &a, &s2).unwrap().powi(2) - oracle).abs() < 1e-13);
    let c = empirical(&[1e-6], 1, 8).unwrap();
    assert!(hs_distance(&a, &c, &s2).unwrap() < 1e-4);

    let other = SpectralMeasure::lebesgue(1, 3);
    assert!(matches!(hs_inner(&a, &other, &s2), Err(Error::CutoffMismatch(8, 3))));
    assert!(matches!(hs_inner(&a, &SpectralMeasure::lebesgue(2, 8), &s2), Err(Error::DimensionMismatch(1, 2))));
}

#[test]
fn dual_map_examples() {
    let s2 = SobolevWeight::new(2.0).unwrap();
    let leb = SpectralMeasure::lebesgue(1, 3);
    let g = dual_map(&leb, &s2, 8).unwrap();
    assert!(g.values().iter().all(|v| (v - 1.0).abs() < 1e-15));

    let mut q = SpectralField::zeros(1, 2);
    q.set(&[1], C64::new(1.0, 0.0));
    let qs = dual_coeffs(&q, &s2);
    assert!((qs.get(&[1]) - C64::new(0.5, 0.0)).norm() < 1e-15);
    // The lift multiplies and inverts the dual map.
    let back = sobolev_lift(&qs, &s2);
    assert!((back.get(&[1]) - C64::new(1.0, 0.0)).norm() < 1e-15);
}

#[test]
fn heat_multiplier_examples() {
    let c = SpectralMeasure::lebesgue(1, 4);
    let h = heat_multiplier(c.field(), 0.3).unwrap();
    assert_eq!(&h, c.field());
    let mut f = SpectralField::zeros(1, 2);
    f.set(&[1], C64::new(0.3, -0.2));
    f.set(&[-1], C64::new(0.3, 0.2));
    assert_eq!(heat_multiplier(&f, 0.0).unwrap(), f);
    let t = 1.0 / (4.0 * PI * PI);
    let h = heat_multiplier(&f, t).unwrap();
    assert!((h.get(&[1]) - f.get(&[1]) * (-1.0f64).exp()).norm() < 1e-15);
    assert!(matches!(heat_multiplier(&f, -1.0), Err(Error::NegativeTime(_))));

    // grid version agrees with the spectral one
    let g = f.to_grid(16).unwrap();
    let hg = heat_multiplier_grid(&g, t).unwrap();
    let hs = h.to_grid(16).unwrap();
    for (a, b) in hg.values().iter().zip(hs.values()) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn heat_smoothing_constant_is_uniform() {
    // ‖∇ e^{tΔ} f‖_∞ ≤ C t^{-1/2} ‖f‖_∞ with a single fitted constant across random trials.
    let mut rng = stream_rng(7, 1, 0);
    let mut ratios = Vec::new();
    for trial in 0..100 {
        let f = random_trig(&mut rng, 1, 16, 0.5);
        let t = 10f64.powf(-3.0 + 3.0 * (trial as f64 / 99.0));
        let grid = f.to_grid(256).unwrap();
        let h = heat_multiplier(&f, t).unwrap().derivative(0).to_grid(256).unwrap();
        ratios.push(h.sup_norm() * t.sqrt() / grid.sup_norm());
    }
    let c = ratios.iter().cloned().fold(0.0, f64::max);
    // sup_k 2π|k| e^{-4π²k²t} √t ≤ (2e)^{-1/2} per mode; the sum over 16 modes bounds C by 16·0.43.
    assert!(c.is_finite() && c < 16.0 * 0.43, "fitted smoothing constant {c}");
}

#[test]
fn sobolev_embedding_constant() {
    // ‖f‖_{C¹} ≤ C ‖f‖_s for s > d/2 + 1 on band-limited f.
    let s = SobolevWeight::new(2.0).unwrap();
    let mut rng = stream_rng(9, 2, 0);
    let bound = {
        let tail: f64 = (1..=64).map(|k| (1.0 + 4.0 * PI * PI * (k * k) as f64) / (1.0 + (k as f64).powi(4))).sum();
        (1.0 + 2.0 * tail).sqrt()
    };
    for _ in 0..50 {
        let f = random_trig(&mut rng, 1, 12, 1.0);
        let g = f.to_grid(128).unwrap();
        let dg = f.derivative(0).to_grid(128).unwrap();
        let c1 = g.sup_norm() + dg.sup_norm();
        let hs = hs_inner_positive(&f, &f, &s).unwrap().sqrt();
        assert!(c1 <= bound * hs, "{c1} > {bound}·{hs}");
    }
}

#[test]
fn clip_and_renormalize_is_explicit() {
    let mut f = SpectralField::zeros(1, 2);
    f.set(&[0], C64::new(1.0, 0.0));
    f.set(&[1], C64::new(0.8, 0.0));
    f.set(&[-1], C64::new(0.8, 0.0));
    let m = SpectralMeasure::from_field(f).unwrap();
    assert!(m.check_nonnegative(DEFAULT_TOL_NEG).is_err());
    let r = m.clip_and_renormalize(64).unwrap();
    assert_eq!(r.coeff(&[0]), C64::new(1.0, 0.0));
    assert!(r.min_density() > m.min_density());
}

#[test]
fn integrate_grid_is_exact_for_band_limited_data() {
    let mut rng = stream_rng(3, 3, 0);
    let m = random_measure(&mut rng, 1, 6, 0.8, 1.0);
    let g = random_trig(&mut rng, 1, 6, 1.0);
    let grid = g.to_grid(64).unwrap();
    let quad = {
        let dens = m.to_density(64).unwrap();
        dens.values().iter().zip(grid.values()).map(|(a, b)| a * b).sum::<f64>() / 64.0
    };
    assert!((m.integrate_grid(&grid).unwrap() - quad).abs() < 1e-13);
}

fn measure_strategy(dim: usize, cutoff: usize) -> impl Strategy<Value = SpectralMeasure> {
    any::<u64>().prop_map(move |seed| {
        let mut rng = stream_rng(seed, 11, 0);
        random_measure(&mut rng, dim, cutoff, 0.9, 0.5)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roundtrip_density(m in measure_strategy(1, 5), extra in 0usize..20) {
        let n = 11 + extra;
        let back = from_density(&to_density(&m, n).unwrap(), 5, DEFAULT_TOL_NEG).unwrap();
        let err = back.field().sub(m.field()).unwrap().coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn roundtrip_density_2d(m in measure_strategy(2, 3)) {
        let back = from_density(&to_density(&m, 9).unwrap(), 3, DEFAULT_TOL_NEG).unwrap();
        let err = back.field().sub(m.field()).unwrap().coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn produced_measures_keep_invariants(pts in prop::collection::vec(-3.0f64..3.0, 1..40), k in 0usize..6) {
        let m = empirical(&pts, 1, k).unwrap();
        prop_assert_eq!(m.coeff(&[0]), C64::new(1.0, 0.0));
        prop_assert!(m.field().hermitian_defect() == 0.0);
        let h = m.heat(0.01).unwrap();
        prop_assert_eq!(h.coeff(&[0]), C64::new(1.0, 0.0));
        prop_assert!(h.field().hermitian_defect() == 0.0);
    }

    #[test]
    fn hs_inner_is_positive_definite(a in measure_strategy(1, 4), b in measure_strategy(1, 4), s in 0.0f64..3.0) {
        let w = SobolevWeight::new(s).unwrap();
        let d = a.field().sub(b.field()).unwrap();
        let nrm = hs_inner(&d, &d, &w).unwrap();
        let any = d.coeffs().iter().any(|c| c.norm() > 0.0);
        prop_assert!(nrm >= 0.0);
        prop_assert_eq!(nrm > 0.0, any);
        let ab = hs_inner(&a, &b, &w).unwrap();
        let ba = hs_inner(&b, &a, &w).unwrap();
        prop_assert!((ab - ba).abs() < 1e-14);
    }

    #[test]
    fn dual_map_identities(p in measure_strategy(1, 6), q in measure_strategy(1, 6), s in 0.0f64..3.0) {
        let w = SobolevWeight::new(s).unwrap();
        let target = hs_inner(&q, &p, &w).unwrap();
        let qs = dual_coeffs(&q, &w);
        let ps = dual_coeffs(&p, &w);
        prop_assert!((hs_inner_positive(&qs, &ps, &w).unwrap() - target).abs() < 1e-12);
        // L² pairing of the H^s representative with p
        prop_assert!((qs.pairing(p.field()).unwrap() - target).abs() < 1e-12);
    }

    #[test]
    fn sobolev_weight_invariants(k in prop::collection::vec(-20i64..20, 1..4), s in 0.0f64..4.0) {
        let w = SobolevWeight::new(s).unwrap();
        let neg: Vec<i64> = k.iter().map(|v| -v).collect();
        prop_assert_eq!(w.weight(&k), w.weight(&neg));
        prop_assert!(w.weight(&k) >= 1.0);
        prop_assert_eq!(w.weight(&vec![0; k.len()]), 1.0);
    }
}
