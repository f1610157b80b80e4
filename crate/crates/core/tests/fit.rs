use mfc_core::fit::*;
use mfc_core::rng::stream_rng;
use mfc_core::Error;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn exact_power_law() {
    let f = fit_loglog(&[(1.0, 1.0), (10.0, 0.1), (100.0, 0.01)]).unwrap();
    assert!((f.slope + 1.0).abs() < 1e-14);
    assert!(f.intercept.abs() < 1e-14);
    assert!(f.stderr_slope < 1e-7);
    assert!((f.r_squared - 1.0).abs() < 1e-12);
}

#[test]
fn constant_data_has_zero_slope() {
    let f = fit_loglog(&[(1.0, 3.0), (10.0, 3.0), (100.0, 3.0)]).unwrap();
    assert_eq!(f.slope, 0.0);
    assert_eq!(f.r_squared, 1.0);
}

#[test]
fn noisy_square_root_law() {
    let mut rng = stream_rng(1, 1, 0);
    let pts: Vec<(f64, f64)> = (4..14)
        .map(|j| {
            let x = 2f64.powi(j);
            let eta: f64 = rng.sample(StandardNormal);
            (x, x.powf(-0.5) * (1.0 + 0.01 * eta))
        })
        .collect();
    let f = fit_loglog(&pts).unwrap();
    assert!((f.slope + 0.5).abs() < 3.0 * f.stderr_slope, "{} ± {}", f.slope, f.stderr_slope);
    assert!(f.stderr_slope < 0.01);
}

#[test]
fn degenerate_inputs() {
    assert!(matches!(fit_loglog(&[(2.0, 1.0), (2.0, 3.0), (2.0, 5.0)]), Err(Error::DegeneratePoints(_))));
    assert!(matches!(fit_loglog(&[(1.0, 1.0), (2.0, 3.0)]), Err(Error::DegeneratePoints(_))));
    assert!(matches!(fit_loglog(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]), Err(Error::DegeneratePoints(_))));
    assert!(matches!(fit_loglog(&[(-1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]), Err(Error::DegeneratePoints(_))));
}

proptest! {
    #[test]
    fn refit_and_reordering_are_exact(
        pts in prop::collection::vec((0.01f64..1e4, 1e-6f64..1e3), 3..12),
        seed in any::<u64>(),
    ) {
        prop_assume!(pts.iter().any(|p| p.0 != pts[0].0));
        let f = fit_loglog(&pts).unwrap();
        prop_assert!(f.r_squared >= 0.0 && f.r_squared <= 1.0);
        let again = fit_logs(f.points.clone()).unwrap();
        prop_assert_eq!(again.slope, f.slope);
        let mut shuffled = pts.clone();
        let mut rng = stream_rng(seed, 2, 0);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let g = fit_loglog(&shuffled).unwrap();
        prop_assert_eq!(g.slope, f.slope);
        prop_assert_eq!(g.intercept, f.intercept);
    }
}
