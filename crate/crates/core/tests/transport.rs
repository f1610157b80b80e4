use mfc_core::rng::{random_measure, stream_rng};
use mfc_core::spectral::*;
use mfc_core::transport::*;
use mfc_core::Error;
use proptest::prelude::*;
use rand::Rng;

fn atoms(p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (p.to_vec(), vec![1.0 / p.len() as f64; p.len()])
}

fn w1_atoms(a: &[f64], b: &[f64]) -> f64 {
    let (pa, wa) = atoms(a);
    let (pb, wb) = atoms(b);
    w1_circle(CircleMeasure::Atoms { positions: &pa, weights: &wa }, CircleMeasure::Atoms { positions: &pb, weights: &wb }).unwrap()
}

// Dense two-phase simplex with Bland's rule for min c·x, A x = b, x ≥ 0 (b ≥ 0).
fn dense_lp(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let (rows, cols) = (a.len(), c.len());
    let width = cols + rows + 1;
    let mut t: Vec<Vec<f64>> = (0..rows)
        .map(|i| {
            let mut r = a[i].clone();
            r.extend((0..rows).map(|j| if i == j { 1.0 } else { 0.0 }));
            r.push(b[i]);
            r
        })
        .collect();
    let mut basis: Vec<usize> = (cols..cols + rows).collect();
    let pivot = |t: &mut Vec<Vec<f64>>, obj: &mut Vec<f64>, r: usize, col: usize| {
        let p = t[r][col];
        t[r].iter_mut().for_each(|v| *v /= p);
        let row = t[r].clone();
        for (i, ti) in t.iter_mut().enumerate() {
            if i != r && ti[col] != 0.0 {
                let f = ti[col];
                ti.iter_mut().zip(&row).for_each(|(v, w)| *v -= f * w);
            }
        }
        let f = obj[col];
        obj.iter_mut().zip(&row).for_each(|(v, w)| *v -= f * w);
    };
    let run = |t: &mut Vec<Vec<f64>>, obj: &mut Vec<f64>, basis: &mut Vec<usize>, allowed: usize| loop {
        let Some(col) = (0..allowed).find(|&j| obj[j] < -1e-11) else { break };
        let mut best: Option<(f64, usize)> = None;
        for i in 0..rows {
            if t[i][col] > 1e-12 {
                let ratio = t[i][width - 1] / t[i][col];
                if best.map_or(true, |(r, bi)| ratio < r - 1e-12 || (ratio <= r + 1e-12 && basis[i] < basis[bi])) {
                    best = Some((ratio, i));
                }
            }
        }
        let (_, r) = best.expect("bounded");
        pivot(t, obj, r, col);
        basis[r] = col;
    };
    // phase 1: minimize the sum of artificials
    let mut obj = vec![0.0; width];
    for j in cols..cols + rows {
        obj[j] = 1.0;
    }
    for i in 0..rows {
        let row = t[i].clone();
        obj.iter_mut().zip(&row).for_each(|(v, w)| *v -= w);
    }
    run(&mut t, &mut obj, &mut basis, cols + rows);
    // drive artificials out where possible
    for i in 0..rows {
        if basis[i] >= cols {
            if let Some(col) = (0..cols).find(|&j| t[i][j].abs() > 1e-9) {
                let mut dummy = vec![0.0; width];
                pivot(&mut t, &mut dummy, i, col);
                basis[i] = col;
            }
        }
    }
    let mut obj = vec![0.0; width];
    obj[..cols].copy_from_slice(c);
    for i in 0..rows {
        if basis[i] < cols {
            let f = obj[basis[i]];
            let row = t[i].clone();
            obj.iter_mut().zip(&row).for_each(|(v, w)| *v -= f * w);
        }
    }
    run(&mut t, &mut obj, &mut basis, cols);
    (0..rows).filter(|&i| basis[i] < cols).map(|i| c[basis[i]] * t[i][width - 1]).sum()
}

fn lp_oracle(a: &PointCloud, b: &PointCloud, metric: Metric) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..n {
        let mut r = vec![0.0; n * m];
        (0..m).for_each(|j| r[i * m + j] = 1.0);
        rows.push(r);
        rhs.push(a.weights()[i]);
    }
    // last column constraint is redundant
    for j in 0..m - 1 {
        let mut r = vec![0.0; n * m];
        (0..n).for_each(|i| r[i * m + j] = 1.0);
        rows.push(r);
        rhs.push(b.weights()[j]);
    }
    let c: Vec<f64> = (0..n * m).map(|idx| metric.distance(a.point(idx / m), b.point(idx % m))).collect();
    dense_lp(&rows, &rhs, &c)
}

fn random_cloud(rng: &mut impl Rng, n: usize, dim: usize, uniform: bool) -> PointCloud {
    let pts: Vec<f64> = (0..n * dim).map(|_| rng.random::<f64>()).collect();
    if uniform {
        return PointCloud::uniform(dim, pts).unwrap();
    }
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    let mut w: Vec<f64> = w.iter().map(|x| x / s).collect();
    let rest: f64 = w[..n - 1].iter().sum();
    w[n - 1] = 1.0 - rest;
    PointCloud::new(dim, pts, w).unwrap()
}

#[test]
fn circle_examples() {
    assert!(w1_atoms(&[0.3], &[0.3]) < 1e-15);
    assert!((w1_atoms(&[0.0], &[0.5]) - 0.5).abs() < 1e-15);
    assert!((w1_atoms(&[0.0], &[0.9]) - 0.1).abs() < 1e-14);
    // two atoms vs their rotation by a quarter turn
    assert!((w1_atoms(&[0.0, 0.5], &[0.25, 0.75]) - 0.25).abs() < 1e-14);
    let m = random_measure(&mut stream_rng(1, 1, 0), 1, 6, 0.9, 1.0);
    let d = w1_circle(CircleMeasure::Spectral(m.field()), CircleMeasure::Spectral(m.field())).unwrap();
    assert!(d < 1e-14);
}

#[test]
fn circle_dirac_vs_uniform() {
    // W1(δ_x, Leb) on the circle is 1/4 for every x.
    for x in [0.0, 0.1, 0.77] {
        let d = w1_circle(CircleMeasure::Atoms { positions: &[x], weights: &[1.0] }, CircleMeasure::Uniform).unwrap();
        assert!((d - 0.25).abs() < 1e-14, "{d}");
    }
}

#[test]
fn circle_spectral_matches_dense_density_oracle() {
    // Oracle: discretize both densities into 20000 cell masses and use atoms.
    let mut rng = stream_rng(5, 1, 0);
    for _ in 0..5 {
        let a = random_measure(&mut rng, 1, 8, 0.9, 1.0);
        let b = random_measure(&mut rng, 1, 8, 0.9, 1.0);
        let exact = w1_circle(CircleMeasure::Spectral(a.field()), CircleMeasure::Spectral(b.field())).unwrap();
        let n = 20_000;
        let ga = a.to_density(n).unwrap();
        let gb = b.to_density(n).unwrap();
        let approx = w1_circle(CircleMeasure::Density(&ga), CircleMeasure::Density(&gb)).unwrap();
        assert!((exact - approx).abs() < 1e-6, "{exact} vs {approx}");
        // cell-midpoint samples so the piecewise-constant density is not shifted by half a cell
        let mid = GridField::new(1, n, (0..n).map(|j| b.field().eval(&[(j as f64 + 0.5) / n as f64])).collect()).unwrap();
        let mixed = w1_circle(CircleMeasure::Spectral(a.field()), CircleMeasure::Density(&mid)).unwrap();
        assert!((exact - mixed).abs() < 1e-6);
    }
}

#[test]
fn potential_is_derivative_of_circle_distance() {
    let mut rng = stream_rng(6, 1, 0);
    let a = random_measure(&mut rng, 1, 6, 0.9, 1.0);
    let b = random_measure(&mut rng, 1, 6, 0.9, 1.0);
    let dir = random_measure(&mut rng, 1, 6, 0.9, 1.0).field().sub(SpectralMeasure::lebesgue(1, 6).field()).unwrap();
    let tr = circle_transport(CircleMeasure::Spectral(a.field()), CircleMeasure::Spectral(b.field())).unwrap();
    let g = tr.potential(6);
    let h = 1e-5;
    let d = |t: f64| {
        let m = a.perturbed(&dir, t).unwrap();
        w1_circle(CircleMeasure::Spectral(m.field()), CircleMeasure::Spectral(b.field())).unwrap()
    };
    let fd = (d(h) - d(-h)) / (2.0 * h);
    let an = g.pairing(&dir).unwrap();
    assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "{fd} vs {an}");
    assert!(g.mean().norm() == 0.0);
}

#[test]
fn discrete_examples() {
    let a = PointCloud::uniform(1, vec![0.1, 0.4, 0.8]).unwrap();
    assert!(w1_discrete(&a, &a, Metric::Euclidean).unwrap() < 1e-15);
    let x = PointCloud::uniform(1, vec![0.0]).unwrap();
    let y = PointCloud::uniform(1, vec![0.3]).unwrap();
    assert!((w1_discrete(&x, &y, Metric::Euclidean).unwrap() - 0.3).abs() < 1e-15);
    let z = PointCloud::uniform(1, vec![0.9]).unwrap();
    assert!((w1_discrete(&x, &z, Metric::Torus).unwrap() - 0.1).abs() < 1e-14);
    assert!((w1_discrete(&x, &z, Metric::Euclidean).unwrap() - 0.9).abs() < 1e-14);
}

#[test]
fn discrete_matches_dense_lp_oracle_50() {
    let mut rng = stream_rng(8, 1, 0);
    let a = random_cloud(&mut rng, 50, 2, true);
    let b = random_cloud(&mut rng, 50, 2, true);
    let oracle = lp_oracle(&a, &b, Metric::Euclidean);
    let exact = w1_discrete(&a, &b, Metric::Euclidean).unwrap();
    let simplex = network_simplex(&a, &b, Metric::Euclidean).unwrap();
    assert!((exact - oracle).abs() < 1e-9, "{exact} vs {oracle}");
    assert!((simplex - oracle).abs() < 1e-9, "{simplex} vs {oracle}");
}

#[test]
fn network_simplex_weighted_matches_lp() {
    let mut rng = stream_rng(9, 1, 0);
    for (n, m) in [(7, 11), (20, 13), (30, 30)] {
        let a = random_cloud(&mut rng, n, 3, false);
        let b = random_cloud(&mut rng, m, 3, false);
        for metric in [Metric::Euclidean, Metric::Torus] {
            let oracle = lp_oracle(&a, &b, metric);
            let got = w1_discrete(&a, &b, metric).unwrap();
            assert!((got - oracle).abs() < 1e-9, "{n}x{m}: {got} vs {oracle}");
        }
    }
}

#[test]
fn line_and_circle_agree_with_discrete() {
    let mut rng = stream_rng(10, 1, 0);
    let a = random_cloud(&mut rng, 40, 1, false);
    let b = random_cloud(&mut rng, 25, 1, false);
    let line = w1_line(&a, &b).unwrap();
    assert!((line - network_simplex(&a, &b, Metric::Euclidean).unwrap()).abs() < 1e-12);
    let circ = w1_circle(
        CircleMeasure::Atoms { positions: a.points(), weights: a.weights() },
        CircleMeasure::Atoms { positions: b.points(), weights: b.weights() },
    )
    .unwrap();
    assert!((circ - network_simplex(&a, &b, Metric::Torus).unwrap()).abs() < 1e-12);
}

#[test]
fn budget_is_enforced() {
    let a = PointCloud::uniform(1, (0..30).map(|i| i as f64 / 30.0).collect()).unwrap();
    assert!(matches!(w1_discrete_with_budget(&a, &a, Metric::Euclidean, 100), Err(Error::BudgetExceeded { entries: 900, .. })));
}

#[test]
fn sinkhorn_examples() {
    let mut rng = stream_rng(11, 1, 0);
    let a = random_cloud(&mut rng, 30, 1, true);
    let eps = 0.01;
    let same = w1_approx(&a, &a, Metric::Euclidean, eps).unwrap();
    assert!(same <= eps * (30f64).ln(), "{same}");

    let b = random_cloud(&mut rng, 30, 1, false);
    let exact = w1_line(&a, &b).unwrap();
    let mut last = f64::INFINITY;
    for eps in [0.05, 0.02, 0.01, 0.005] {
        let approx = w1_approx(&a, &b, Metric::Euclidean, eps).unwrap();
        assert!(approx >= exact - 1e-12, "rounded plan is feasible");
        assert!(approx - exact <= 3.0 * eps * (30f64).ln());
        assert!(approx - exact <= last + 1e-9);
        last = approx - exact;
    }
}

#[test]
fn assignment_small_bruteforce() {
    let mut rng = stream_rng(12, 1, 0);
    for n in 1..=6 {
        let c: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
        let (best, perm) = assignment(&c, n);
        let mut idx: Vec<usize> = (0..n).collect();
        let mut brute = f64::INFINITY;
        permute(&mut idx, 0, &mut |p| brute = brute.min((0..n).map(|i| c[i * n + p[i]]).sum()));
        assert!((best - brute).abs() < 1e-12);
        let total: f64 = (0..n).map(|i| c[i * n + perm[i]]).sum();
        assert!((total - best).abs() < 1e-12);
    }
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

fn circle_triple() -> impl Strategy<Value = [SpectralMeasure; 3]> {
    any::<u64>().prop_map(|seed| {
        let mut rng = stream_rng(seed, 12, 0);
        [0, 1, 2].map(|_| random_measure(&mut rng, 1, 5, 0.9, 1.0))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn circle_metric_axioms([a, b, c] in circle_triple()) {
        let d = |x: &SpectralMeasure, y: &SpectralMeasure| w1_circle(CircleMeasure::Spectral(x.field()), CircleMeasure::Spectral(y.field())).unwrap();
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-9);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
    }

    #[test]
    fn discrete_metric_axioms(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 13, 0);
        let [a, b, c] = [0, 1, 2].map(|_| random_cloud(&mut rng, 6, 2, false));
        for metric in [Metric::Euclidean, Metric::Torus] {
            let d = |x: &PointCloud, y: &PointCloud| w1_discrete(x, y, metric).unwrap();
            prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-9);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
        }
    }

    #[test]
    fn point_cloud_weights_validated(w in prop::collection::vec(0.0f64..1.0, 1..5)) {
        let n = w.len();
        let s: f64 = w.iter().sum();
        let r = PointCloud::new(1, vec![0.0; n], w.clone());
        prop_assert_eq!(r.is_ok(), (s - 1.0).abs() <= 1e-12);
    }
}
