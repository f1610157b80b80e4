//! Wasserstein-1 distances: exact circle formula, exact discrete transport, entropic approximation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{GridField, SpectralField, C64};

/// Default cap on `n_a · n_b` for exact discrete transport.
pub const DEFAULT_LP_BUDGET: usize = 4_000_000;

/// A one-dimensional measure on the circle `[0,1)`, in any of the supported encodings.
#[derive(Clone, Copy, Debug)]
pub enum CircleMeasure<'a> {
    /// Band-limited measure; the constant coefficient is the total mass.
    Spectral(&'a SpectralField),
    /// Piecewise-constant density, cell `j` covering `[j/n, (j+1)/n)`.
    Density(&'a GridField),
    Atoms { positions: &'a [f64], weights: &'a [f64] },
    Uniform,
}

/// Exact W1 on the circle and the optimal shift of the CDF difference.
#[derive(Clone, Debug)]
pub struct CircleTransport {
    pub distance: f64,
    pub shift: f64,
    segments: Vec<Segment>,
}

// Monotone cubic piece of D = F1 - F2 on [x0, x0 + h], parametrized by t ∈ [t0, t1].
#[derive(Clone, Copy, Debug)]
struct Segment {
    x0: f64,
    h: f64,
    a: [f64; 4],
    t0: f64,
    t1: f64,
    y0: f64,
    y1: f64,
}

impl Segment {
    fn eval(&self, t: f64) -> f64 {
        let a = &self.a;
        a[0] + t * (a[1] + t * (a[2] + t * a[3]))
    }

    fn deriv(&self, t: f64) -> f64 {
        let a = &self.a;
        a[1] + t * (2.0 * a[2] + t * 3.0 * a[3])
    }

    fn antideriv(&self, t: f64) -> f64 {
        let a = &self.a;
        t * (a[0] + t * (a[1] / 2.0 + t * (a[2] / 3.0 + t * a[3] / 4.0)))
    }

    fn lo(&self) -> f64 {
        self.y0.min(self.y1)
    }

    fn hi(&self) -> f64 {
        self.y0.max(self.y1)
    }

    // Root of p(t) = c inside [t0, t1]; requires c between y0 and y1.
    fn root(&self, c: f64) -> f64 {
        let (mut lo, mut hi) = (self.t0, self.t1);
        let increasing = self.y1 >= self.y0;
        let mut t = if (self.y1 - self.y0).abs() > 0.0 {
            self.t0 + (self.t1 - self.t0) * (c - self.y0) / (self.y1 - self.y0)
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..60 {
            let f = self.eval(t) - c;
            if (f > 0.0) == increasing {
                hi = t;
            } else {
                lo = t;
            }
            let d = self.deriv(t);
            let mut next = if d != 0.0 { t - f / d } else { 0.5 * (lo + hi) };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-16 * (1.0 + t.abs()) || hi - lo <= 1e-15 {
                return next;
            }
            t = next;
        }
        t
    }
}

struct Builder {
    trig: Vec<C64>,
    cutoff: usize,
    base_slope: f64,
    jumps: Vec<(f64, f64)>,
    densities: Vec<(f64, Vec<f64>)>,
}

impl Builder {
    fn add(&mut self, m: CircleMeasure<'_>, sign: f64) -> Result<()> {
        match m {
            CircleMeasure::Spectral(f) => {
                if f.dim() != 1 {
                    return Err(Error::DimensionUnsupported(f.dim()));
                }
                let k = f.cutoff();
                if k > self.cutoff {
                    let mut grown = vec![C64::new(0.0, 0.0); 2 * k + 1];
                    for (i, c) in self.trig.iter().enumerate() {
                        grown[i + k - self.cutoff] = *c;
                    }
                    self.trig = grown;
                    self.cutoff = k;
                }
                for (i, c) in f.coeffs().iter().enumerate() {
                    let kk = i as i64 - k as i64;
                    if kk != 0 {
                        self.trig[(kk + self.cutoff as i64) as usize] += c * sign;
                    }
                }
                self.base_slope += sign * f.mean().re;
            }
            CircleMeasure::Density(g) => {
                if g.dim() != 1 {
                    return Err(Error::DimensionUnsupported(g.dim()));
                }
                self.densities.push((sign, g.values().to_vec()));
            }
            CircleMeasure::Atoms { positions, weights } => {
                if positions.len() != weights.len() {
                    return Err(Error::InvalidArgument("atom positions and weights differ in length".into()));
                }
                for (&p, &w) in positions.iter().zip(weights) {
                    self.jumps.push((p.rem_euclid(1.0), sign * w));
                }
            }
            CircleMeasure::Uniform => self.base_slope += sign,
        }
        Ok(())
    }

    // S(x) = Σ_{k≠0} c_k (1 - e^{-i2πkx})/(i2πk) and S'(x) = Σ_{k≠0} c_k e^{-i2πkx}.
    fn trig_eval(&self, x: f64) -> (f64, f64) {
        if self.cutoff == 0 {
            return (0.0, 0.0);
        }
        let step = C64::from_polar(1.0, -2.0 * PI * x);
        let mut e = C64::new(1.0, 0.0);
        let (mut s, mut ds) = (0.0, 0.0);
        let k0 = self.cutoff;
        for k in 1..=k0 {
            e *= step;
            let (cp, cm) = (self.trig[k0 + k], self.trig[k0 - k]);
            let i2pik = C64::new(0.0, 2.0 * PI * k as f64);
            s += ((cp * (1.0 - e)) / i2pik).re - ((cm * (1.0 - e.conj())) / i2pik).re;
            ds += (cp * e + cm * e.conj()).re;
        }
        (s, ds)
    }

    fn build(mut self) -> Result<Vec<Segment>> {
        let mut cuts: Vec<f64> = vec![0.0, 1.0];
        if self.cutoff > 0 {
            let pieces = (256 * self.cutoff).max(1024);
            cuts.extend((1..pieces).map(|j| j as f64 / pieces as f64));
        }
        for (_, d) in &self.densities {
            let n = d.len();
            cuts.extend((1..n).map(|j| j as f64 / n as f64));
        }
        self.jumps.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        cuts.extend(self.jumps.iter().map(|j| j.0));
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

        let mut segments = Vec::with_capacity(cuts.len() * 2);
        let mut p_left = 0.0;
        let mut jump_idx = 0;
        for w in cuts.windows(2) {
            let (l, r) = (w[0], w[1]);
            while jump_idx < self.jumps.len() && self.jumps[jump_idx].0 <= l + 1e-15 {
                p_left += self.jumps[jump_idx].1;
                jump_idx += 1;
            }
            let h = r - l;
            if h <= 0.0 {
                continue;
            }
            let mid = 0.5 * (l + r);
            let mut slope = self.base_slope;
            for (sign, d) in &self.densities {
                let n = d.len();
                let j = ((mid * n as f64) as usize).min(n - 1);
                slope += sign * d[j];
            }
            let (s0, ds0) = self.trig_eval(l);
            let (s1, ds1) = self.trig_eval(r);
            let p_right = p_left + slope * h;
            let (y0, y1) = (s0 + p_left, s1 + p_right);
            let (d0, d1) = (ds0 + slope, ds1 + slope);
            let a = [y0, h * d0, 3.0 * (y1 - y0) - h * (2.0 * d0 + d1), 2.0 * (y0 - y1) + h * (d0 + d1)];
            p_left = p_right;
            push_monotone(&mut segments, l, h, a);
        }
        Ok(segments)
    }
}

fn push_monotone(out: &mut Vec<Segment>, x0: f64, h: f64, a: [f64; 4]) {
    let mut splits = vec![0.0];
    // p'(t) = a1 + 2 a2 t + 3 a3 t²
    let (qa, qb, qc) = (3.0 * a[3], 2.0 * a[2], a[1]);
    let scale = qa.abs() + qb.abs() + qc.abs();
    if scale > 0.0 {
        if qa.abs() > 1e-14 * scale {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc > 0.0 {
                let sq = disc.sqrt();
                let q = -0.5 * (qb + qb.signum() * sq);
                let mut roots = [q / qa, if q != 0.0 { qc / q } else { f64::NAN }];
                roots.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
                splits.extend(roots.iter().filter(|t| **t > 0.0 && **t < 1.0));
            }
        } else if qb.abs() > 1e-14 * scale {
            let t = -qc / qb;
            if t > 0.0 && t < 1.0 {
                splits.push(t);
            }
        }
    }
    splits.push(1.0);
    for w in splits.windows(2) {
        let mut seg = Segment { x0, h, a, t0: w[0], t1: w[1], y0: 0.0, y1: 0.0 };
        seg.y0 = seg.eval(w[0]);
        seg.y1 = seg.eval(w[1]);
        out.push(seg);
    }
}

// Lebesgue measure of {D < c} and ∫|D - c|.
fn measure_below(segs: &[Segment], c: f64) -> f64 {
    let mut acc = 0.0;
    for s in segs {
        let len = (s.t1 - s.t0) * s.h;
        if s.hi() <= c {
            acc += len;
        } else if s.lo() < c {
            let r = s.root(c);
            acc += if s.y0 < c { (r - s.t0) * s.h } else { (s.t1 - r) * s.h };
        }
    }
    acc
}

fn abs_integral(segs: &[Segment], c: f64) -> f64 {
    let mut acc = 0.0;
    for s in segs {
        let integral = |ta: f64, tb: f64| s.h * (s.antideriv(tb) - s.antideriv(ta) - c * (tb - ta));
        if s.lo() >= c || s.hi() <= c {
            acc += integral(s.t0, s.t1).abs();
        } else {
            let r = s.root(c);
            acc += integral(s.t0, r).abs() + integral(r, s.t1).abs();
        }
    }
    acc
}

fn transport_from_segments(segments: Vec<Segment>) -> CircleTransport {
    let mut lo = segments.iter().map(|s| s.lo()).fold(f64::INFINITY, f64::min);
    let mut hi = segments.iter().map(|s| s.hi()).fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return CircleTransport { distance: 0.0, shift: lo, segments };
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if measure_below(&segments, mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    let shift = 0.5 * (lo + hi);
    CircleTransport { distance: abs_integral(&segments, shift), shift, segments }
}

/// Exact Kantorovich-Rubinstein distance on the circle:
/// `min_c ∫₀¹ |F₁ - F₂ - c|`, with `c` the median of `F₁ - F₂`.
pub fn w1_circle(a: CircleMeasure<'_>, b: CircleMeasure<'_>) -> Result<f64> {
    Ok(circle_transport(a, b)?.distance)
}

pub fn circle_transport(a: CircleMeasure<'_>, b: CircleMeasure<'_>) -> Result<CircleTransport> {
    let mut builder = Builder { trig: vec![C64::new(0.0, 0.0)], cutoff: 0, base_slope: 0.0, jumps: vec![], densities: vec![] };
    builder.add(a, 1.0)?;
    builder.add(b, -1.0)?;
    Ok(transport_from_segments(builder.build()?))
}

impl CircleTransport {
    /// Fourier coefficients up to `cutoff` of the Kantorovich potential
    /// `g(y) = ∫_y^1 sign(D(x) - c) dx`, normalized to zero mean. Where the level
    /// set `{D = c}` is transversal, `g` is the derivative of the distance in the first argument.
    pub fn potential(&self, cutoff: usize) -> SpectralField {
        // Intervals with constant sign, as (start, end, sign).
        let mut pieces: Vec<(f64, f64, f64)> = Vec::new();
        let c = self.shift;
        for s in &self.segments {
            let xa = s.x0 + s.t0 * s.h;
            let xb = s.x0 + s.t1 * s.h;
            if s.lo() >= c || s.hi() <= c {
                let mid = s.eval(0.5 * (s.t0 + s.t1)) - c;
                pieces.push((xa, xb, mid.signum()));
            } else {
                let r = s.root(c);
                let xr = s.x0 + r * s.h;
                let first = if s.y0 < c { -1.0 } else { 1.0 };
                pieces.push((xa, xr, first));
                pieces.push((xr, xb, -first));
            }
        }
        let g0: f64 = pieces.iter().map(|(a, b, s)| s * (b - a)).sum();
        let mut out = SpectralField::zeros(1, cutoff);
        for k in 1..=cutoff as i64 {
            let i2pik = C64::new(0.0, 2.0 * PI * k as f64);
            let mut integral = C64::new(0.0, 0.0);
            for &(a, b, s) in &pieces {
                integral += (C64::from_polar(1.0, 2.0 * PI * k as f64 * b) - C64::from_polar(1.0, 2.0 * PI * k as f64 * a)) * s;
            }
            // ĝ_k = -g(0)/(i2πk) + (1/(i2πk)) ∫ sign(D - c) e^{i2πky} dy
            let coeff = (integral / i2pik - g0) / i2pik;
            out.set(&[k], coeff);
            out.set(&[-k], coeff.conj());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Torus,
    Euclidean,
}

impl Metric {
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (a, b) in x.iter().zip(y) {
            let mut d = (a - b).abs();
            if *self == Metric::Torus {
                d = d.rem_euclid(1.0);
                d = d.min(1.0 - d);
            }
            acc += d * d;
        }
        acc.sqrt()
    }
}

/// Weighted point cloud in ℝ^d (or on the torus when used with [`Metric::Torus`]).
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.len() % dim != 0 {
            return Err(Error::InvalidArgument("point list length is not a multiple of dim".into()));
        }
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if points.len() / dim != weights.len() {
            return Err(Error::InvalidArgument("one weight per point required".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("coordinates must be finite".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        // summation error of n equal weights grows like n·ε
        if (total - 1.0).abs() > 1e-12 * (weights.len() as f64).max(1.0) {
            return Err(Error::NotNormalized { mean: total });
        }
        Ok(Self { dim, points, weights })
    }

    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        let n = if dim == 0 { 0 } else { points.len() / dim };
        Self::new(dim, points, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|&x| (x - w).abs() <= 1e-15)
    }
}

fn cost_matrix(a: &PointCloud, b: &PointCloud, metric: Metric) -> Vec<f64> {
    let mut c = Vec::with_capacity(a.len() * b.len());
    for i in 0..a.len() {
        let x = a.point(i);
        for j in 0..b.len() {
            c.push(metric.distance(x, b.point(j)));
        }
    }
    c
}

/// Exact optimal transport cost with ground metric `|x - y|`.
/// Equal-size uniform clouds go through the assignment solver; everything else through the network simplex.
pub fn w1_discrete(a: &PointCloud, b: &PointCloud, metric: Metric) -> Result<f64> {
    w1_discrete_with_budget(a, b, metric, DEFAULT_LP_BUDGET)
}

pub fn w1_discrete_with_budget(a: &PointCloud, b: &PointCloud, metric: Metric, budget: usize) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch(a.dim, b.dim));
    }
    let entries = a.len() * b.len();
    if entries > budget {
        return Err(Error::BudgetExceeded { entries, budget });
    }
    if a.len() == b.len() && a.is_uniform() && b.is_uniform() {
        let cost = cost_matrix(a, b, metric);
        let (total, _) = assignment(&cost, a.len());
        return Ok(total / a.len() as f64);
    }
    network_simplex(a, b, metric)
}

/// Minimum-cost perfect matching on a dense `n × n` cost matrix by shortest augmenting paths.
/// Returns the total cost and `row → column` assignment.
pub fn assignment(cost: &[f64], n: usize) -> (f64, Vec<usize>) {
    assert_eq!(cost.len(), n * n);
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let ui0 = u[i0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - ui0 - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![0usize; n];
    let mut total = 0.0;
    for j in 1..=n {
        if p[j] > 0 {
            rows[p[j] - 1] = j - 1;
            total += cost[(p[j] - 1) * n + j - 1];
        }
    }
    (total, rows)
}

/// Transportation network simplex on the complete bipartite graph.
pub fn network_simplex(a: &PointCloud, b: &PointCloud, metric: Metric) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch(a.dim, b.dim));
    }
    let cost = cost_matrix(a, b, metric);
    transportation_simplex(a.weights(), b.weights(), &cost)
}

/// Solves `min Σ c_ij x_ij` subject to row sums `supply`, column sums `demand`, `x ≥ 0`.
pub fn transportation_simplex(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<f64> {
    let (n, m) = (supply.len(), demand.len());
    assert_eq!(cost.len(), n * m);
    let nodes = n + m;
    // Basic arcs: (row, col, flow). Initial spanning tree from the north-west corner rule.
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(nodes - 1);
    {
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        while i < n && j < m {
            let x = s[i].min(d[j]);
            basis.push((i, j, x));
            s[i] -= x;
            d[j] -= x;
            if i == n - 1 {
                j += 1;
            } else if j == m - 1 || s[i] <= d[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }
    let scale = cost.iter().fold(0.0f64, |a, c| a.max(c.abs())).max(1e-300);
    let tol = 1e-12 * scale;
    let mut is_basic = vec![false; n * m];
    for &(i, j, _) in &basis {
        is_basic[i * m + j] = true;
    }
    let max_pivots = 200 * nodes + 10_000;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    let mut pot = vec![0.0; nodes];
    let mut parent = vec![(usize::MAX, usize::MAX); nodes];
    let mut order = Vec::with_capacity(nodes);
    let block = ((n as f64).sqrt() as usize).max(1);
    let mut row_cursor = 0usize;
    for _ in 0..max_pivots {
        for a in adj.iter_mut() {
            a.clear();
        }
        for (e, &(i, j, _)) in basis.iter().enumerate() {
            adj[i].push((n + j, e));
            adj[n + j].push((i, e));
        }
        // Potentials with u_0 = 0; tree rooted at row 0.
        parent.iter_mut().for_each(|p| *p = (usize::MAX, usize::MAX));
        order.clear();
        order.push(0);
        parent[0] = (0, usize::MAX);
        pot[0] = 0.0;
        let mut head = 0;
        while head < order.len() {
            let x = order[head];
            head += 1;
            for &(y, e) in &adj[x] {
                if parent[y].0 == usize::MAX {
                    parent[y] = (x, e);
                    let (i, j, _) = basis[e];
                    // u_i + v_j = c_ij
                    pot[y] = cost[i * m + j] - pot[x];
                    order.push(y);
                }
            }
        }
        if order.len() != nodes {
            return Err(Error::NonConvergence { iterations: 0, residual: f64::NAN });
        }
        // Block pricing over rows.
        let mut best = (-tol, usize::MAX, usize::MAX);
        let mut scanned = 0;
        while scanned < n {
            let end = (scanned + block).min(n);
            for r in scanned..end {
                let i = (row_cursor + r) % n;
                let ui = pot[i];
                let row = &cost[i * m..(i + 1) * m];
                for j in 0..m {
                    let rc = row[j] - ui - pot[n + j];
                    if rc < best.0 && !is_basic[i * m + j] {
                        best = (rc, i, j);
                    }
                }
            }
            scanned = end;
            if best.1 != usize::MAX {
                break;
            }
        }
        row_cursor = (row_cursor + scanned) % n;
        if best.1 == usize::MAX {
            return Ok(basis.iter().map(|&(i, j, x)| x * cost[i * m + j]).sum());
        }
        let (ei, ej) = (best.1, best.2);
        // Cycle: tree path between row ei and column ej, then the entering arc.
        let path = tree_path(&parent, &order, ei, n + ej);
        // path lists arcs from ei to n+ej; orientation alternates starting with '-' at the ei end.
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 && basis[e].2 < theta {
                theta = basis[e].2;
                leave = e;
            }
        }
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis[e].2 -= theta;
            } else {
                basis[e].2 += theta;
            }
        }
        basis[leave].2 = basis[leave].2.max(0.0);
        let (li, lj, _) = basis[leave];
        is_basic[li * m + lj] = false;
        basis[leave] = (ei, ej, theta);
        is_basic[ei * m + ej] = true;
    }
    Err(Error::NonConvergence { iterations: max_pivots, residual: f64::NAN })
}

// Arc indices on the tree path from node `from` to node `to`, ordered from `from`.
fn tree_path(parent: &[(usize, usize)], order: &[usize], from: usize, to: usize) -> Vec<usize> {
    let depth = |mut x: usize| {
        let mut d = 0;
        while x != order[0] {
            x = parent[x].0;
            d += 1;
        }
        d
    };
    let (mut x, mut y) = (from, to);
    let (mut dx, mut dy) = (depth(x), depth(y));
    let mut left = Vec::new();
    let mut right = Vec::new();
    while dx > dy {
        left.push(parent[x].1);
        x = parent[x].0;
        dx -= 1;
    }
    while dy > dx {
        right.push(parent[y].1);
        y = parent[y].0;
        dy -= 1;
    }
    while x != y {
        left.push(parent[x].1);
        x = parent[x].0;
        right.push(parent[y].1);
        y = parent[y].0;
    }
    right.reverse();
    left.extend(right);
    left
}

/// Exact W1 between weighted point sets on the real line: `∫ |F_a - F_b|`.
pub fn w1_line(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.dim != 1 || b.dim != 1 {
        return Err(Error::DimensionUnsupported(a.dim.max(b.dim)));
    }
    let mut events: Vec<(f64, f64)> = a.points.iter().zip(&a.weights).map(|(&x, &w)| (x, w)).collect();
    events.extend(b.points.iter().zip(&b.weights).map(|(&x, &w)| (x, -w)));
    events.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let mut acc = 0.0;
    let mut diff = 0.0;
    for w in events.windows(2) {
        diff += w[0].1;
        acc += diff.abs() * (w[1].0 - w[0].0);
    }
    Ok(acc)
}

/// Entropic (Sinkhorn) estimate of W1, rounded onto the transport polytope so the
/// returned cost is that of a feasible plan and therefore bounds the exact value from above.
pub fn w1_approx(a: &PointCloud, b: &PointCloud, metric: Metric, eps_reg: f64) -> Result<f64> {
    if !(eps_reg > 0.0) {
        return Err(Error::InvalidArgument("eps_reg must be positive".into()));
    }
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch(a.dim, b.dim));
    }
    let (n, m) = (a.len(), b.len());
    let cost = cost_matrix(a, b, metric);
    let la: Vec<f64> = a.weights.iter().map(|w| w.max(1e-300).ln()).collect();
    let lb: Vec<f64> = b.weights.iter().map(|w| w.max(1e-300).ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut buf = vec![0.0; n.max(m)];
    let max_iter = 20_000;
    let mut converged = false;
    let mut err = f64::INFINITY;
    for it in 0..max_iter {
        for i in 0..n {
            for j in 0..m {
                buf[j] = (g[j] - cost[i * m + j]) / eps_reg;
            }
            f[i] = eps_reg * (la[i] - logsumexp(&buf[..m]));
        }
        for j in 0..m {
            for i in 0..n {
                buf[i] = (f[i] - cost[i * m + j]) / eps_reg;
            }
            g[j] = eps_reg * (lb[j] - logsumexp(&buf[..n]));
        }
        if it % 10 == 9 {
            err = 0.0;
            for i in 0..n {
                let row: f64 = (0..m).map(|j| ((f[i] + g[j] - cost[i * m + j]) / eps_reg).exp()).sum();
                err += (row - a.weights[i]).abs();
            }
            // rounding absorbs the remaining marginal defect
            if err < 1e-6 {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations: max_iter, residual: err });
    }
    let mut plan: Vec<f64> = (0..n * m)
        .map(|idx| ((f[idx / m] + g[idx % m] - cost[idx]) / eps_reg).exp())
        .collect();
    round_to_marginals(&mut plan, a.weights(), b.weights());
    Ok(plan.iter().zip(&cost).map(|(p, c)| p * c).sum())
}

fn logsumexp(v: &[f64]) -> f64 {
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

// Scales rows and columns down to their marginals, then repairs with a rank-one term.
fn round_to_marginals(plan: &mut [f64], a: &[f64], b: &[f64]) {
    let (n, m) = (a.len(), b.len());
    for i in 0..n {
        let row: f64 = plan[i * m..(i + 1) * m].iter().sum();
        if row > a[i] {
            let s = a[i] / row;
            plan[i * m..(i + 1) * m].iter_mut().for_each(|x| *x *= s);
        }
    }
    for j in 0..m {
        let col: f64 = (0..n).map(|i| plan[i * m + j]).sum();
        if col > b[j] {
            let s = b[j] / col;
            (0..n).for_each(|i| plan[i * m + j] *= s);
        }
    }
    let ea: Vec<f64> = (0..n).map(|i| a[i] - plan[i * m..(i + 1) * m].iter().sum::<f64>()).collect();
    let eb: Vec<f64> = (0..m).map(|j| b[j] - (0..n).map(|i| plan[i * m + j]).sum::<f64>()).collect();
    let mass: f64 = ea.iter().sum();
    if mass > 0.0 {
        for i in 0..n {
            for j in 0..m {
                plan[i * m + j] += ea[i] * eb[j] / mass;
            }
        }
    }
}
