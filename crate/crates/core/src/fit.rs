//! Least-squares power-law fits in log-log coordinates.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr_slope: f64,
    pub r_squared: f64,
    /// `(log x, log y)`, sorted.
    pub points: Vec<(f64, f64)>,
}

/// Ordinary least squares of `log y` on `log x`.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<RateFit> {
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::DegeneratePoints(format!("non-positive or non-finite point ({x}, {y})")));
    }
    fit_logs(points.iter().map(|(x, y)| (x.ln(), y.ln())).collect())
}

/// Fit on points already in log coordinates.
pub fn fit_logs(mut logs: Vec<(f64, f64)>) -> Result<RateFit> {
    if logs.len() < 3 {
        return Err(Error::DegeneratePoints(format!("{} points, need at least 3", logs.len())));
    }
    // sorting makes every sum below independent of the caller's ordering
    logs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if !(sxx > 1e-300) {
        return Err(Error::DegeneratePoints("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr_slope = (sse / (n - 2.0) / sxx).sqrt();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit { slope, intercept, stderr_slope, r_squared, points: logs })
}
