//! Parameter schedules tying the regularization scales to the particle count.

use crate::error::{HarnessError, Result};

/// Sup-convolution scale `ε = 1/√N`.
pub fn schedule_eps(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(HarnessError::InvalidArgument("N must be at least 1".into()));
    }
    Ok(1.0 / (n as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scales {
    pub delta: f64,
    pub eps: f64,
    pub lambda: f64,
}

/// `δ = N^{-1/(2s+d/2+η+1)}`, `ε = 1/(Nδ)`, `λ = C·ε·δ^{-(2s+d/2+η-1)}`.
///
/// `c` is the unspecified constant in `λ`.
pub fn schedule_delta_eps_lambda(n: usize, s: f64, eta: f64, dim: usize, c: f64) -> Result<Scales> {
    if n == 0 {
        return Err(HarnessError::InvalidArgument("N must be at least 1".into()));
    }
    let limit = dim as f64 / 2.0 + 1.0;
    if !(s > limit) {
        return Err(HarnessError::InvalidSobolevOrder { s, limit });
    }
    if !(eta > 0.0) {
        return Err(HarnessError::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    let nf = n as f64;
    let core = 2.0 * s + dim as f64 / 2.0 + eta;
    let delta = nf.powf(-1.0 / (core + 1.0));
    let eps = 1.0 / (nf * delta);
    let lambda = c * eps * delta.powf(-(core - 1.0));
    Ok(Scales { delta, eps, lambda })
}
