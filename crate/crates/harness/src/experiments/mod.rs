//! One module per subcommand. Each builds its tasks, runs them through the
//! [`Context`](crate::run::Context) and derives fits and checks from the rows.

use std::sync::Arc;

use mfc_core::functionals::{CylindricalFunctional, OuterMap, SharedFunctional};
use mfc_core::spectral::{SpectralField, C64};

pub mod cole_hopf;
pub mod coupon;
pub mod empirical_w1;
pub mod fp_stability;
pub mod mfc_gap;
pub mod project;
pub mod regularity;
pub mod supconv;
pub mod viscosity;

/// `amp·cos(2πkx)`.
pub fn cos_field(cutoff: usize, k: i64, amp: f64) -> SpectralField {
    let mut f = SpectralField::zeros(1, cutoff);
    f.set(&[k], C64::new(amp / 2.0, 0.0));
    f.set(&[-k], C64::new(amp / 2.0, 0.0));
    f
}

/// `amp·sin(2πkx)`; with `f = Σ c_k e^{-i2πkx}` this is `c_k = i·amp/2`.
pub fn sin_field(cutoff: usize, k: i64, amp: f64) -> SpectralField {
    let mut f = SpectralField::zeros(1, cutoff);
    f.set(&[k], C64::new(0.0, amp / 2.0));
    f.set(&[-k], C64::new(0.0, -amp / 2.0));
    f
}

/// `sin(3·m(cos 2πx)) + cos(2·m(sin 4πx))/2`, smooth and neither convex nor concave.
pub fn nonconvex(cutoff: usize) -> CylindricalFunctional {
    let outer = OuterMap::new(|y| (3.0 * y[0]).sin() + 0.5 * (2.0 * y[1]).cos(), |y| vec![3.0 * (3.0 * y[0]).cos(), -(2.0 * y[1]).sin()])
        .with_gradient_bound(10f64.sqrt())
        .with_hessian_bound(9.0);
    CylindricalFunctional::new(vec![cos_field(cutoff, 1, 1.0), sin_field(cutoff, 2, 1.0)], outer).expect("two real test functions")
}

/// `cos(2·m(sin 2πx))`, a second non-convex datum.
pub fn nonconvex_terminal(cutoff: usize) -> CylindricalFunctional {
    let outer = OuterMap::new(|y| (2.0 * y[0]).cos(), |y| vec![-2.0 * (2.0 * y[0]).sin()]).with_gradient_bound(2.0).with_hessian_bound(4.0);
    CylindricalFunctional::new(vec![sin_field(cutoff, 1, 1.0)], outer).expect("one real test function")
}

pub fn shared(phi: CylindricalFunctional) -> SharedFunctional {
    Arc::new(phi)
}
