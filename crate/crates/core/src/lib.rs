pub mod error;
pub mod fit;
pub mod functionals;
pub mod particle;
pub mod pde;
pub mod regularize;
pub mod rng;
pub mod spectral;
pub mod transport;

pub use error::{Error, Result};
