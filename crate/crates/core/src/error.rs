use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("density is negative: min {min:e} below -{tol:e}")]
    NegativeDensity { min: f64, tol: f64 },
    #[error("density mean {mean} is not 1")]
    NotNormalized { mean: f64 },
    #[error("resolution {got} too low, need at least {needed}")]
    ResolutionTooLow { needed: usize, got: usize },
    #[error("empty point set")]
    EmptyPointSet,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cutoff mismatch: {0} vs {1}")]
    CutoffMismatch(usize, usize),
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("dimension {0} unsupported by this operation")]
    DimensionUnsupported(usize),
    #[error("transport problem of {entries} entries exceeds budget {budget}")]
    BudgetExceeded { entries: usize, budget: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("functional has no flat derivative")]
    NoDerivative,
    #[error("eta {0} outside (0,1)")]
    EtaOutOfRange(f64),
    #[error("Fejer rank must be at least 1")]
    RankTooSmall,
    #[error("mollifier kernel rejected: {0}")]
    BadKernel(String),
    #[error("fixed-point map is not a contraction: eps {eps:e} >= limit {limit:e}")]
    ContractionViolated { eps: f64, limit: f64 },
    #[error("base measure density {min_density:e} below lower-bound threshold {threshold:e}")]
    LowerBoundViolated { min_density: f64, threshold: f64 },
    #[error("lambda {0} outside (0,1)")]
    LambdaOutOfRange(f64),
    #[error("time step {dt:e} violates the CFL bound; stable step is {stable_dt:e}")]
    CFLViolation { dt: f64, stable_dt: f64 },
    #[error("Picard iteration stalled at residual {residual:e}")]
    PicardStalled { residual: f64 },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("sampling failed: {0}")]
    SamplingFailure(String),
    #[error("finite-difference step {0:e} underflows")]
    StepUnderflow(f64),
    #[error("Hamiltonian and Lagrangian are not a Legendre pair (defect {defect:e})")]
    LegendreInconsistent { defect: f64 },
    #[error("invalid Sobolev order s = {s} (need s > {min})")]
    InvalidSobolevOrder { s: f64, min: f64 },
    #[error("degenerate points for a log-log fit: {0}")]
    DegeneratePoints(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
