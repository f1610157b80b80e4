//! Experiment orchestration for the mean-field-control laboratory: configs, parameter
//! sweeps, rate fits and CSV/JSON reports behind the `rates` CLI.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod run;
pub mod schedule;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use mfc_core::fit::{fit_loglog, RateFit};
pub use report::{CellRow, Check, FitRecord, Report};
pub use run::{run_and_write, run_experiment, Experiment};
pub use schedule::{schedule_delta_eps_lambda, schedule_eps, Scales};
