//! Experiment configs, censoring schemes, replicated runs and the oracle suite.

pub mod censoring;
pub mod config;
pub mod experiment;
pub mod figures;
pub mod svg;
pub mod verify;

pub use censoring::{apply_censoring, CensoringScheme};
pub use config::{Dgp, Estimator, ExperimentConfig};
pub use experiment::{needs_data, run_experiment, run_experiment_with, Aggregate, ExperimentReport, ReplicateResult, ReportFormat};
pub use figures::{calibrate_constant_rate, fig9_curve};
pub use svg::render_svg;
pub use verify::{verify, CheckResult, VerifyOptions};
