//! Survival estimators, frailty transforms and principal-stratum hazard
//! ratios for randomised two-arm studies.
//!
//! - [`step`], [`data`], [`seed`], [`exec`]: shared data model, step-function
//!   arithmetic and deterministic random streams.
//! - [`estimate`]: Kaplan–Meier, Nelson–Aalen, Cox (plain and change-point),
//!   Aalen least squares, RMST and the relative-risk curve.
//! - [`frailty`]: Laplace-transform algebra, conditional hazard ratios and
//!   selection curves.
//! - [`causal`]: coupled potential-outcome generators, causal hazard ratios
//!   and sensitivity analyses.
//! - [`simlab`]: experiment configs, censoring, reports and the oracle suite.

pub mod causal;
pub mod curve;
pub mod data;
pub mod error;
pub mod estimate;
pub mod exec;
pub mod frailty;
pub mod seed;
pub mod simlab;
pub mod step;

pub use data::{Dataset, PotentialOutcomePair, SurvivalSample};
pub use error::{Error, Result};
pub use exec::Exec;
pub use seed::SeedSpec;
pub use step::{inverse_cumulative, CumHaz, StepFunction};
