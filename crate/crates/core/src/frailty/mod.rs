//! Frailty distributions and the conditional view of a marginal model.

pub mod curves;
pub mod dgp;
pub mod model;
pub mod spec;

pub use curves::{
    conditional_cumhaz, hrz, hrz_curve, hrz_gamma_closed, hrz_via_g, selection_curve, selection_mean,
};
pub use dgp::ConditionalHazardDgp;
pub use model::MarginalModel;
pub use spec::FrailtySpec;
