//! Coupled potential outcomes and the principal-stratum causal hazard ratio.

pub mod coupling;
pub mod hazard_diff;
pub mod hr;
pub mod kendall;
pub mod selection;
pub mod sensitivity;

pub use coupling::{gen_coupled, gen_coupled_with, gen_two_level, CouplingSpec};
pub use hazard_diff::{hazard_difference_causal, hazard_difference_causal_with, HazardDiffOptions, HazardDifference};
pub use hr::{
    causal_hr_closed, causal_hr_from_coxfit, causal_hr_gamma, causal_hr_mc, causal_hr_mc_with, gamma_coupling_curves,
    mc_table, McHrPoint, StratumBin, MIN_STRATUM,
};
pub use kendall::{kendall_tau, kendall_tau_pairs, tau_from_theta, theta_from_tau};
pub use selection::{cox_latent_sample, cox_selection_check, frailty_survivor_mean, survivor_mean, SurvivorMean};
pub use sensitivity::{sensitivity_sr, SensitivityCurve, SensitivityInput, TimeFunction};
