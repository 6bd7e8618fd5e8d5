//! Classical survival estimators.

pub mod aalen;
pub mod cox;
pub mod km;
pub mod rmst;
pub mod rr;

pub use aalen::{aalen_fit, constant_effect, AalenFit, ConstantEffect};
pub use cox::{cox_changepoint_fit, cox_fit, ChangePointCoxFit, CoxFit, CovariateSelector};
pub use km::{kaplan_meier, nelson_aalen, KaplanMeier, NelsonAalen, RiskTable};
pub use rmst::{rmst, rmtl_ratio, RatioCi, Rmst};
pub use rr::{relative_risk, rr_curve, rr_curve_with, BandedCurve};

/// `log S₁(t) / log S₀(t)`, which equals `e^β` at every `t` under proportional hazards.
pub fn log_survival_ratio(surv1: f64, surv0: f64) -> Option<f64> {
    if surv0 > 0.0 && surv0 < 1.0 && surv1 > 0.0 {
        Some(surv1.ln() / surv0.ln())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_survival_ratio_recovers_hazard_ratio() {
        let s0 = (-0.7f64).exp();
        let s1 = s0.powf(0.5);
        assert!((log_survival_ratio(s1, s0).unwrap() - 0.5).abs() < 1e-14);
        assert!(log_survival_ratio(0.5, 1.0).is_none());
    }
}
