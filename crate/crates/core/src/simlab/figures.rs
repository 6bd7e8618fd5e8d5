use crate::causal::kendall::theta_from_tau;
use crate::curve::Table;
use crate::error::{Error, Result};
use crate::frailty::{hrz_gamma_closed, MarginalModel};
use crate::step::CumHaz;

/// Conditional hazard ratio under a gamma frailty with Kendall's `tau`,
/// for a fitted change-point model with baseline `baseline`.
pub fn fig9_curve(beta1: f64, beta2: f64, nu: f64, baseline: CumHaz, tau: f64, tgrid: &[f64]) -> Result<Table> {
    let theta = theta_from_tau(tau)?;
    let model = MarginalModel::new(beta1, beta2, nu, baseline)?;
    let values: Vec<f64> = tgrid.iter().map(|&t| hrz_gamma_closed(&model, theta, t)).collect();
    Ok(Table::from_curve("fig9", tgrid, &values))
}

/// Constant baseline rate for which the first-period conditional hazard ratio
/// reaches `target` at `ν`: `e^{β₁} exp{θ λ ν (e^{β₁} − 1)} = target`.
pub fn calibrate_constant_rate(beta1: f64, tau: f64, nu: f64, target: f64) -> Result<f64> {
    let theta = theta_from_tau(tau)?;
    let e1 = beta1.exp();
    let cumhaz = (target / e1).ln() / (theta * (e1 - 1.0));
    if !(cumhaz > 0.0) || !cumhaz.is_finite() || !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::Domain(format!(
            "no positive baseline reaches HR_Z({nu}) = {target} from e^beta1 = {e1} at tau = {tau}"
        )));
    }
    Ok(cumhaz / nu)
}
