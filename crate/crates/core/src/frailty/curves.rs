//! Conditional hazards, conditional hazard ratios and selection curves
//! implied by mapping a marginal model through an assumed frailty.

use crate::curve::Table;
use crate::error::Result;
use crate::frailty::model::MarginalModel;
use crate::frailty::spec::FrailtySpec;

/// `Λ*(t; a) = φ⁻¹(e^{−Λ(t;a)})`.
pub fn conditional_cumhaz(m: &MarginalModel, f: &FrailtySpec, arm: u8, t: f64) -> Result<f64> {
    f.inv_laplace_neglog(m.cumhaz(t.max(0.0), arm))
}

/// Closed-form `HR_Z(t)` for a gamma frailty with variance `theta`.
pub fn hrz_gamma_closed(m: &MarginalModel, theta: f64, t: f64) -> f64 {
    let (e1, e2) = (m.beta1.exp(), m.beta2.exp());
    if t <= m.nu {
        e1 * (theta * m.baseline.eval(t) * (e1 - 1.0)).exp()
    } else {
        let before = theta * m.baseline.eval(m.nu) * (e1 - 1.0);
        let after = theta * m.baseline.between(m.nu, t) * (e2 - 1.0);
        e2 * (before + after).exp()
    }
}

/// `HR_Z(t) = mHR(t) · |g|(e^{−Λ(t;0)}) / |g|(e^{−Λ(t;1)})`, valid for any frailty.
pub fn hrz_via_g(m: &MarginalModel, f: &FrailtySpec, t: f64) -> Result<f64> {
    let g0 = f.posterior_mean(conditional_cumhaz(m, f, 0, t)?);
    let g1 = f.posterior_mean(conditional_cumhaz(m, f, 1, t)?);
    Ok(m.hazard_ratio(t) * g0 / g1)
}

/// Conditional hazard ratio at fixed frailty; gamma uses the closed form.
pub fn hrz(m: &MarginalModel, f: &FrailtySpec, t: f64) -> Result<f64> {
    match f {
        FrailtySpec::Gamma { theta } => Ok(hrz_gamma_closed(m, *theta, t)),
        FrailtySpec::Discrete { .. } => hrz_via_g(m, f, t),
    }
}

/// `t,value` table of `HR_Z(t)`.
pub fn hrz_curve(m: &MarginalModel, f: &FrailtySpec, tgrid: &[f64]) -> Result<Table> {
    let values = tgrid.iter().map(|&t| hrz(m, f, t)).collect::<Result<Vec<_>>>()?;
    Ok(Table::from_curve("hrz", tgrid, &values))
}

/// `E(Z | T > t, A = a)`.
pub fn selection_mean(m: &MarginalModel, f: &FrailtySpec, arm: u8, t: f64) -> Result<f64> {
    Ok(f.posterior_mean(conditional_cumhaz(m, f, arm, t)?))
}

/// Table `t,e_z_arm0,e_z_arm1,ratio` with `ratio = E(Z|T>t,A=1)/E(Z|T>t,A=0)`.
pub fn selection_curve(m: &MarginalModel, f: &FrailtySpec, tgrid: &[f64]) -> Result<Table> {
    let mut table = Table::new("selection", &["t", "e_z_arm0", "e_z_arm1", "ratio"]);
    for &t in tgrid {
        let e0 = selection_mean(m, f, 0, t)?;
        let e1 = selection_mean(m, f, 1, t)?;
        table.push(vec![t, e0, e1, e1 / e0]);
    }
    Ok(table)
}
