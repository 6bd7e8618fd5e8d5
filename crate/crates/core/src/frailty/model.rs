use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::{CumHaz, NEVER};

/// Marginal change-point Cox model: hazard ratio `e^{β₁}` on `(0, ν]` and
/// `e^{β₂}` on `(ν, ∞)` over a shared baseline. `ν = ∞` is the plain Cox model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    pub beta1: f64,
    pub beta2: f64,
    pub nu: f64,
    pub baseline: CumHaz,
}

impl MarginalModel {
    pub fn new(beta1: f64, beta2: f64, nu: f64, baseline: CumHaz) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::Domain(format!("change point must be positive, got {nu}")));
        }
        if !beta1.is_finite() || !beta2.is_finite() {
            return Err(Error::Domain("coefficients must be finite".into()));
        }
        Ok(Self { beta1, beta2, nu, baseline })
    }

    /// Plain Cox model with constant baseline hazard.
    pub fn cox(beta: f64, rate: f64) -> Self {
        Self { beta1: beta, beta2: beta, nu: f64::INFINITY, baseline: CumHaz::Rate(rate) }
    }

    /// Marginal hazard ratio at `t`.
    pub fn hazard_ratio(&self, t: f64) -> f64 {
        if t <= self.nu {
            self.beta1.exp()
        } else {
            self.beta2.exp()
        }
    }

    /// `Λ₀(ν)`, or `Λ₀(t)` if `t` comes first.
    fn base_to_nu(&self, t: f64) -> f64 {
        self.baseline.eval(t.min(self.nu))
    }

    /// `Λ(t; a)`.
    pub fn cumhaz(&self, t: f64, arm: u8) -> f64 {
        let a = arm as f64;
        let first = (self.beta1 * a).exp() * self.base_to_nu(t);
        if t <= self.nu {
            first
        } else {
            first + (self.beta2 * a).exp() * self.baseline.between(self.nu, t)
        }
    }

    /// `inf{t : Λ(t; a) ≥ u}`.
    pub fn inverse_cumhaz(&self, u: f64, arm: u8) -> Result<f64> {
        let a = arm as f64;
        let scale1 = (self.beta1 * a).exp();
        let at_nu = if self.nu.is_finite() { scale1 * self.baseline.eval(self.nu) } else { f64::INFINITY };
        if u <= at_nu {
            return self.baseline.inverse(u / scale1);
        }
        let rest = (u - at_nu) / (self.beta2 * a).exp();
        let t = self.baseline.inverse(self.baseline.eval(self.nu) + rest)?;
        Ok(if t == NEVER { NEVER } else { t.max(self.nu) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::step::StepFunction;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cumhaz_and_inverse() {
        let m = MarginalModel::new(-(2f64.ln()), 0.0, 4.0, CumHaz::Rate(0.4)).unwrap();
        assert_abs_diff_eq!(m.cumhaz(2.0, 1), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(m.cumhaz(6.0, 1), 0.8 + 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(m.cumhaz(6.0, 0), 2.4, epsilon = 1e-15);
        for arm in [0, 1] {
            for t in [0.5, 3.9, 4.0, 4.1, 9.0] {
                assert_abs_diff_eq!(m.inverse_cumhaz(m.cumhaz(t, arm), arm).unwrap(), t, epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(m.hazard_ratio(4.0), 0.5, epsilon = 1e-15);
        assert_eq!(m.hazard_ratio(4.5), 1.0);
    }

    #[test]
    fn piecewise_baseline_inverse() {
        let h = StepFunction::new(vec![1.0], vec![1.0, 0.0]).unwrap();
        let m = MarginalModel::new(0.0, 0.0, f64::INFINITY, CumHaz::PiecewiseRate(h)).unwrap();
        assert_eq!(m.inverse_cumhaz(2.0, 0).unwrap(), NEVER);
        assert!(MarginalModel::new(0.0, 0.0, 0.0, CumHaz::Rate(1.0)).is_err());
    }
}
