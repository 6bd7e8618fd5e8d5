use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimate::km::KaplanMeier;

/// Restricted mean survival and lost time up to a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rmst {
    pub horizon: f64,
    pub rmst: f64,
    pub rmtl: f64,
    /// Shared by RMST and RMTL.
    pub variance: f64,
}

/// Area under the Kaplan–Meier curve on `[0, horizon]`; no extrapolation.
pub fn rmst(km: &KaplanMeier, horizon: f64) -> Result<Rmst> {
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    if horizon > km.support_end() {
        return Err(Error::Domain(format!(
            "horizon {horizon} beyond the curve's support (last observed time {})",
            km.support_end()
        )));
    }
    let curve = km.curve();
    let area = curve.integrate(horizon)?;
    // A_j = ∫_{t_j}^{h} S(u) du
    let mut variance = 0.0;
    for (j, &t) in km.table.times.iter().enumerate() {
        if t > horizon {
            break;
        }
        let (n, d) = (km.table.n_risk[j], km.table.n_event[j]);
        if n > d {
            let a = area - curve.integrate(t)?;
            variance += a * a * d / (n * (n - d));
        }
    }
    Ok(Rmst { horizon, rmst: area, rmtl: horizon - area, variance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioCi {
    pub ratio: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

/// `RMTL_a / RMTL_b` with a delta-method interval on the log scale.
pub fn rmtl_ratio(a: &Rmst, b: &Rmst, level: f64) -> Result<RatioCi> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must be in (0,1), got {level}")));
    }
    if !(a.rmtl > 0.0 && b.rmtl > 0.0) {
        return Err(Error::Domain("RMTL ratio needs positive restricted mean time lost in both groups".into()));
    }
    let ratio = a.rmtl / b.rmtl;
    let se = (a.variance / a.rmtl.powi(2) + b.variance / b.rmtl.powi(2)).sqrt();
    let z = normal_quantile(0.5 + level / 2.0);
    Ok(RatioCi { ratio, lo: ratio * (-z * se).exp(), hi: ratio * (z * se).exp(), level })
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, SurvivalSample};
    use crate::estimate::km::kaplan_meier;
    use approx::assert_abs_diff_eq;

    #[test]
    fn no_mortality() {
        let data = Dataset::new(vec![SurvivalSample::new("a", 10.0, 0, 0), SurvivalSample::new("b", 12.0, 0, 0)]).unwrap();
        let r = rmst(&kaplan_meier(&data, None).unwrap(), 8.0).unwrap();
        assert_eq!(r.rmst, 8.0);
        assert_eq!(r.rmtl, 0.0);
        assert_eq!(r.variance, 0.0);
    }

    #[test]
    fn hand_computed_area_and_variance() {
        // events at 1,2,3 (n=3), horizon 2.5: area = 1 + 2/3 + 0.5/3
        let data = Dataset::new((1..=3).map(|i| SurvivalSample::new(i.to_string(), i as f64, 1, 0)).collect()).unwrap();
        let km = kaplan_meier(&data, None).unwrap();
        let r = rmst(&km, 2.5).unwrap();
        assert_abs_diff_eq!(r.rmst, 1.0 + 2.0 / 3.0 + 0.5 / 3.0, epsilon = 1e-14);
        // A_1 = 2/3 + 0.5/3, A_2 = 0.5/3
        let a1: f64 = 2.0 / 3.0 + 0.5 / 3.0;
        let a2: f64 = 0.5 / 3.0;
        assert_abs_diff_eq!(r.variance, a1 * a1 / 6.0 + a2 * a2 / 2.0, epsilon = 1e-14);
        assert!(rmst(&km, 3.5).is_err());
    }

    #[test]
    fn ratio_interval_brackets_estimate() {
        let a = Rmst { horizon: 30.0, rmst: 12.7, rmtl: 17.3, variance: 1.2 };
        let b = Rmst { horizon: 30.0, rmst: 10.2, rmtl: 19.8, variance: 1.0 };
        let ci = rmtl_ratio(&a, &b, 0.95).unwrap();
        assert_abs_diff_eq!(ci.ratio, 17.3 / 19.8, epsilon = 1e-15);
        assert!(ci.lo < ci.ratio && ci.ratio < ci.hi);
        assert_abs_diff_eq!((ci.ratio / ci.lo).ln(), (ci.hi / ci.ratio).ln(), epsilon = 1e-12);
    }
}
