//! Relative-risk curve `RR(t) = P(T ≤ t | A=1) / P(T ≤ t | A=0)` from a Cox
//! fit, with bootstrap pointwise and sup-statistic uniform bands.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimate::cox::{cox_fit, CoxFit, CovariateSelector};
use crate::estimate::rmst::normal_quantile;
use crate::exec::Exec;
use crate::seed::{tags, SeedSpec};

/// Estimate with pointwise and uniform bands on a grid. NaN marks a gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandedCurve {
    pub times: Vec<f64>,
    pub estimate: Vec<f64>,
    pub lo_pointwise: Vec<f64>,
    pub hi_pointwise: Vec<f64>,
    pub lo_uniform: Vec<f64>,
    pub hi_uniform: Vec<f64>,
    pub level: f64,
}

impl BandedCurve {
    pub fn is_gap(&self, i: usize) -> bool {
        self.estimate[i].is_nan()
    }
}

/// Plug-in `RR(t)` for cumulative baseline `cumhaz0` and hazard ratio `e^β`; `None` where `Λ̂₀ = 0`.
pub fn relative_risk(cumhaz0: f64, beta: f64) -> Option<f64> {
    if cumhaz0 > 0.0 {
        Some(-(-cumhaz0 * beta.exp()).exp_m1() / -(-cumhaz0).exp_m1())
    } else {
        None
    }
}

fn arm_beta(fit: &CoxFit) -> Result<f64> {
    fit.coefficient("arm")
        .map(|c| c.0)
        .ok_or_else(|| Error::Domain("relative-risk curve needs a fit that includes the arm".into()))
}

fn rr_on_grid(fit: &CoxFit, tgrid: &[f64]) -> Result<Vec<f64>> {
    let beta = arm_beta(fit)?;
    let base = fit.baseline();
    Ok(tgrid.iter().map(|&t| relative_risk(base.eval(t), beta).unwrap_or(f64::NAN)).collect())
}

/// Subject-level bootstrap bands around the plug-in relative-risk curve.
///
/// Pointwise: estimate ± z·SE_boot. Uniform: the same SE scaled by the
/// bootstrap quantile of `sup_t |RR*(t) − RR̂(t)| / SE_boot(t)`, never below `z`.
pub fn rr_curve(
    data: &Dataset,
    fit: &CoxFit,
    selector: &CovariateSelector,
    tgrid: &[f64],
    level: f64,
    n_boot: usize,
    seed: SeedSpec,
) -> Result<BandedCurve> {
    rr_curve_with(data, fit, selector, tgrid, level, n_boot, seed, Exec::default())
}

#[allow(clippy::too_many_arguments)]
pub fn rr_curve_with(
    data: &Dataset,
    fit: &CoxFit,
    selector: &CovariateSelector,
    tgrid: &[f64],
    level: f64,
    n_boot: usize,
    seed: SeedSpec,
    exec: Exec,
) -> Result<BandedCurve> {
    if n_boot < 200 {
        return Err(Error::Domain(format!("n_boot must be at least 200, got {n_boot}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must be in (0,1), got {level}")));
    }
    if let Some(&t) = tgrid.iter().find(|&&t| t < 0.0 || t > fit.support_end()) {
        return Err(Error::Domain(format!("grid time {t} outside the baseline support [0, {}]", fit.support_end())));
    }
    let estimate = rr_on_grid(fit, tgrid)?;
    let boot_seed = seed.derive(tags::BOOTSTRAP);
    let n = data.len();
    let replicates: Vec<Option<Vec<f64>>> = exec.map(n_boot, |b| {
        let mut rng = boot_seed.stream(b as u64).rng();
        let samples = (0..n).map(|_| data.samples[rng.random_range(0..n)].clone()).collect();
        let resampled = Dataset { samples, covariate_names: data.covariate_names.clone(), latent: None };
        cox_fit(&resampled, selector).ok().and_then(|f| rr_on_grid(&f, tgrid).ok())
    });
    let ok: Vec<Vec<f64>> = replicates.into_iter().flatten().collect();
    if ok.len() < n_boot / 2 {
        return Err(Error::NonConvergence { iterations: ok.len(), last_beta: fit.beta.clone() });
    }

    let g = tgrid.len();
    let mut se = vec![f64::NAN; g];
    for i in 0..g {
        if estimate[i].is_nan() {
            continue;
        }
        let vals: Vec<f64> = ok.iter().map(|r| r[i]).filter(|v| v.is_finite()).collect();
        if vals.len() >= 2 {
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            se[i] = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
        }
    }
    let z = normal_quantile(0.5 + level / 2.0);
    let mut sups: Vec<f64> = ok
        .iter()
        .map(|r| {
            (0..g)
                .filter(|&i| se[i] > 0.0 && r[i].is_finite())
                .map(|i| (r[i] - estimate[i]).abs() / se[i])
                .fold(0.0, f64::max)
        })
        .collect();
    sups.sort_by(f64::total_cmp);
    let q_idx = ((level * sups.len() as f64).ceil() as usize).clamp(1, sups.len()) - 1;
    let c = sups[q_idx].max(z);

    let band = |k: f64, sign: f64| -> Vec<f64> {
        (0..g)
            .map(|i| if se[i].is_finite() { estimate[i] + sign * k * se[i] } else { estimate[i] })
            .collect()
    };
    Ok(BandedCurve {
        times: tgrid.to_vec(),
        lo_pointwise: band(z, -1.0),
        hi_pointwise: band(z, 1.0),
        lo_uniform: band(c, -1.0),
        hi_uniform: band(c, 1.0),
        estimate,
        level,
    })
}
