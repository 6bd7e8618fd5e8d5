//! Principal-stratum causal hazard ratio: closed forms under the shared gamma
//! coupling and a binned Monte-Carlo estimator on simulated pairs.

use serde::{Deserialize, Serialize};

use crate::causal::kendall::theta_from_tau;
use crate::curve::Table;
use crate::data::PotentialOutcomePair;
use crate::error::{Error, Result};
use crate::estimate::cox::CoxFit;
use crate::exec::Exec;

/// Joint survivors below which a grid point is flagged.
pub const MIN_STRATUM: usize = 200;

/// `e^β exp{θ t (e^β − 1)}`: the causal hazard ratio for unit baseline hazard.
pub fn causal_hr_closed(beta: f64, theta: f64, t: f64) -> f64 {
    causal_hr_gamma(beta, theta, t)
}

/// `e^β exp{θ Λ₀(t) (e^β − 1)}`.
pub fn causal_hr_gamma(beta: f64, theta: f64, cumhaz0: f64) -> f64 {
    let e = beta.exp();
    e * (theta * cumhaz0 * (e - 1.0)).exp()
}

/// Gamma-coupling causal hazard ratio over `tgrid` using the fitted arm
/// coefficient and Breslow baseline.
pub fn causal_hr_from_coxfit(fit: &CoxFit, theta: f64, tgrid: &[f64]) -> Result<Table> {
    if !(theta >= 0.0) {
        return Err(Error::Domain(format!("theta must be >= 0, got {theta}")));
    }
    let (beta, _) = fit
        .coefficient("arm")
        .ok_or_else(|| Error::Domain("fit has no arm coefficient".into()))?;
    let values = tgrid
        .iter()
        .map(|&t| Ok(causal_hr_gamma(beta, theta, fit.baseline_cumhaz.eval(t)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Table::from_curve("causal_hr", tgrid, &values))
}

/// One curve per τ, columns `t,tau_<τ>,...`.
pub fn gamma_coupling_curves(fit: &CoxFit, taus: &[f64], tgrid: &[f64]) -> Result<Table> {
    let names: Vec<String> = taus.iter().map(|t| format!("tau_{t}")).collect();
    let mut cols = vec!["t"];
    cols.extend(names.iter().map(String::as_str));
    let mut table = Table::new("gamma_coupling", &cols);
    let curves = taus
        .iter()
        .map(|&tau| causal_hr_from_coxfit(fit, theta_from_tau(tau)?, tgrid))
        .collect::<Result<Vec<_>>>()?;
    for (i, &t) in tgrid.iter().enumerate() {
        let mut row = vec![t];
        row.extend(curves.iter().map(|c| c.rows[i][1]));
        table.push(row);
    }
    Ok(table)
}

/// Counts within the stratum `{T⁰ ≥ t, T¹ ≥ t}` for the bin `[t, t+h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumBin {
    pub t: f64,
    pub h: f64,
    pub n: usize,
    pub d0: usize,
    pub d1: usize,
    /// Units with both potential events in the bin.
    pub d01: usize,
}

impl StratumBin {
    pub fn count(pairs: &[PotentialOutcomePair], t: f64, h: f64) -> Self {
        let end = t + h;
        let mut bin = StratumBin { t, h, n: 0, d0: 0, d1: 0, d01: 0 };
        for p in pairs.iter().filter(|p| p.t0 >= t && p.t1 >= t) {
            bin.n += 1;
            let e0 = p.t0 < end;
            let e1 = p.t1 < end;
            bin.d0 += e0 as usize;
            bin.d1 += e1 as usize;
            bin.d01 += (e0 && e1) as usize;
        }
        bin
    }

    pub fn flagged(&self) -> bool {
        self.n < MIN_STRATUM
    }

    fn props(&self) -> (f64, f64, f64, f64) {
        let n = self.n as f64;
        (n, self.d0 as f64 / n, self.d1 as f64 / n, self.d01 as f64 / n)
    }

    pub fn hazard0(&self) -> f64 {
        self.d0 as f64 / (self.h * self.n as f64)
    }

    pub fn hazard1(&self) -> f64 {
        self.d1 as f64 / (self.h * self.n as f64)
    }

    /// `d₁/d₀`; NaN when either count is zero.
    pub fn hazard_ratio(&self) -> f64 {
        if self.d0 == 0 || self.d1 == 0 {
            f64::NAN
        } else {
            self.d1 as f64 / self.d0 as f64
        }
    }

    /// Multinomial delta-method SE of `log(d₁/d₀)`.
    pub fn log_hr_se(&self) -> f64 {
        if self.d0 == 0 || self.d1 == 0 {
            return f64::NAN;
        }
        let (n, p0, p1, p01) = self.props();
        let v = (1.0 - p1) / (n * p1) + (1.0 - p0) / (n * p0) - 2.0 * (p01 - p1 * p0) / (n * p1 * p0);
        v.max(0.0).sqrt()
    }

    pub fn hazard_difference(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.hazard1() - self.hazard0()
        }
    }

    pub fn hazard_difference_se(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        let (n, p0, p1, p01) = self.props();
        let v = (p1 * (1.0 - p1) + p0 * (1.0 - p0) - 2.0 * (p01 - p1 * p0)) / n;
        v.max(0.0).sqrt() / self.h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McHrPoint {
    pub t: f64,
    pub n_stratum: usize,
    pub hr: f64,
    /// Delta-method SE of `hr`.
    pub se: f64,
    pub log_se: f64,
    pub flagged: bool,
}

/// Binned principal-stratum hazard ratio at each grid point.
pub fn causal_hr_mc(pairs: &[PotentialOutcomePair], tgrid: &[f64], h: f64) -> Result<Vec<McHrPoint>> {
    causal_hr_mc_with(pairs, tgrid, h, Exec::default())
}

pub fn causal_hr_mc_with(pairs: &[PotentialOutcomePair], tgrid: &[f64], h: f64, exec: Exec) -> Result<Vec<McHrPoint>> {
    let bins = stratum_bins(pairs, tgrid, h, exec)?;
    Ok(bins
        .iter()
        .map(|b| {
            let hr = b.hazard_ratio();
            let log_se = b.log_hr_se();
            McHrPoint { t: b.t, n_stratum: b.n, hr, se: hr * log_se, log_se, flagged: b.flagged() || hr.is_nan() }
        })
        .collect())
}

pub(crate) fn stratum_bins(pairs: &[PotentialOutcomePair], tgrid: &[f64], h: f64, exec: Exec) -> Result<Vec<StratumBin>> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("bandwidth must be positive, got {h}")));
    }
    if tgrid.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Domain("grid times must be >= 0".into()));
    }
    Ok(exec.map(tgrid.len(), |i| StratumBin::count(pairs, tgrid[i], h)))
}

/// `t,hr,se,n_stratum,flagged` table.
pub fn mc_table(points: &[McHrPoint]) -> Table {
    let mut table = Table::new("causal_hr_mc", &["t", "hr", "se", "n_stratum", "flagged"]);
    for p in points {
        table.push(vec![p.t, p.hr, p.se, p.n_stratum as f64, p.flagged as u8 as f64]);
    }
    table
}
