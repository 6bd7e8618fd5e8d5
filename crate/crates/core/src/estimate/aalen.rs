//! Aalen additive hazards model by least squares, plus the constant-effect
//! summary of one cumulative coefficient.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimate::cox::CovariateSelector;
use crate::seed::SeedSpec;

/// Smallest accepted ratio of Cholesky pivots before the design counts as singular.
const RANK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AalenFit {
    /// `intercept` followed by the selected covariates.
    pub names: Vec<String>,
    pub times: Vec<f64>,
    /// `cumcoef[k][j]` is `B̂_j(times[k])`.
    pub cumcoef: Vec<Vec<f64>>,
    pub pointwise_var: Vec<Vec<f64>>,
    /// Last time at which the design was of full rank.
    pub estimation_end: f64,
}

impl AalenFit {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// `B̂_j(t)` with its variance (both 0 before the first event time).
    pub fn at(&self, column: usize, t: f64) -> (f64, f64) {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            (0.0, 0.0)
        } else {
            (self.cumcoef[k - 1][column], self.pointwise_var[k - 1][column])
        }
    }

    /// Increments of column `j` with their variances.
    fn increments(&self, column: usize) -> Vec<(f64, f64, f64)> {
        let mut prev = (0.0, 0.0);
        self.times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let (b, v) = (self.cumcoef[k][column], self.pointwise_var[k][column]);
                let inc = (t, b - prev.0, (v - prev.1).max(0.0));
                prev = (b, v);
                inc
            })
            .collect()
    }
}

/// Least-squares increments `ΔB̂ = (XᵀX)⁻¹ Xᵀ dN` over the risk set at each event time.
pub fn aalen_fit(data: &Dataset, selector: &CovariateSelector) -> Result<AalenFit> {
    let mut names = vec!["intercept".to_string()];
    if selector.dim() > 0 {
        names.extend(selector.names(data)?);
    }
    let p = names.len();
    let mut rows: Vec<(f64, bool, DVector<f64>)> = data
        .samples
        .iter()
        .map(|s| {
            let mut x = vec![1.0];
            x.extend(selector.row(s));
            (s.time, s.is_event(), DVector::from_vec(x))
        })
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if !rows.iter().any(|r| r.1) {
        return Err(Error::EmptySelection("no events".into()));
    }

    let mut xtx = DMatrix::<f64>::zeros(p, p);
    for r in &rows {
        xtx += &r.2 * r.2.transpose();
    }

    let mut fit = AalenFit { names, times: Vec::new(), cumcoef: Vec::new(), pointwise_var: Vec::new(), estimation_end: 0.0 };
    let mut b = DVector::<f64>::zeros(p);
    let mut v = DVector::<f64>::zeros(p);
    let mut i = 0;
    while i < rows.len() {
        let t = rows[i].0;
        let mut j = i;
        while j < rows.len() && rows[j].0 == t {
            j += 1;
        }
        if rows[i..j].iter().any(|r| r.1) {
            let inv = match full_rank_inverse(&xtx) {
                Some(m) => m,
                None if fit.times.is_empty() => {
                    return Err(Error::RankDeficient(format!("design singular at first event time {t}")))
                }
                None => break,
            };
            for r in rows[i..j].iter().filter(|r| r.1) {
                let g = &inv * &r.2;
                b += &g;
                v += g.component_mul(&g);
            }
            fit.times.push(t);
            fit.cumcoef.push(b.iter().copied().collect());
            fit.pointwise_var.push(v.iter().copied().collect());
            fit.estimation_end = t;
        }
        for r in &rows[i..j] {
            xtx -= &r.2 * r.2.transpose();
        }
        i = j;
    }
    Ok(fit)
}

fn full_rank_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = m.clone().cholesky()?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d.abs()), hi.max(d.abs())));
    if !(lo > RANK_TOL * hi) {
        return None;
    }
    Some(chol.inverse())
}

/// Constant-effect summary of one cumulative coefficient over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEffect {
    pub column: String,
    pub window: (f64, f64),
    /// Least-squares slope of `B̂(t)` on `t` over a uniform grid in the window.
    pub psi_hat: f64,
    pub se: f64,
    /// `sup |B̂(t) − fitted line|` over the grid.
    pub sup_deviation: f64,
    /// Multiplier-resampling p-value for the sup deviation.
    pub p_value: f64,
    pub n_resample: usize,
}

impl ConstantEffect {
    pub fn ci(&self, z: f64) -> (f64, f64) {
        (self.psi_hat - z * self.se, self.psi_hat + z * self.se)
    }
}

pub const EFFECT_GRID: usize = 200;

/// Slope of `B̂_column` over `window` (default: from 0 to the estimation end).
///
/// The slope is a linear functional of the increments, so its variance is the
/// weighted sum of the per-jump variances. The p-value perturbs the binned
/// increments with Gaussian multipliers and recomputes the sup deviation.
pub fn constant_effect(
    fit: &AalenFit,
    column: usize,
    window: Option<(f64, f64)>,
    n_resample: usize,
    seed: SeedSpec,
) -> Result<ConstantEffect> {
    if column >= fit.names.len() {
        return Err(Error::Domain(format!("column {column} out of range (have {})", fit.names.len())));
    }
    let (a, b) = window.unwrap_or((0.0, fit.estimation_end));
    if !(b > a) || a < 0.0 {
        return Err(Error::Domain(format!("invalid window [{a}, {b}]")));
    }
    let b = b.min(fit.estimation_end);
    let n_in = fit.times.iter().filter(|&&t| t > a && t <= b).count();
    if n_in < 2 || !(b > a) {
        return Err(Error::Domain(format!("window [{a}, {b}] holds fewer than two event times")));
    }
    let g = EFFECT_GRID;
    let grid: Vec<f64> = (0..g).map(|i| a + (b - a) * i as f64 / (g - 1) as f64).collect();
    let gbar = grid.iter().sum::<f64>() / g as f64;
    let sxx: f64 = grid.iter().map(|x| (x - gbar).powi(2)).sum();
    let c: Vec<f64> = grid.iter().map(|x| (x - gbar) / sxx).collect();
    // suffix[j] = Σ_{i ≥ j} c_i
    let mut suffix = vec![0.0; g + 1];
    for i in (0..g).rev() {
        suffix[i] = suffix[i + 1] + c[i];
    }

    // increments binned by the first grid index they affect
    let mut cell_var = vec![0.0; g + 1];
    let mut psi_hat = 0.0;
    let mut var = 0.0;
    for (t, db, dv) in fit.increments(column) {
        let j = grid.partition_point(|&x| x < t);
        psi_hat += suffix[j] * db;
        var += suffix[j].powi(2) * dv;
        cell_var[j] += dv;
    }

    let bvals: Vec<f64> = grid.iter().map(|&x| fit.at(column, x).0).collect();
    let bbar = bvals.iter().sum::<f64>() / g as f64;
    let sup_deviation = grid
        .iter()
        .zip(&bvals)
        .map(|(&x, &bv)| (bv - bbar - psi_hat * (x - gbar)).abs())
        .fold(0.0, f64::max);

    let sigma: Vec<f64> = cell_var.iter().map(|v| v.sqrt()).collect();
    let mut rng = seed.rng();
    let mut exceed = 0usize;
    let mut w = vec![0.0; g + 1];
    for _ in 0..n_resample {
        for j in 1..g {
            let n: f64 = StandardNormal.sample(&mut rng);
            w[j] = n * sigma[j];
        }
        // cells 0 and g do not move the residual inside the window
        let mut mean_term = 0.0;
        let mut slope_term = 0.0;
        for j in 1..g {
            mean_term += w[j] * (g - j) as f64 / g as f64;
            slope_term += w[j] * suffix[j];
        }
        let mut prefix = 0.0;
        let mut sup = 0.0f64;
        for i in 0..g {
            if i >= 1 {
                prefix += w[i];
            }
            sup = sup.max((prefix - mean_term - slope_term * (grid[i] - gbar)).abs());
        }
        if sup >= sup_deviation {
            exceed += 1;
        }
    }
    Ok(ConstantEffect {
        column: fit.names[column].clone(),
        window: (a, b),
        psi_hat,
        se: var.sqrt(),
        sup_deviation,
        p_value: (1 + exceed) as f64 / (1 + n_resample) as f64,
        n_resample,
    })
}
