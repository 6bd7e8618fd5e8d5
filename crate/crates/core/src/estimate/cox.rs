//! Cox partial likelihood (Breslow ties) over counting-process episodes.
//!
//! A subject contributes one or more `(start, stop]` episodes; plain Cox uses
//! `(0, time]`, the change-point model splits each subject at `ν`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::step::{CumHaz, StepFunction};

/// Relative log-likelihood change below which Newton stops.
pub const LOGLIK_TOL: f64 = 1e-9;
/// Score max-norm required at convergence.
pub const SCORE_TOL: f64 = 1e-6;
pub const MAX_ITER: usize = 50;
/// |β| beyond this is treated as a diverging (monotone) likelihood.
const DIVERGENCE_BOUND: f64 = 30.0;
const MONOTONE_BETA: f64 = 10.0;

/// Which columns enter the linear predictor: the arm indicator and/or covariate columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSelector {
    pub arm: bool,
    pub columns: Vec<usize>,
}

impl CovariateSelector {
    pub fn arm_only() -> Self {
        Self { arm: true, columns: Vec::new() }
    }

    pub fn arm_and(columns: Vec<usize>) -> Self {
        Self { arm: true, columns }
    }

    pub fn columns(columns: Vec<usize>) -> Self {
        Self { arm: false, columns }
    }

    pub fn dim(&self) -> usize {
        self.arm as usize + self.columns.len()
    }

    pub(crate) fn names(&self, data: &Dataset) -> Result<Vec<String>> {
        let mut names = Vec::with_capacity(self.dim());
        if self.arm {
            names.push("arm".to_string());
        }
        for &c in &self.columns {
            let name = data
                .covariate_names
                .get(c)
                .ok_or_else(|| Error::Domain(format!("covariate column {c} out of range")))?;
            names.push(name.clone());
        }
        if names.is_empty() {
            return Err(Error::Domain("no covariates selected".into()));
        }
        Ok(names)
    }

    pub(crate) fn row(&self, s: &crate::data::SurvivalSample) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        if self.arm {
            x.push(s.arm as f64);
        }
        x.extend(self.columns.iter().map(|&c| s.covariates[c]));
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Episode {
    pub start: f64,
    pub stop: f64,
    pub event: bool,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    /// Breslow estimate of the baseline cumulative hazard (covariates at 0).
    pub baseline_cumhaz: StepFunction,
    pub loglik: f64,
    pub loglik_null: f64,
    pub n_iter: usize,
    pub score_max_norm: f64,
    pub n: usize,
    pub n_events: usize,
}

impl CoxFit {
    pub fn baseline(&self) -> CumHaz {
        CumHaz::Step(self.baseline_cumhaz.clone())
    }

    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        self.names.iter().position(|n| n == name).map(|i| (self.beta[i], self.se[i]))
    }

    /// Last time covered by the Breslow estimate.
    pub fn support_end(&self) -> f64 {
        self.baseline_cumhaz.domain_end().unwrap_or(f64::INFINITY)
    }
}

struct Derivs {
    loglik: f64,
    score: DVector<f64>,
    info: DMatrix<f64>,
}

/// Episodes pre-sorted for the risk-set sweep.
pub(crate) struct Engine {
    episodes: Vec<Episode>,
    p: usize,
    center: Vec<f64>,
    by_stop: Vec<usize>,
    by_start: Vec<usize>,
    /// Distinct event times, descending, each with its event episode indices.
    event_groups: Vec<(f64, Vec<usize>)>,
}

impl Engine {
    pub fn new(episodes: Vec<Episode>, p: usize) -> Self {
        let n = episodes.len().max(1) as f64;
        let mut center = vec![0.0; p];
        for e in &episodes {
            for (c, x) in center.iter_mut().zip(&e.x) {
                *c += x;
            }
        }
        center.iter_mut().for_each(|c| *c /= n);

        let mut by_stop: Vec<usize> = (0..episodes.len()).collect();
        by_stop.sort_by(|&a, &b| episodes[b].stop.total_cmp(&episodes[a].stop));
        let mut by_start: Vec<usize> = (0..episodes.len()).collect();
        by_start.sort_by(|&a, &b| episodes[b].start.total_cmp(&episodes[a].start));

        let mut event_groups: Vec<(f64, Vec<usize>)> = Vec::new();
        for &i in &by_stop {
            if !episodes[i].event {
                continue;
            }
            match event_groups.last_mut() {
                Some((t, idx)) if *t == episodes[i].stop => idx.push(i),
                _ => event_groups.push((episodes[i].stop, vec![i])),
            }
        }
        Self { episodes, p, center, by_stop, by_start, event_groups }
    }

    pub fn n_events(&self) -> usize {
        self.event_groups.iter().map(|g| g.1.len()).sum()
    }

    fn eta(&self, i: usize, beta: &[f64]) -> f64 {
        self.episodes[i].x.iter().zip(&self.center).zip(beta).map(|((x, c), b)| (x - c) * b).sum()
    }

    /// Runs the descending sweep, calling `visit(t, d, S0, S1, S2, Σx_events)` per event time.
    fn sweep(&self, beta: &[f64], mut visit: impl FnMut(f64, f64, f64, &[f64], &DMatrix<f64>, &[f64])) {
        let p = self.p;
        let w: Vec<f64> = (0..self.episodes.len()).map(|i| self.eta(i, beta).exp()).collect();
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut s2 = DMatrix::<f64>::zeros(p, p);
        let (mut ia, mut ir) = (0, 0);
        let mut xe = vec![0.0; p];
        let update = |i: usize, sign: f64, s0: &mut f64, s1: &mut [f64], s2: &mut DMatrix<f64>| {
            let wi = sign * w[i];
            let xc: Vec<f64> = self.episodes[i].x.iter().zip(&self.center).map(|(x, c)| x - c).collect();
            *s0 += wi;
            for a in 0..p {
                s1[a] += wi * xc[a];
                for b in 0..=a {
                    s2[(a, b)] += wi * xc[a] * xc[b];
                }
            }
        };
        for (t, events) in &self.event_groups {
            while ia < self.by_stop.len() && self.episodes[self.by_stop[ia]].stop >= *t {
                update(self.by_stop[ia], 1.0, &mut s0, &mut s1, &mut s2);
                ia += 1;
            }
            while ir < self.by_start.len() && self.episodes[self.by_start[ir]].start >= *t {
                update(self.by_start[ir], -1.0, &mut s0, &mut s1, &mut s2);
                ir += 1;
            }
            xe.iter_mut().for_each(|v| *v = 0.0);
            for &i in events {
                for (a, v) in xe.iter_mut().enumerate() {
                    *v += self.episodes[i].x[a] - self.center[a];
                }
            }
            let mut full = s2.clone();
            for a in 0..p {
                for b in 0..a {
                    full[(b, a)] = full[(a, b)];
                }
            }
            visit(*t, events.len() as f64, s0, &s1, &full, &xe);
        }
    }

    fn derivs(&self, beta: &[f64]) -> Derivs {
        let p = self.p;
        let mut loglik = 0.0;
        let mut score = DVector::<f64>::zeros(p);
        let mut info = DMatrix::<f64>::zeros(p, p);
        self.sweep(beta, |_, d, s0, s1, s2, xe| {
            let lin: f64 = xe.iter().zip(beta).map(|(x, b)| x * b).sum();
            loglik += lin - d * s0.ln();
            for a in 0..p {
                let ma = s1[a] / s0;
                score[a] += xe[a] - d * ma;
                for b in 0..p {
                    info[(a, b)] += d * (s2[(a, b)] / s0 - ma * s1[b] / s0);
                }
            }
        });
        Derivs { loglik, score, info }
    }

    /// Diagonal of the information at β = 0; zero means no risk-set variation.
    pub fn null_information_diag(&self) -> Vec<f64> {
        let d = self.derivs(&vec![0.0; self.p]);
        (0..self.p).map(|a| d.info[(a, a)]).collect()
    }

    /// Breslow increments at the event times (ascending) for covariates at 0.
    fn breslow(&self, beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let shift: f64 = self.center.iter().zip(beta).map(|(c, b)| c * b).sum::<f64>();
        let mut times = Vec::new();
        let mut inc = Vec::new();
        self.sweep(beta, |t, d, s0, _, _, _| {
            times.push(t);
            inc.push(d / s0 * (-shift).exp());
        });
        times.reverse();
        inc.reverse();
        (times, inc)
    }

    pub fn fit(&self, names: Vec<String>, n_subjects: usize, last_time: f64) -> Result<CoxFit> {
        let p = self.p;
        if self.event_groups.is_empty() {
            return Err(Error::EmptySelection("no events".into()));
        }
        let mut beta = vec![0.0; p];
        let mut cur = self.derivs(&beta);
        let loglik_null = cur.loglik;
        let info_null: Vec<f64> = (0..p).map(|a| cur.info[(a, a)]).collect();
        let mut n_iter = 0;
        loop {
            let chol = cur.info.clone().cholesky().ok_or_else(|| {
                Error::Separation(format!(
                    "information matrix not positive definite at iteration {n_iter} (beta {beta:?})"
                ))
            })?;
            let step = chol.solve(&cur.score);
            n_iter += 1;
            let mut scale = 1.0;
            let (next_beta, next) = loop {
                let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
                let d = self.derivs(&cand);
                if d.loglik.is_finite() && d.loglik >= cur.loglik - 1e-12 * cur.loglik.abs() {
                    break (cand, d);
                }
                scale *= 0.5;
                if scale < 1e-10 {
                    return Err(Error::NonConvergence { iterations: n_iter, last_beta: beta });
                }
            };
            if next_beta.iter().any(|b| b.abs() > DIVERGENCE_BOUND) {
                return Err(Error::Separation(format!(
                    "coefficients diverging (beta {next_beta:?}); likelihood is monotone"
                )));
            }
            let rel = (next.loglik - cur.loglik).abs() / cur.loglik.abs().max(1e-300);
            let score_norm = next.score.amax();
            beta = next_beta;
            cur = next;
            if rel < LOGLIK_TOL && score_norm < SCORE_TOL {
                break;
            }
            if n_iter >= MAX_ITER {
                return Err(Error::NonConvergence { iterations: n_iter, last_beta: beta });
            }
        }
        let cov = cur
            .info
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Separation("information matrix singular at the estimate".into()))?;
        // likelihood that flattened out far from the origin: the estimate is at infinity
        for a in 0..p {
            if beta[a].abs() > MONOTONE_BETA && cur.info[(a, a)] < 1e-6 * info_null[a] {
                return Err(Error::Separation(format!(
                    "likelihood is monotone in `{}` (beta {:.3}, information collapsed)",
                    names[a], beta[a]
                )));
            }
        }
        let se: Vec<f64> = (0..p).map(|a| cov[(a, a)].sqrt()).collect();
        if se.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Separation(format!("non-positive variance at the estimate (se {se:?})")));
        }
        let (times, inc) = self.breslow(&beta);
        let mut acc = 0.0;
        let levels: Vec<f64> = inc
            .iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect();
        let baseline_cumhaz = StepFunction::from_levels(times, 0.0, &levels)?.with_domain_end(last_time);
        Ok(CoxFit {
            names,
            beta,
            se,
            baseline_cumhaz,
            loglik: cur.loglik,
            loglik_null,
            n_iter,
            score_max_norm: cur.score.amax(),
            n: n_subjects,
            n_events: self.n_events(),
        })
    }
}

fn last_time(data: &Dataset) -> f64 {
    data.samples.iter().map(|s| s.time).fold(0.0, f64::max)
}

/// Cox proportional hazards fit by Newton–Raphson from β = 0 with step halving.
pub fn cox_fit(data: &Dataset, selector: &CovariateSelector) -> Result<CoxFit> {
    let names = selector.names(data)?;
    let episodes = data
        .samples
        .iter()
        .map(|s| Episode { start: 0.0, stop: s.time, event: s.is_event(), x: selector.row(s) })
        .collect();
    Engine::new(episodes, selector.dim()).fit(names, data.len(), last_time(data))
}

/// Cox model with hazard ratio `e^{β₁}` up to `ν` and `e^{β₂}` after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointCoxFit {
    pub beta1: f64,
    pub beta2: f64,
    pub se1: f64,
    pub se2: f64,
    pub nu: f64,
    pub identified: [bool; 2],
    pub baseline_cumhaz: StepFunction,
    pub loglik: f64,
    pub n_iter: usize,
    pub n: usize,
    pub n_events: usize,
}

impl ChangePointCoxFit {
    /// `(β, se)` for period 1 (`t ≤ ν`) or 2 (`t > ν`).
    pub fn coefficient(&self, period: usize) -> Result<(f64, f64)> {
        let (b, s, ok) = match period {
            1 => (self.beta1, self.se1, self.identified[0]),
            2 => (self.beta2, self.se2, self.identified[1]),
            _ => return Err(Error::Domain(format!("period must be 1 or 2, got {period}"))),
        };
        if ok {
            Ok((b, s))
        } else {
            Err(Error::NotIdentified(format!("beta{period}")))
        }
    }

    /// Marginal hazard ratio at `t`.
    pub fn hazard_ratio(&self, t: f64) -> f64 {
        if t <= self.nu {
            self.beta1.exp()
        } else {
            self.beta2.exp()
        }
    }
}

/// Fits the change-point model by splitting each subject's follow-up at `nu`.
///
/// A coefficient whose period has no events with both arms at risk is
/// flagged as non-identified (value NaN) and left out of the fit.
pub fn cox_changepoint_fit(data: &Dataset, nu: f64) -> Result<ChangePointCoxFit> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::Domain(format!("change point must be positive and finite, got {nu}")));
    }
    let mut episodes = Vec::with_capacity(data.len() * 2);
    for s in &data.samples {
        let a = s.arm as f64;
        if s.time <= nu {
            episodes.push(Episode { start: 0.0, stop: s.time, event: s.is_event(), x: vec![a, 0.0] });
        } else {
            episodes.push(Episode { start: 0.0, stop: nu, event: false, x: vec![a, 0.0] });
            episodes.push(Episode { start: nu, stop: s.time, event: s.is_event(), x: vec![0.0, a] });
        }
    }
    let probe = Engine::new(episodes.clone(), 2);
    if probe.n_events() == 0 {
        return Err(Error::EmptySelection("no events".into()));
    }
    let diag = probe.null_information_diag();
    let identified = [diag[0] > 1e-12, diag[1] > 1e-12];
    let keep: Vec<usize> = (0..2).filter(|&j| identified[j]).collect();
    if keep.is_empty() {
        return Err(Error::NotIdentified("beta1 and beta2".into()));
    }
    let reduced: Vec<Episode> = episodes
        .into_iter()
        .map(|e| Episode { x: keep.iter().map(|&j| e.x[j]).collect(), ..e })
        .collect();
    let names = keep.iter().map(|j| format!("beta{}", j + 1)).collect();
    let fit = Engine::new(reduced, keep.len()).fit(names, data.len(), last_time(data))?;
    let mut beta = [f64::NAN; 2];
    let mut se = [f64::NAN; 2];
    for (k, &j) in keep.iter().enumerate() {
        beta[j] = fit.beta[k];
        se[j] = fit.se[k];
    }
    Ok(ChangePointCoxFit {
        beta1: beta[0],
        beta2: beta[1],
        se1: se[0],
        se2: se[1],
        nu,
        identified,
        baseline_cumhaz: fit.baseline_cumhaz,
        loglik: fit.loglik,
        n_iter: fit.n_iter,
        n: fit.n,
        n_events: fit.n_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SurvivalSample;
    use crate::estimate::km::nelson_aalen;
    use approx::assert_abs_diff_eq;

    fn small() -> Dataset {
        let rows = [
            (1.0, 1, 0, 0.5),
            (2.0, 1, 1, -0.2),
            (2.5, 0, 0, 1.1),
            (3.0, 1, 1, 0.3),
            (3.5, 1, 0, -0.7),
            (4.0, 0, 1, 0.9),
            (4.5, 1, 0, 0.0),
            (5.0, 1, 1, 1.4),
            (6.0, 1, 1, -1.0),
            (7.0, 1, 0, 0.2),
        ];
        Dataset::new(
            rows.iter()
                .enumerate()
                .map(|(i, &(t, s, a, x))| SurvivalSample::new(i.to_string(), t, s, a).with_covariates(vec![x]))
                .collect(),
        )
        .unwrap()
    }

    /// Breslow partial log-likelihood by brute force over risk sets.
    fn brute_loglik(data: &Dataset, beta: &[f64]) -> f64 {
        let sel = CovariateSelector::arm_and(vec![0]);
        let eta = |s: &SurvivalSample| sel.row(s).iter().zip(beta).map(|(x, b)| x * b).sum::<f64>();
        let mut ll = 0.0;
        for s in data.samples.iter().filter(|s| s.is_event()) {
            let denom: f64 = data.samples.iter().filter(|r| r.time >= s.time).map(|r| eta(r).exp()).sum();
            ll += eta(s) - denom.ln();
        }
        ll
    }

    #[test]
    fn newton_maximizes_brute_force_likelihood() {
        let data = small();
        let fit = cox_fit(&data, &CovariateSelector::arm_and(vec![0])).unwrap();
        assert_abs_diff_eq!(fit.loglik, brute_loglik(&data, &fit.beta), epsilon = 1e-9);
        // every coordinate perturbation lowers the likelihood
        for j in 0..2 {
            for h in [-1e-3, 1e-3] {
                let mut b = fit.beta.clone();
                b[j] += h;
                assert!(brute_loglik(&data, &b) < fit.loglik);
            }
        }
        // finite-difference information matches 1/se^2 structure
        let h = 1e-4;
        let mut hess = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let f = |da: f64, db: f64| {
                    let mut v = fit.beta.clone();
                    v[a] += da;
                    v[b] += db;
                    brute_loglik(&data, &v)
                };
                hess[a][b] = -(f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
            }
        }
        let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
        assert_abs_diff_eq!(fit.se[0], (hess[1][1] / det).sqrt(), epsilon = 1e-4);
        assert_abs_diff_eq!(fit.se[1], (hess[0][0] / det).sqrt(), epsilon = 1e-4);
        assert!(fit.score_max_norm < SCORE_TOL);
    }

    #[test]
    fn breslow_at_zero_is_nelson_aalen() {
        let data = small();
        let engine = Engine::new(
            data.samples
                .iter()
                .map(|s| Episode { start: 0.0, stop: s.time, event: s.is_event(), x: vec![s.arm as f64] })
                .collect(),
            1,
        );
        let (times, inc) = engine.breslow(&[0.0]);
        let na = nelson_aalen(&data, None).unwrap();
        assert_eq!(times, na.table.times);
        let mut acc = 0.0;
        for (k, d) in inc.iter().enumerate() {
            acc += d;
            assert_eq!(acc, na.cumhaz[k]);
        }
    }

    #[test]
    fn degenerate_two_subjects_same_arm() {
        let data = Dataset::new(vec![SurvivalSample::new("1", 1.0, 1, 1), SurvivalSample::new("2", 2.0, 0, 1)]).unwrap();
        assert!(matches!(cox_fit(&data, &CovariateSelector::arm_only()), Err(Error::Separation(_))));
    }

    #[test]
    fn complete_separation_diverges() {
        // every treated subject outlives every control subject
        let mut samples = Vec::new();
        for i in 0..6 {
            samples.push(SurvivalSample::new(format!("c{i}"), 1.0 + i as f64, 1, 0));
            samples.push(SurvivalSample::new(format!("t{i}"), 10.0 + i as f64, 0, 1));
        }
        let data = Dataset::new(samples).unwrap();
        assert!(matches!(cox_fit(&data, &CovariateSelector::arm_only()), Err(Error::Separation(_))));
    }

    #[test]
    fn changepoint_beyond_follow_up_equals_plain_cox() {
        let data = small();
        let plain = cox_fit(&data, &CovariateSelector::arm_only()).unwrap();
        let cp = cox_changepoint_fit(&data, 100.0).unwrap();
        assert_eq!(cp.identified, [true, false]);
        assert_eq!(cp.beta1, plain.beta[0]);
        assert_eq!(cp.se1, plain.se[0]);
        assert!(matches!(cp.coefficient(2), Err(Error::NotIdentified(_))));
        assert!(cox_changepoint_fit(&data, 0.0).is_err());
    }

    #[test]
    fn changepoint_brute_force() {
        // time-dependent covariate likelihood by brute force
        let data = small();
        let nu = 3.2;
        let cp = cox_changepoint_fit(&data, nu).unwrap();
        let ll = |b1: f64, b2: f64| {
            let x = |s: &SurvivalSample, t: f64| if t <= nu { b1 * s.arm as f64 } else { b2 * s.arm as f64 };
            let mut ll = 0.0;
            for s in data.samples.iter().filter(|s| s.is_event()) {
                let denom: f64 = data.samples.iter().filter(|r| r.time >= s.time).map(|r| x(r, s.time).exp()).sum();
                ll += x(s, s.time) - denom.ln();
            }
            ll
        };
        assert_abs_diff_eq!(cp.loglik, ll(cp.beta1, cp.beta2), epsilon = 1e-9);
        for (d1, d2) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3)] {
            assert!(ll(cp.beta1 + d1, cp.beta2 + d2) < cp.loglik);
        }
    }
}
