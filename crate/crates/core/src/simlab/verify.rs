//! Oracle cross-check suite: closed forms against their numerical routes
//! and Monte Carlo estimates against the quantities they target.
//!
//! Every check reduces to one number compared with `value < tolerance`, so a
//! tolerance of zero fails every check.

use serde::{Deserialize, Serialize};

use crate::causal::coupling::{gen_coupled, CouplingSpec};
use crate::causal::hazard_diff::hazard_difference_causal;
use crate::causal::hr::{causal_hr_closed, causal_hr_mc};
use crate::causal::kendall::{kendall_tau_pairs, tau_from_theta};
use crate::causal::selection::cox_selection_check;
use crate::causal::sensitivity::{sensitivity_sr, SensitivityInput, TimeFunction};
use crate::data::{Dataset, SurvivalSample};
use crate::error::{Error, Result};
use crate::estimate::kaplan_meier;
use crate::frailty::{conditional_cumhaz, hrz_gamma_closed, hrz_via_g, FrailtySpec, MarginalModel};
use crate::seed::SeedSpec;
use crate::step::{CumHaz, StepFunction};

pub const GROUPS: &[&str] =
    &["laplace", "marginalization", "hrz", "causal_hr", "kendall", "selection", "hazard_difference", "sensitivity", "km"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Groups to run; all when `None`.
    pub only: Option<Vec<String>>,
    /// Multiplies every tolerance.
    pub tol_scale: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { only: None, tol_scale: 1.0, seed: 20240601 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub group: String,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

struct Checks {
    out: Vec<CheckResult>,
    scale: f64,
}

impl Checks {
    fn add(&mut self, group: &str, name: &str, value: f64, tolerance: f64, detail: String) {
        let tolerance = tolerance * self.scale;
        self.out.push(CheckResult {
            group: group.into(),
            name: name.into(),
            value,
            tolerance,
            passed: value < tolerance,
            detail,
        });
    }
}

fn sim31() -> (MarginalModel, FrailtySpec) {
    let m = MarginalModel::new(-(2f64.ln()), 0.0, 4.0, CumHaz::Rate(0.4)).expect("valid model");
    (m, FrailtySpec::low_high_risk())
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

pub fn verify(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    if let Some(only) = &opts.only {
        if let Some(g) = only.iter().find(|g| !GROUPS.contains(&g.as_str())) {
            return Err(Error::Domain(format!("unknown check group `{g}` (known: {})", GROUPS.join(", "))));
        }
    }
    if !(opts.tol_scale >= 0.0) {
        return Err(Error::Domain(format!("tolerance scale must be >= 0, got {}", opts.tol_scale)));
    }
    let run = |g: &str| opts.only.as_ref().is_none_or(|o| o.iter().any(|x| x == g));
    let seed = SeedSpec::new(opts.seed, 0);
    let mut c = Checks { out: Vec::new(), scale: opts.tol_scale };
    let us = [0.0, 0.01, 0.3, 1.0, 2.5, 7.0];

    if run("laplace") {
        for (name, f) in [
            ("gamma theta=0.5", FrailtySpec::Gamma { theta: 0.5 }),
            ("gamma theta=2", FrailtySpec::Gamma { theta: 2.0 }),
            ("discrete sim31", FrailtySpec::low_high_risk()),
        ] {
            let err = max_of(us.iter().map(|&u| (f.inv_laplace(f.laplace(u)).unwrap_or(f64::NAN) - u).abs()));
            c.add("laplace", &format!("round_trip {name}"), err, 1e-10, "max |phi^-1(phi(u)) - u|".into());
        }
    }

    if run("marginalization") {
        let (m, f) = sim31();
        let err = max_of((0..=80).flat_map(|i| {
            let t = i as f64 * 0.1;
            let m = &m;
            let f = &f;
            [0u8, 1].map(move |a| {
                let star = conditional_cumhaz(m, f, a, t).unwrap_or(f64::NAN);
                (f.laplace(star) - (-m.cumhaz(t, a)).exp()).abs()
            })
        }));
        c.add("marginalization", "sim31 E[exp(-Z L*)]", err, 1e-10, "max over t in [0,8], both arms".into());
    }

    if run("hrz") {
        let m = MarginalModel::new(-(2f64.ln()), 0.3, 2.0, CumHaz::Rate(0.5)).expect("valid model");
        for theta in [0.5, 2.0] {
            let f = FrailtySpec::Gamma { theta };
            let err = max_of((0..=40).map(|i| {
                let t = i as f64 * 0.1;
                let a = hrz_gamma_closed(&m, theta, t);
                ((hrz_via_g(&m, &f, t).unwrap_or(f64::NAN) - a) / a).abs()
            }));
            c.add("hrz", &format!("closed_vs_g theta={theta}"), err, 1e-8, "max relative difference".into());
        }
    }

    if run("causal_hr") {
        let beta = 0.5f64.ln();
        for (k, theta) in [0.5, 2.0].into_iter().enumerate() {
            let pairs = gen_coupled(&CouplingSpec::GammaShared { beta, theta }, 200_000, seed.derive(10 + k as u64))?;
            let pts = causal_hr_mc(&pairs, &[0.0, 0.5, 1.0], 0.05)?;
            let z = max_of(pts.iter().map(|p| (p.hr - causal_hr_closed(beta, theta, p.t)).abs() / p.se));
            c.add("causal_hr", &format!("mc_vs_closed theta={theta}"), z, 3.0, "max |z| at t = 0, 0.5, 1; n = 200000".into());
        }
    }

    if run("kendall") {
        for (k, theta) in [0.5, 2.0].into_iter().enumerate() {
            let pairs = gen_coupled(&CouplingSpec::GammaShared { beta: 0.0, theta }, 20_000, seed.derive(20 + k as u64))?;
            let err = (kendall_tau_pairs(&pairs)? - tau_from_theta(theta)).abs();
            c.add("kendall", &format!("tau theta={theta}"), err, 0.02, "|tau_hat - theta/(theta+2)|, n = 20000".into());
        }
    }

    if run("selection") {
        let tab = cox_selection_check(0.5f64.ln(), &CumHaz::Rate(0.4), 50_000, seed.derive(30), &[1.0, 2.0, 4.0])?;
        let z = max_of(tab.rows.iter().map(|r| (r[2] - r[4]).abs() / r[3]));
        c.add("selection", "survivor_mean_v", z, 3.0, "max |z| of E(V | T > t, A = a), n = 50000".into());
        let (m, f) = sim31();
        let ratio = max_of((1..=80).map(|i| {
            let t = i as f64 * 0.1;
            let e0 = f.posterior_mean(conditional_cumhaz(&m, &f, 0, t).unwrap_or(f64::NAN));
            let e1 = f.posterior_mean(conditional_cumhaz(&m, &f, 1, t).unwrap_or(f64::NAN));
            e0 / e1
        }));
        c.add("selection", "sim31 ordering", ratio, 1.0, "max of E(Z|T>t,A=0) / E(Z|T>t,A=1) on (0,8]".into());
    }

    if run("hazard_difference") {
        let spec = CouplingSpec::AdditiveHazard {
            psi: StepFunction::constant(0.1),
            omega0: StepFunction::constant(1.0),
            frailty: FrailtySpec::discrete(vec![(0.5, 0.5), (1.5, 0.5)])?,
        };
        let grid = [0.2, 0.5, 1.0];
        let r = hazard_difference_causal(&spec, &grid, 50_000, seed.derive(40), Default::default())?;
        let (truth, mc, mc_se) = (r.column("psi_true"), r.column("psi_mc"), r.column("psi_mc_se"));
        let (aa, aa_se) = (r.column("psi_aalen"), r.column("psi_aalen_se"));
        let z_mc = max_of((0..grid.len()).map(|i| (mc[i] - truth[i]).abs() / mc_se[i]));
        let z_aa = max_of((0..grid.len()).map(|i| (aa[i] - truth[i]).abs() / aa_se[i]));
        c.add("hazard_difference", "stratum_mc", z_mc, 3.0, "max |z| at t = 0.2, 0.5, 1; n = 50000".into());
        c.add("hazard_difference", "aalen_slope", z_aa, 3.0, "max |z| at t = 0.2, 0.5, 1; n = 50000".into());
    }

    if run("sensitivity") {
        let grid = [0.0, 1.0, 2.0];
        let input = |sr: f64| SensitivityInput {
            obs_hr: TimeFunction::constant(0.8),
            surv0: TimeFunction::constant(0.81),
            surv1: TimeFunction::constant(0.9),
            sr: TimeFunction::constant(sr),
        };
        let worked = sensitivity_sr(&input(1.5), &grid)?.table.column("causal_hr").expect("column");
        let err = max_of(worked.iter().map(|v| (v - 0.8 / (0.9 + 1.5 * 0.1)).abs()));
        c.add("sensitivity", "worked_value", err, 1e-12, "0.8 / (0.9 + 1.5 * 0.1)".into());
        let ident = sensitivity_sr(&input(1.0), &grid)?.table.column("causal_hr").expect("column");
        let err = max_of(ident.iter().map(|v| (v - 0.8).abs()));
        c.add("sensitivity", "sr_one_identity", err, 1e-12, "SR = 1 returns obs_hr".into());
    }

    if run("km") {
        let d = Dataset::new(vec![
            SurvivalSample::new("1", 1.0, 1, 0),
            SurvivalSample::new("2", 2.0, 0, 0),
            SurvivalSample::new("3", 3.0, 1, 0),
        ])?;
        let curve = kaplan_meier(&d, None)?.curve();
        let expect = [(0.5, 1.0), (1.0, 2.0 / 3.0), (2.5, 2.0 / 3.0), (3.0, 0.0)];
        let err = max_of(expect.iter().map(|&(t, s)| (curve.eval(t).unwrap_or(f64::NAN) - s).abs()));
        c.add("km", "product_limit_hand", err, 1e-12, "three subjects, one censored".into());
    }

    Ok(c.out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cheap() -> Vec<String> {
        ["laplace", "marginalization", "hrz", "sensitivity", "km"].map(String::from).to_vec()
    }

    #[test]
    fn analytic_groups_pass() {
        let r = verify(&VerifyOptions { only: Some(cheap()), ..Default::default() }).unwrap();
        assert!(r.len() >= 7);
        for c in &r {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn zero_tolerance_fails_everything() {
        let r = verify(&VerifyOptions { only: Some(cheap()), tol_scale: 0.0, ..Default::default() }).unwrap();
        assert!(r.iter().all(|c| !c.passed));
    }

    #[test]
    fn filtering_and_unknown_groups() {
        let r = verify(&VerifyOptions { only: Some(vec!["km".into()]), ..Default::default() }).unwrap();
        assert!(r.iter().all(|c| c.group == "km"));
        assert!(verify(&VerifyOptions { only: Some(vec!["nope".into()]), ..Default::default() }).is_err());
    }
}
