//! End-to-end acceptance criteria. Runs without the libtest harness so that
//! every criterion prints one `PASS`/`FAIL` line even when an earlier one fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hazardlens::causal::{
    causal_hr_closed, causal_hr_from_coxfit, causal_hr_mc_with, cox_selection_check, gen_coupled, gen_coupled_with,
    gen_two_level, hazard_difference_causal, kendall_tau_pairs, sensitivity_sr, tau_from_theta, theta_from_tau,
    CouplingSpec, SensitivityInput, TimeFunction,
};
use hazardlens::curve::{linspace, Table};
use hazardlens::data::pairs_to_dataset;
use hazardlens::estimate::{cox_fit, CovariateSelector};
use hazardlens::frailty::{conditional_cumhaz, hrz_curve, selection_curve, ConditionalHazardDgp, FrailtySpec, MarginalModel};
use hazardlens::simlab::{run_experiment_with, ExperimentConfig, ExperimentReport};
use hazardlens::{CumHaz, Exec, Result, SeedSpec, StepFunction};

const MASTER: u64 = 20240615;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail }
    }
}

fn bundled(name: &str) -> ExperimentConfig {
    ExperimentConfig::parse(ExperimentConfig::bundled(name).expect("bundled config")).expect("valid config")
}

fn run(name: &str) -> Result<ExperimentReport> {
    run_experiment_with(&bundled(name), Exec::Sequential)
}

fn metric(r: &ExperimentReport, key: &str) -> f64 {
    r.metric(key).unwrap_or(f64::NAN)
}

fn col(t: &Table, name: &str) -> Vec<f64> {
    t.column(name).unwrap_or_else(|| panic!("table {} has no column {name}", t.name))
}

fn within(lo: f64, x: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn seed(k: u64) -> SeedSpec {
    SeedSpec::new(MASTER, k)
}

fn sim31_replication() -> Result<Outcome> {
    let start = Instant::now();
    let r = run("sim31")?;
    let elapsed = start.elapsed();
    let (b1, b2, cens) = (metric(&r, "coxcp.beta1"), metric(&r, "coxcp.beta2"), metric(&r, "censoring_fraction"));
    let ok = within(-0.72, b1, -0.62)
        && within(-0.13, b2, 0.07)
        && (cens - 0.19).abs() <= 0.02
        && elapsed < Duration::from_secs(30);
    Ok(Outcome::new(ok, format!("beta1 {b1:.4}, beta2 {b2:.4}, censored {cens:.3}, {:.2}s", elapsed.as_secs_f64())))
}

fn conditional_hr_bound() -> Result<Outcome> {
    let c = bundled("sim31");
    let tab = hrz_curve(&c.model, &c.frailty, &linspace(0.0, 8.0, 801))?;
    let v = col(&tab, "value");
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(Outcome::new(lo >= 0.31 && hi <= 0.82, format!("range [{lo:.4}, {hi:.4}] on 801 points")))
}

fn selection_ordering() -> Result<Outcome> {
    let c = bundled("sim31");
    let grid: Vec<f64> = (1..=800).map(|i| i as f64 * 0.01).collect();
    let ratio = col(&selection_curve(&c.model, &c.frailty, &grid)?, "ratio");
    let min_ratio = ratio.iter().cloned().fold(f64::INFINITY, f64::min);

    let r = run("fig2")?;
    let tab = r.table("selection").expect("selection table");
    let (t, e0, e1) = (col(tab, "t"), col(tab, "e_z_arm0"), col(tab, "e_z_arm1"));
    let (m0, s0, m1, s1) = (col(tab, "mc_arm0"), col(tab, "se_arm0"), col(tab, "mc_arm1"), col(tab, "se_arm1"));
    let mut max_z: f64 = 0.0;
    let mut order_ok = true;
    for i in 0..t.len() {
        max_z = max_z.max((m0[i] - e0[i]).abs() / s0[i]).max((m1[i] - e1[i]).abs() / s1[i]);
        if t[i] > 0.0 && m1[i] - m0[i] < -3.0 * s0[i].hypot(s1[i]) {
            order_ok = false;
        }
    }
    Ok(Outcome::new(
        min_ratio > 1.0 && max_z < 3.0 && order_ok,
        format!("min analytic ratio {min_ratio:.4}, max MC |z| {max_z:.2}, MC ordering {order_ok}"),
    ))
}

fn kendall_mapping() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (k, theta) in [0.1, 0.5, 2.0].into_iter().enumerate() {
        let spec = CouplingSpec::GammaShared { beta: 0.5f64.ln(), theta };
        let pairs = gen_coupled(&spec, 100_000, seed(40 + k as u64))?;
        worst = worst.max((kendall_tau_pairs(&pairs)? - tau_from_theta(theta)).abs());
    }
    let elapsed = start.elapsed();
    Ok(Outcome::new(
        worst < 0.02 && elapsed < Duration::from_secs(20),
        format!("max |tau_hat - tau| {worst:.4}, {:.2}s", elapsed.as_secs_f64()),
    ))
}

fn causal_hr_oracle() -> Result<Outcome> {
    let start = Instant::now();
    let beta = 0.5f64.ln();
    let mut max_z: f64 = 0.0;
    for (k, theta) in [0.5, 2.0].into_iter().enumerate() {
        let spec = CouplingSpec::GammaShared { beta, theta };
        let pairs = gen_coupled_with(&spec, 500_000, seed(50 + k as u64), Exec::Sequential)?;
        for p in causal_hr_mc_with(&pairs, &[0.0, 0.5, 1.0, 2.0], 0.05, Exec::Sequential)? {
            max_z = max_z.max((p.hr - causal_hr_closed(beta, theta, p.t)).abs() / p.se);
        }
    }
    let elapsed = start.elapsed();
    Ok(Outcome::new(
        max_z < 3.0 && elapsed < Duration::from_secs(60),
        format!("max |z| {max_z:.2} over t = 0, 0.5, 1, 2, {:.2}s", elapsed.as_secs_f64()),
    ))
}

fn causal_hr_curves_shape() -> Result<Outcome> {
    let r = run("fig3")?;
    let tab = r.table("causal_hr").expect("causal_hr table");
    let t = col(tab, "t");
    let taus = [0.0, 0.04, 0.2, 0.49, 0.83, 0.98];
    let curves: Vec<Vec<f64>> = taus.iter().map(|tau| col(tab, &format!("tau_{tau}"))).collect();
    let start_ok = curves.iter().all(|c| (c[0] - 0.5).abs() < 1e-12);
    let ordered = (0..t.len()).all(|i| curves.windows(2).all(|w| w[1][i] <= w[0][i]));
    let flat = curves[0].iter().all(|v| (v - 0.5).abs() < 1e-12);
    let i3 = t.iter().position(|&x| (x - 3.0).abs() < 1e-9).expect("t = 3 on grid");
    let tail = curves[5][i3];
    Ok(Outcome::new(
        start_ok && ordered && flat && tail < 0.05,
        format!("start {start_ok}, ordered {ordered}, tau=0 flat {flat}, tau=0.98 at t=3 {tail:.4}"),
    ))
}

fn marginalization_identities() -> Result<Outcome> {
    let us = [0.0, 0.01, 0.3, 1.0, 2.5, 7.0];
    let frailties = [FrailtySpec::Gamma { theta: 0.5 }, FrailtySpec::Gamma { theta: 2.0 }, FrailtySpec::low_high_risk()];
    let mut laplace: f64 = 0.0;
    for f in &frailties {
        for &u in &us {
            laplace = laplace.max((f.inv_laplace(f.laplace(u))? - u).abs());
        }
    }
    let c = bundled("sim31");
    let mut marg: f64 = 0.0;
    for f in &frailties {
        for i in 0..=80 {
            let t = i as f64 * 0.1;
            for a in [0u8, 1] {
                let star = conditional_cumhaz(&c.model, f, a, t)?;
                marg = marg.max((f.laplace(star) - (-c.model.cumhaz(t, a)).exp()).abs());
            }
        }
    }
    let beta = 0.5f64.ln();
    let mut zs = Vec::new();
    for (k, f) in [FrailtySpec::Gamma { theta: 1.0 }, FrailtySpec::low_high_risk()].into_iter().enumerate() {
        let dgp = ConditionalHazardDgp::new(MarginalModel::cox(beta, 0.4), f);
        let fit = cox_fit(&pairs_to_dataset(&dgp.generate(20_000, seed(70 + k as u64))?), &CovariateSelector::arm_only())?;
        zs.push((fit.beta[0] - beta).abs() / fit.se[0]);
    }
    let two = gen_two_level(beta, CumHaz::Rate(1.0), 20_000, seed(72))?;
    let fit = cox_fit(&pairs_to_dataset(&two), &CovariateSelector::arm_only())?;
    zs.push((fit.beta[0] - beta).abs() / fit.se[0]);
    let ok = laplace < 1e-10 && marg < 1e-10 && zs.iter().all(|z| *z < 3.0);
    Ok(Outcome::new(
        ok,
        format!(
            "laplace {laplace:.1e}, marginal {marg:.1e}, Cox |z| gamma {:.2}, discrete {:.2}, two-level {:.2}",
            zs[0], zs[1], zs[2]
        ),
    ))
}

fn cox_survivor_selection() -> Result<Outcome> {
    let tab = cox_selection_check(0.5f64.ln(), &CumHaz::Rate(1.0), 100_000, seed(80), &[1.0, 2.0, 4.0])?;
    let (emp, se, ana) = (col(&tab, "empirical"), col(&tab, "se"), col(&tab, "analytic"));
    let max_z = (0..emp.len()).map(|i| (emp[i] - ana[i]).abs() / se[i]).fold(0.0, f64::max);
    // rows alternate arm 0, arm 1 per time point
    let below = emp.chunks(2).all(|p| p[1] < p[0]);
    Ok(Outcome::new(max_z < 3.0 && below, format!("max |z| {max_z:.2}, treated below control {below}")))
}

fn additive_hazard_agreement() -> Result<Outcome> {
    let spec = CouplingSpec::AdditiveHazard {
        psi: StepFunction::constant(0.1),
        omega0: StepFunction::constant(1.0),
        frailty: FrailtySpec::low_high_risk(),
    };
    let r = hazard_difference_causal(&spec, &[0.2, 0.5, 1.0], 50_000, seed(90), Default::default())?;
    let (truth, mc, mc_se) = (r.column("psi_true"), r.column("psi_mc"), r.column("psi_mc_se"));
    let (aa, aa_se) = (r.column("psi_aalen"), r.column("psi_aalen_se"));
    let z_mc = (0..3).map(|i| (mc[i] - truth[i]).abs() / mc_se[i]).fold(0.0, f64::max);
    let z_aa = (0..3).map(|i| (aa[i] - truth[i]).abs() / aa_se[i]).fold(0.0, f64::max);

    let f = run("fig4")?;
    let (s1, se1) = (metric(&f, "aalen.slope[0,4]"), metric(&f, "aalen.slope_se[0,4]"));
    let (s2, se2) = (metric(&f, "aalen.slope[4,8]"), metric(&f, "aalen.slope_se[4,8]"));
    let z = 1.959963984540054;
    let negative = s1 + z * se1 < 0.0;
    let covers = s2 - z * se2 <= 0.0 && s2 + z * se2 >= 0.0;
    Ok(Outcome::new(
        z_mc < 3.0 && z_aa < 3.0 && negative && covers,
        format!("stratum |z| {z_mc:.2}, Aalen |z| {z_aa:.2}, slope [0,4] {s1:.4} ({se1:.4}), [4,8] {s2:.4} ({se2:.4})"),
    ))
}

fn sensitivity_identities() -> Result<Outcome> {
    let grid = [0.0, 1.0, 2.0];
    let input = |sr: f64| SensitivityInput {
        obs_hr: TimeFunction::constant(0.8),
        surv0: TimeFunction::constant(0.81),
        surv1: TimeFunction::constant(0.9),
        sr: TimeFunction::constant(sr),
    };
    let one = sensitivity_sr(&input(1.0), &grid)?.table;
    let identity = col(&one, "causal_hr") == col(&one, "obs_hr");
    let worked = col(&sensitivity_sr(&input(1.5), &grid)?.table, "causal_hr");
    let werr = worked.iter().map(|v| (v - 0.8 / (0.9 + 1.5 * 0.1)).abs()).fold(0.0, f64::max);

    let r = run("fig6-shape")?;
    let hr = metric(&r, "cox.beta").exp();
    let tab = r.table("gamma_coupling").expect("gamma_coupling table");
    let curves: Vec<Vec<f64>> = ["tau_0.1", "tau_0.2", "tau_0.3"].iter().map(|c| col(tab, c)).collect();
    let bounded = curves.iter().flatten().all(|v| *v <= hr);
    let decreasing = (0..curves[0].len()).all(|i| curves[1][i] < curves[0][i] && curves[2][i] < curves[1][i]);
    Ok(Outcome::new(
        identity && werr < 1e-12 && hr < 1.0 && bounded && decreasing,
        format!("identity {identity}, worked error {werr:.1e}, exp(beta_hat) {hr:.4}, bounded {bounded}, decreasing {decreasing}"),
    ))
}

fn shared_additive_contrast() -> Result<Outcome> {
    let beta = 0.5f64.ln();
    let pairs = gen_coupled(&CouplingSpec::SharedAdditive { alpha: 0.5, beta }, 400_000, seed(110))?;
    let (m0, se0) = mean_se(pairs.iter().map(|p| p.t0));
    let (m1, se1) = mean_se(pairs.iter().map(|p| p.t1 * beta.exp()));
    let moments = (m0 - 1.0).abs() < 3.0 * se0 && (m1 - 1.0).abs() < 3.0 * se1;

    let theta = theta_from_tau(kendall_tau_pairs(&pairs)?)?;
    let fit = cox_fit(&pairs_to_dataset(&pairs), &CovariateSelector::arm_only())?;
    let grid = [0.1, 0.25, 0.5, 1.0, 1.5, 2.0];
    let gamma = col(&causal_hr_from_coxfit(&fit, theta, &grid)?, "value");
    let mc = causal_hr_mc_with(&pairs, &grid, 0.05, Exec::default())?;
    let max_z = mc.iter().zip(&gamma).map(|(p, g)| (p.hr - g).abs() / p.se).fold(0.0, f64::max);
    Ok(Outcome::new(
        moments && max_z > 3.0,
        format!("mean T0 {m0:.4} ({se0:.4}), mean T1 e^beta {m1:.4} ({se1:.4}), max |MC - gamma route| / se {max_z:.2}"),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 11] = [
        ("sim31 change-point Cox replication", sim31_replication),
        ("conditional hazard ratio bound", conditional_hr_bound),
        ("frailty selection ordering", selection_ordering),
        ("Kendall tau mapping", kendall_mapping),
        ("causal hazard ratio oracle", causal_hr_oracle),
        ("gamma-coupling curve shape", causal_hr_curves_shape),
        ("marginalization identities", marginalization_identities),
        ("Cox survivor selection", cox_survivor_selection),
        ("additive hazard agreement", additive_hazard_agreement),
        ("sensitivity identities", sensitivity_identities),
        ("shared-additive contrast", shared_additive_contrast),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = std::panic::catch_unwind(check)
            .unwrap_or_else(|_| Ok(Outcome::new(false, "panicked".into())))
            .unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{status} {:>2} {name}: {}", i + 1, outcome.detail);
        failed += usize::from(!outcome.passed);
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
