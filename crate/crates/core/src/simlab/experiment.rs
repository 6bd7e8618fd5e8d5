//! Replicated experiments: generate, censor, estimate, aggregate.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::causal::coupling::{gen_coupled_with, CouplingSpec};
use crate::causal::hazard_diff::{hazard_difference_causal_with, HazardDiffOptions};
use crate::causal::hr::{causal_hr_closed, causal_hr_gamma, causal_hr_mc_with, gamma_coupling_curves};
use crate::causal::kendall::{kendall_tau_pairs, tau_from_theta, theta_from_tau};
use crate::causal::selection::frailty_survivor_mean;
use crate::curve::Table;
use crate::data::{Dataset, PotentialOutcomePair};
use crate::error::{Error, Result};
use crate::estimate::{
    aalen_fit, constant_effect, cox_changepoint_fit, cox_fit, kaplan_meier, rmst, rmtl_ratio, rr_curve_with, CoxFit,
    CovariateSelector,
};
use crate::exec::Exec;
use crate::frailty::{hrz_curve, selection_curve, ConditionalHazardDgp};
use crate::seed::{tags, SeedSpec};
use crate::simlab::censoring::apply_censoring;
use crate::simlab::config::{Dgp, Estimator, ExperimentConfig};
use crate::simlab::figures::{calibrate_constant_rate, fig9_curve};
use crate::simlab::svg::render_svg;
use crate::step::CumHaz;

const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub metrics: BTreeMap<String, f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub truth: Option<f64>,
    /// Share of replicates whose 95% interval covers `truth`.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: BTreeMap<String, String>,
    pub master_seed: u64,
    pub replicates: Vec<ReplicateResult>,
    pub aggregates: BTreeMap<String, Aggregate>,
    pub warnings: Vec<String>,
    /// Curves from the first successful replicate.
    #[serde(skip)]
    pub tables: Vec<Table>,
    /// Observed data of the first replicate, when a DGP ran.
    #[serde(skip)]
    pub dataset: Option<Dataset>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ExperimentReport {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.aggregates.get(name).map(|a| a.mean)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// `metric,n,mean,sd,truth,coverage`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["metric", "n", "mean", "sd", "truth", "coverage"]).map_err(io)?;
        let opt = |v: Option<f64>| v.map(crate::data::fmt_f64).unwrap_or_else(|| "NA".into());
        for (k, a) in &self.aggregates {
            w.write_record([
                k.clone(),
                a.n.to_string(),
                crate::data::fmt_f64(a.mean),
                crate::data::fmt_f64(a.sd),
                opt(a.truth),
                opt(a.coverage),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// Writes the report, curve CSVs, optional SVGs and the first dataset.
    pub fn write_outputs(&self, dir: &Path, format: ReportFormat, svg: bool) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, bytes)?;
            written.push(path);
            Ok(())
        };
        match format {
            ReportFormat::Json => put(format!("{}_report.json", self.name), self.to_json().into_bytes())?,
            ReportFormat::Csv => put(format!("{}_report.csv", self.name), self.to_csv()?.into_bytes())?,
        }
        for t in &self.tables {
            let mut buf = Vec::new();
            t.write_csv(&mut buf)?;
            put(format!("{}_{}.csv", self.name, t.name), buf)?;
            if svg {
                put(format!("{}_{}.svg", self.name, t.name), render_svg(t, &format!("{} {}", self.name, t.name)).into_bytes())?;
            }
        }
        if let Some(d) = &self.dataset {
            let mut buf = Vec::new();
            d.write_csv(&mut buf)?;
            put(format!("{}_data.csv", self.name), buf)?;
        }
        Ok(written)
    }
}

struct Outcome {
    metrics: BTreeMap<String, f64>,
    tables: Vec<Table>,
    dataset: Option<Dataset>,
    warnings: Vec<String>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(config, Exec::default())
}

/// Runs all replicates. A failing replicate is recorded and the run
/// continues; the run fails only when every replicate fails.
pub fn run_experiment_with(config: &ExperimentConfig, exec: Exec) -> Result<ExperimentReport> {
    let outcomes: Vec<Result<Outcome>> = exec.map(config.replicates, |r| run_replicate(config, r, exec));
    let mut replicates = Vec::with_capacity(outcomes.len());
    let mut tables = Vec::new();
    let mut dataset = None;
    let mut warnings = Vec::new();
    let mut first_error = None;
    for (r, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(o) => {
                if tables.is_empty() && dataset.is_none() {
                    tables = o.tables;
                    dataset = o.dataset;
                    warnings = o.warnings;
                }
                replicates.push(ReplicateResult { replicate: r, metrics: o.metrics, error: None });
            }
            Err(e) => {
                first_error.get_or_insert_with(|| e.clone());
                replicates.push(ReplicateResult { replicate: r, metrics: BTreeMap::new(), error: Some(e.to_string()) });
            }
        }
    }
    if replicates.iter().all(|r| r.error.is_some()) {
        return Err(first_error.expect("at least one replicate"));
    }
    let aggregates = aggregate(config, &replicates);
    Ok(ExperimentReport {
        name: config.name.clone(),
        config: config.echo.iter().cloned().collect(),
        master_seed: config.seed.master_seed,
        replicates,
        aggregates,
        warnings,
        tables,
        dataset,
    })
}

fn truths(config: &ExperimentConfig) -> Vec<(&'static str, Option<&'static str>, f64)> {
    let mut v = Vec::new();
    match &config.dgp {
        Dgp::Conditional => {
            v.push(("coxcp.beta1", Some("coxcp.se1"), config.model.beta1));
            v.push(("coxcp.beta2", Some("coxcp.se2"), config.model.beta2));
            if config.model.beta1 == config.model.beta2 || config.model.nu.is_infinite() {
                v.push(("cox.beta", Some("cox.se"), config.model.beta1));
            }
        }
        Dgp::Coupled(CouplingSpec::GammaShared { beta, theta }) => {
            v.push(("cox.beta", Some("cox.se"), *beta));
            v.push(("kendall.tau", None, tau_from_theta(*theta)));
        }
        Dgp::Coupled(CouplingSpec::TwoLevel { beta, .. }) => v.push(("cox.beta", Some("cox.se"), *beta)),
        _ => {}
    }
    v
}

fn aggregate(config: &ExperimentConfig, replicates: &[ReplicateResult]) -> BTreeMap<String, Aggregate> {
    let mut keys: Vec<&String> = replicates.iter().flat_map(|r| r.metrics.keys()).collect();
    keys.sort();
    keys.dedup();
    let truths = truths(config);
    keys.into_iter()
        .map(|k| {
            let vals: Vec<f64> =
                replicates.iter().filter_map(|r| r.metrics.get(k)).copied().filter(|v| v.is_finite()).collect();
            let n = vals.len();
            let mean = if n > 0 { vals.iter().sum::<f64>() / n as f64 } else { f64::NAN };
            let sd = if n > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                f64::NAN
            };
            let truth = truths.iter().find(|t| t.0 == k.as_str());
            let coverage = truth.and_then(|&(_, se_key, value)| {
                let se_key = se_key?;
                let hits: Vec<bool> = replicates
                    .iter()
                    .filter_map(|r| Some((*r.metrics.get(k)?, *r.metrics.get(se_key)?)))
                    .filter(|(e, s)| e.is_finite() && s.is_finite())
                    .map(|(e, s)| (e - value).abs() <= Z95 * s)
                    .collect();
                (!hits.is_empty()).then(|| hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64)
            });
            (k.clone(), Aggregate { n, mean, sd, truth: truth.map(|t| t.2), coverage })
        })
        .collect()
}

pub fn needs_data(e: Estimator) -> bool {
    !matches!(e, Estimator::Hrz | Estimator::Selection | Estimator::CausalHr | Estimator::Fig9 | Estimator::HazardDifference)
}

fn at_or_nan(f: impl Fn(f64) -> Result<f64>, t: f64) -> f64 {
    f(t).unwrap_or(f64::NAN)
}

fn run_replicate(config: &ExperimentConfig, r: usize, exec: Exec) -> Result<Outcome> {
    let seed = SeedSpec::new(config.seed.master_seed, r as u64);
    let has = |e: Estimator| config.estimators.contains(&e);
    let grid = &config.tgrid;
    let mut out = Outcome { metrics: BTreeMap::new(), tables: Vec::new(), dataset: None, warnings: Vec::new() };
    let keep_tables = r == 0;
    let put = |m: &mut BTreeMap<String, f64>, k: &str, v: f64| {
        m.insert(k.to_string(), v);
    };

    let pairs: Option<Vec<PotentialOutcomePair>> = match &config.dgp {
        Dgp::None => None,
        Dgp::Conditional => Some(
            ConditionalHazardDgp::new(config.model.clone(), config.frailty.clone()).generate_with(
                config.n,
                seed.derive(tags::GENERATE),
                exec,
            )?,
        ),
        Dgp::Coupled(spec) => Some(gen_coupled_with(spec, config.n, seed.derive(tags::GENERATE), exec)?),
    };
    if pairs.is_none() {
        if let Some(e) = config.estimators.iter().find(|e| needs_data(**e)) {
            return Err(Error::Domain(format!("estimator {e:?} needs a data-generating process (dgp = none)")));
        }
    }
    let data = match &pairs {
        Some(p) => {
            let d = apply_censoring(p, config.censoring, seed.derive(tags::CENSOR))?;
            put(&mut out.metrics, "censoring_fraction", d.censoring_fraction());
            Some(d)
        }
        None => None,
    };
    let m = &mut out.metrics;

    let need_cox = has(Estimator::Cox) || has(Estimator::GammaCoupling) || has(Estimator::Rr);
    let cox: Option<CoxFit> = match (&data, need_cox) {
        (Some(d), true) => Some(cox_fit(d, &CovariateSelector::arm_only())?),
        _ => None,
    };

    for &est in &config.estimators {
        match est {
            Estimator::Km => {
                let d = data.as_ref().expect("data");
                let mut t = Table::new("km", &["t", "s0", "s0_lo", "s0_hi", "s1", "s1_lo", "s1_hi"]);
                let kms = [kaplan_meier(d, Some(0))?, kaplan_meier(d, Some(1))?];
                for &x in grid {
                    let mut row = vec![x];
                    for km in &kms {
                        let s = at_or_nan(|x| km.curve().eval(x), x);
                        let se = at_or_nan(|x| km.variance_curve().eval(x), x).sqrt();
                        row.extend([s, (s - Z95 * se).max(0.0), (s + Z95 * se).min(1.0)]);
                    }
                    t.push(row);
                }
                out.tables.push(t);
            }
            Estimator::Cox => {
                let fit = cox.as_ref().expect("cox fit");
                put(m, "cox.beta", fit.beta[0]);
                put(m, "cox.se", fit.se[0]);
                put(m, "cox.n_iter", fit.n_iter as f64);
                let v: Vec<f64> = grid.iter().map(|&x| at_or_nan(|x| fit.baseline_cumhaz.eval(x), x)).collect();
                out.tables.push(Table::from_curve("cox_baseline", grid, &v));
            }
            Estimator::Coxcp => {
                let fit = cox_changepoint_fit(data.as_ref().expect("data"), config.model.nu)?;
                put(m, "coxcp.beta1", fit.beta1);
                put(m, "coxcp.se1", fit.se1);
                put(m, "coxcp.beta2", fit.beta2);
                put(m, "coxcp.se2", fit.se2);
                put(m, "coxcp.n_iter", fit.n_iter as f64);
            }
            Estimator::Aalen => {
                let fit = aalen_fit(data.as_ref().expect("data"), &CovariateSelector::arm_only())?;
                let col = fit.column("arm").expect("arm column");
                let mut t = Table::new("aalen", &["t", "estimate", "lo", "hi"]);
                for &x in grid {
                    if x > fit.estimation_end {
                        t.push(vec![x, f64::NAN, f64::NAN, f64::NAN]);
                    } else {
                        let (b, v) = fit.at(col, x);
                        t.push(vec![x, b, b - Z95 * v.sqrt(), b + Z95 * v.sqrt()]);
                    }
                }
                out.tables.push(t);
                let whole = constant_effect(&fit, col, None, config.n_resample, seed.derive(tags::RESAMPLE))?;
                put(m, "aalen.slope", whole.psi_hat);
                put(m, "aalen.slope_se", whole.se);
                put(m, "aalen.constancy_p", whole.p_value);
                for &(a, b) in &config.aalen_windows {
                    let c = constant_effect(&fit, col, Some((a, b)), 0, seed)?;
                    put(m, &format!("aalen.slope[{a},{b}]"), c.psi_hat);
                    put(m, &format!("aalen.slope_se[{a},{b}]"), c.se);
                }
            }
            Estimator::Hrz => {
                let t = hrz_curve(&config.model, &config.frailty, grid)?;
                let v = t.column("value").expect("value column");
                put(m, "hrz.min", v.iter().copied().fold(f64::INFINITY, f64::min));
                put(m, "hrz.max", v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
                out.tables.push(t);
            }
            Estimator::Selection => {
                let mut t = selection_curve(&config.model, &config.frailty, grid)?;
                if let Some(p) = &pairs {
                    t.columns.extend(["mc_arm0", "se_arm0", "mc_arm1", "se_arm1"].map(String::from));
                    let mut worst = 0.0f64;
                    for row in t.rows.iter_mut() {
                        let x = row[0];
                        let (m0, m1) = (frailty_survivor_mean(p, 0, x), frailty_survivor_mean(p, 1, x));
                        for (mc, analytic) in [(m0, row[1]), (m1, row[2])] {
                            if mc.n > 1 && mc.se > 0.0 {
                                worst = worst.max((mc.mean - analytic).abs() / mc.se);
                            }
                        }
                        row.extend([m0.mean, m0.se, m1.mean, m1.se]);
                    }
                    put(m, "selection.max_abs_z", worst);
                }
                let min_ratio = t.rows.iter().filter(|r| r[0] > 0.0).map(|r| r[3]).fold(f64::INFINITY, f64::min);
                put(m, "selection.min_ratio", min_ratio);
                out.tables.push(t);
            }
            Estimator::CausalHr => {
                let names: Vec<String> = config.taus.iter().map(|t| format!("tau_{t}")).collect();
                let mut cols = vec!["t"];
                cols.extend(names.iter().map(String::as_str));
                let mut t = Table::new("causal_hr", &cols);
                let thetas = config.taus.iter().map(|&tau| theta_from_tau(tau)).collect::<Result<Vec<_>>>()?;
                for &x in grid {
                    let l0 = config.model.baseline.eval(x);
                    let mut row = vec![x];
                    row.extend(thetas.iter().map(|&th| causal_hr_gamma(config.beta, th, l0)));
                    t.push(row);
                }
                out.tables.push(t);
            }
            Estimator::CausalHrMc => {
                let p = pairs.as_ref().expect("pairs");
                let pts = causal_hr_mc_with(p, grid, config.bandwidth, exec)?;
                let closed = match &config.dgp {
                    Dgp::Coupled(CouplingSpec::GammaShared { beta, theta }) => Some((*beta, *theta)),
                    _ => None,
                };
                let mut t = Table::new("causal_hr_mc", &["t", "hr", "se", "n_stratum", "flagged", "closed"]);
                let mut worst = 0.0f64;
                for q in &pts {
                    let c = closed.map(|(b, th)| causal_hr_closed(b, th, q.t)).unwrap_or(f64::NAN);
                    if !q.flagged && c.is_finite() {
                        worst = worst.max((q.hr - c).abs() / q.se);
                    }
                    t.push(vec![q.t, q.hr, q.se, q.n_stratum as f64, q.flagged as u8 as f64, c]);
                }
                if closed.is_some() {
                    put(m, "causal_hr_mc.max_abs_z", worst);
                }
                out.tables.push(t);
            }
            Estimator::Kendall => {
                put(m, "kendall.tau", kendall_tau_pairs(pairs.as_ref().expect("pairs"))?);
            }
            Estimator::GammaCoupling => {
                let fit = cox.as_ref().expect("cox fit");
                let inside: Vec<f64> = grid.iter().copied().filter(|&x| x <= fit.support_end()).collect();
                out.tables.push(gamma_coupling_curves(fit, &config.taus, &inside)?);
            }
            Estimator::Rr => {
                let d = data.as_ref().expect("data");
                let fit = cox.as_ref().expect("cox fit");
                let inside: Vec<f64> = grid.iter().copied().filter(|&x| x <= fit.support_end()).collect();
                let band = rr_curve_with(
                    d,
                    fit,
                    &CovariateSelector::arm_only(),
                    &inside,
                    config.level,
                    config.n_boot,
                    seed,
                    exec,
                )?;
                let mut t = Table::new("rr", &["t", "estimate", "lo", "hi", "lo_unif", "hi_unif"]);
                for i in 0..band.times.len() {
                    t.push(vec![
                        band.times[i],
                        band.estimate[i],
                        band.lo_pointwise[i],
                        band.hi_pointwise[i],
                        band.lo_uniform[i],
                        band.hi_uniform[i],
                    ]);
                }
                out.tables.push(t);
            }
            Estimator::Rmst => {
                let d = data.as_ref().expect("data");
                let h = config
                    .rmst_horizon
                    .ok_or_else(|| Error::Domain("rmst needs rmst_horizon".into()))?;
                let r0 = rmst(&kaplan_meier(d, Some(0))?, h)?;
                let r1 = rmst(&kaplan_meier(d, Some(1))?, h)?;
                let ratio = rmtl_ratio(&r1, &r0, config.level)?;
                put(m, "rmst.arm0", r0.rmst);
                put(m, "rmst.arm1", r1.rmst);
                put(m, "rmtl.arm0", r0.rmtl);
                put(m, "rmtl.arm1", r1.rmtl);
                put(m, "rmtl.ratio", ratio.ratio);
                put(m, "rmtl.ratio_lo", ratio.lo);
                put(m, "rmtl.ratio_hi", ratio.hi);
            }
            Estimator::Fig9 => {
                let tau = config.taus.first().copied().unwrap_or(0.0);
                let baseline = match config.fig9_target {
                    Some(target) => {
                        let rate = calibrate_constant_rate(config.model.beta1, tau, config.model.nu, target)?;
                        put(m, "fig9.rate", rate);
                        CumHaz::Rate(rate)
                    }
                    None => config.model.baseline.clone(),
                };
                let t = fig9_curve(config.model.beta1, config.model.beta2, config.model.nu, baseline, tau, grid)?;
                let v = t.column("value").expect("value column");
                put(m, "fig9.min", v.iter().copied().fold(f64::INFINITY, f64::min));
                put(m, "fig9.max", v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
                out.tables.push(t);
            }
            Estimator::HazardDifference => {
                let Dgp::Coupled(spec @ CouplingSpec::AdditiveHazard { .. }) = &config.dgp else {
                    return Err(Error::Domain("hazard_difference needs dgp = additive_hazard".into()));
                };
                let opts = HazardDiffOptions { h: config.bandwidth, ..HazardDiffOptions::default() };
                let hd = hazard_difference_causal_with(spec, grid, config.n, seed, opts, exec)?;
                out.tables.push(hd.table);
            }
        }
    }
    if !keep_tables {
        out.tables.clear();
    } else {
        out.dataset = data;
    }
    Ok(out)
}
