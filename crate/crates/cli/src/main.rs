//! `hazardlens` command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error,
//! 3 runtime or numerical error. Every flag can also be set through an
//! environment variable prefixed `HAZARDLENS_`; flags win.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use hazardlens::causal::{gamma_coupling_curves, sensitivity_sr, SensitivityInput, TimeFunction};
use hazardlens::curve::{linspace, Table};
use hazardlens::estimate::{
    aalen_fit, constant_effect, cox_changepoint_fit, cox_fit, kaplan_meier, rmst, rmtl_ratio, rr_curve_with, CoxFit,
    CovariateSelector, KaplanMeier,
};
use hazardlens::simlab::config::parse_grid;
use hazardlens::simlab::{
    render_svg, run_experiment_with, verify, Dgp, Estimator, ExperimentConfig, ReportFormat, VerifyOptions,
};
use hazardlens::{Dataset, Error, Exec, SeedSpec};

const Z95: f64 = 1.959963984540054;

#[derive(Parser, Debug)]
#[command(name = "hazardlens", version, about = "Hazard ratios, frailty selection and causal contrasts for two-arm survival data")]
struct Cli {
    /// Run every data-parallel loop on the calling thread
    #[arg(long, global = true, env = "HAZARDLENS_SEQUENTIAL")]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a simulation experiment from a bundled or file config
    Simulate(SimulateArgs),
    /// Fit an estimator to a dataset CSV
    Fit(FitArgs),
    /// Write the analytic curves of a config without simulating (hrz and
    /// selection when the config lists none)
    Curves(CurvesArgs),
    /// Causal hazard-ratio sensitivity curves from a Cox fit or a dataset
    Sensitivity(SensitivityArgs),
    /// Restricted mean survival and lost-time ratio per arm
    Rmst(RmstArgs),
    /// Run the oracle cross-check suite
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output directory
    #[arg(long, env = "HAZARDLENS_OUT", default_value = "out")]
    out: PathBuf,
    /// Also write an SVG next to every curve CSV
    #[arg(long, env = "HAZARDLENS_SVG")]
    svg: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Bundled config name (sim31, fig1, ...) or path to a config file
    #[arg(long, env = "HAZARDLENS_CONFIG")]
    config: String,
    #[arg(long, env = "HAZARDLENS_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "HAZARDLENS_REPLICATES")]
    replicates: Option<usize>,
    /// Extra `key=value` overrides applied after the config file
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, value_enum, env = "HAZARDLENS_FORMAT", default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Model {
    Km,
    Cox,
    Coxcp,
    Aalen,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Dataset CSV with columns id,time,status,arm[,covariates...]
    data: PathBuf,
    #[arg(long, value_enum, env = "HAZARDLENS_MODEL")]
    model: Model,
    /// Change point for coxcp
    #[arg(long, env = "HAZARDLENS_NU")]
    nu: Option<f64>,
    /// Grid for the relative-risk curve (cox only), e.g. `0:24:49` or `1,2,3`
    #[arg(long, env = "HAZARDLENS_RR_GRID")]
    rr_grid: Option<String>,
    #[arg(long, env = "HAZARDLENS_N_BOOT", default_value_t = 1000)]
    n_boot: usize,
    #[arg(long, env = "HAZARDLENS_LEVEL", default_value_t = 0.95)]
    level: f64,
    /// Multiplier resamples for the Aalen constancy test
    #[arg(long, env = "HAZARDLENS_N_RESAMPLE", default_value_t = 1000)]
    n_resample: usize,
    #[arg(long, env = "HAZARDLENS_SEED", default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct CurvesArgs {
    #[arg(long, env = "HAZARDLENS_CONFIG")]
    config: String,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SensitivityArgs {
    /// Cox fit JSON written by `fit --model cox`, or a dataset CSV
    input: PathBuf,
    /// Kendall's tau values for the Gamma-coupling route
    #[arg(long, value_delimiter = ',', env = "HAZARDLENS_TAU")]
    tau: Option<Vec<f64>>,
    /// Sensitivity ratio, e.g. `const:1.5`, `piecewise:1,2:1.5`, `table:0:1,5:2`
    #[arg(long, env = "HAZARDLENS_SR")]
    sr: Option<String>,
    /// Evaluation grid; defaults to 101 points over the fit's support
    #[arg(long, env = "HAZARDLENS_TGRID")]
    tgrid: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct RmstArgs {
    data: PathBuf,
    #[arg(long, env = "HAZARDLENS_HORIZON")]
    horizon: f64,
    #[arg(long, env = "HAZARDLENS_LEVEL", default_value_t = 0.95)]
    level: f64,
    #[arg(long, env = "HAZARDLENS_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Comma-separated check groups
    #[arg(long, value_delimiter = ',', env = "HAZARDLENS_ONLY")]
    only: Option<Vec<String>>,
    /// Multiplies every tolerance; 0 fails every check
    #[arg(long, env = "HAZARDLENS_TOLERANCE", default_value_t = 1.0)]
    tolerance: f64,
    #[arg(long, env = "HAZARDLENS_SEED")]
    seed: Option<u64>,
    /// Also write the results table as `verify.csv` here
    #[arg(long, env = "HAZARDLENS_OUT")]
    out: Option<PathBuf>,
}

enum Failure {
    Verify(usize),
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Schema { .. } | Error::Io(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, exec),
        Command::Fit(a) => fit(a, exec),
        Command::Curves(a) => curves(a, exec),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Rmst(a) => rmst_cmd(a),
        Command::Verify(a) => verify_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(n)) => {
            eprintln!("error: {n} check(s) failed");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn load_config(name: &str, overrides: &[String]) -> std::result::Result<ExperimentConfig, Failure> {
    let text = match ExperimentConfig::bundled(name) {
        Some(t) => t.to_string(),
        None => fs::read_to_string(name)
            .map_err(|e| Failure::Usage(format!("no bundled config or readable file named {name:?}: {e}")))?,
    };
    let mut config = ExperimentConfig::parse(&text)?;
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| Failure::Usage(format!("override {o:?} is not KEY=VALUE")))?;
        config = config.with_override(k.trim(), v.trim())?;
    }
    Ok(config)
}

fn read_data(path: &Path) -> std::result::Result<Dataset, Failure> {
    let file = fs::File::open(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(Dataset::read_csv(file)?)
}

fn write_table(out: &OutArgs, prefix: &str, t: &Table) -> Outcome {
    fs::create_dir_all(&out.out)?;
    let stem = if prefix.is_empty() { t.name.clone() } else { format!("{prefix}_{}", t.name) };
    let path = out.out.join(format!("{stem}.csv"));
    t.write_csv(fs::File::create(&path)?)?;
    eprintln!("wrote {}", path.display());
    if out.svg {
        let path = out.out.join(format!("{stem}.svg"));
        fs::write(&path, render_svg(t, &stem))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Outcome {
    fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(value).expect("json value serializes") + "\n";
    let path = dir.join(name);
    fs::write(&path, &text)?;
    print!("{text}");
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn simulate(a: SimulateArgs, exec: Exec) -> Outcome {
    let mut overrides = a.overrides.clone();
    if let Some(s) = a.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(r) = a.replicates {
        overrides.push(format!("replicates={r}"));
    }
    let config = load_config(&a.config, &overrides)?;
    let report = run_experiment_with(&config, exec)?;
    let format = match a.format {
        Format::Json => ReportFormat::Json,
        Format::Csv => ReportFormat::Csv,
    };
    for path in report.write_outputs(&a.out.out, format, a.out.svg)? {
        eprintln!("wrote {}", path.display());
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let failed = report.replicates.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} replicates failed", report.replicates.len());
    }
    for (k, agg) in &report.aggregates {
        println!("{k:<28} {:>12.6}  sd {:>10.6}  n {}", agg.mean, agg.sd, agg.n);
    }
    Ok(())
}

fn selector(d: &Dataset) -> CovariateSelector {
    CovariateSelector::arm_and((0..d.n_covariates()).collect())
}

fn km_table(name: &str, km: &KaplanMeier) -> Table {
    let mut t = Table::new(name, &["t", "estimate", "lo", "hi"]);
    t.push(vec![0.0, 1.0, 1.0, 1.0]);
    for (i, &x) in km.table.times.iter().enumerate() {
        let (s, se) = (km.survival[i], km.greenwood_var[i].sqrt());
        t.push(vec![x, s, (s - Z95 * se).max(0.0), (s + Z95 * se).min(1.0)]);
    }
    t
}

fn fit(a: FitArgs, exec: Exec) -> Outcome {
    let data = read_data(&a.data)?;
    if a.rr_grid.is_some() && a.model != Model::Cox {
        return Err(Failure::Usage("--rr-grid applies to --model cox only".into()));
    }
    match a.model {
        Model::Km => {
            let mut arms = serde_json::Map::new();
            let all = kaplan_meier(&data, None)?;
            write_table(&a.out, "", &km_table("km", &all))?;
            for arm in [0u8, 1] {
                if data.samples.iter().any(|s| s.arm == arm) {
                    let km = kaplan_meier(&data, Some(arm))?;
                    write_table(&a.out, "", &km_table(&format!("km_arm{arm}"), &km))?;
                    arms.insert(arm.to_string(), km_summary(&km));
                }
            }
            write_json(&a.out.out, "km_fit.json", &json!({ "model": "km", "all": km_summary(&all), "arms": arms }))
        }
        Model::Cox => {
            let sel = selector(&data);
            let fit = cox_fit(&data, &sel)?;
            let base = &fit.baseline_cumhaz;
            let mut t = Table::new("cox_baseline", &["t", "estimate"]);
            t.push(vec![0.0, 0.0]);
            for (x, v) in base.jump_times().iter().zip(base.values()) {
                t.push(vec![*x, *v]);
            }
            write_table(&a.out, "", &t)?;
            if let Some(g) = &a.rr_grid {
                let grid = parse_grid(g).map_err(|m| Failure::Usage(format!("--rr-grid: {m}")))?;
                let band = rr_curve_with(&data, &fit, &sel, &grid, a.level, a.n_boot, SeedSpec::new(a.seed, 0), exec)?;
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
                write_table(&a.out, "", &t)?;
            }
            write_json(&a.out.out, "cox_fit.json", &serde_json::to_value(&fit).expect("fit serializes"))
        }
        Model::Coxcp => {
            let nu = a.nu.ok_or_else(|| Failure::Usage("--model coxcp needs --nu".into()))?;
            let fit = cox_changepoint_fit(&data, nu)?;
            if !fit.identified.iter().all(|x| *x) {
                eprintln!("warning: a period has no events in one arm; its coefficient is not identified");
            }
            write_json(&a.out.out, "coxcp_fit.json", &serde_json::to_value(&fit).expect("fit serializes"))
        }
        Model::Aalen => {
            let fit = aalen_fit(&data, &selector(&data))?;
            let mut effects = Vec::new();
            for (j, name) in fit.names.iter().enumerate() {
                let mut t = Table::new(format!("aalen_{name}"), &["t", "estimate", "lo", "hi"]);
                t.push(vec![0.0, 0.0, 0.0, 0.0]);
                for &x in &fit.times {
                    let (b, v) = fit.at(j, x);
                    t.push(vec![x, b, b - Z95 * v.sqrt(), b + Z95 * v.sqrt()]);
                }
                write_table(&a.out, "", &t)?;
                effects.push(constant_effect(&fit, j, None, a.n_resample, SeedSpec::new(a.seed, j as u64))?);
            }
            write_json(
                &a.out.out,
                "aalen_fit.json",
                &json!({
                    "model": "aalen",
                    "names": fit.names,
                    "estimation_end": fit.estimation_end,
                    "n_times": fit.times.len(),
                    "constant_effects": effects,
                }),
            )
        }
    }
}

fn km_summary(km: &KaplanMeier) -> serde_json::Value {
    json!({
        "n": km.table.n_risk.first().copied().unwrap_or(0.0),
        "events": km.table.n_event.iter().sum::<f64>(),
        "support_end": km.support_end(),
    })
}

fn curves(a: CurvesArgs, exec: Exec) -> Outcome {
    let mut config = load_config(&a.config, &a.overrides)?;
    config.dgp = Dgp::None;
    config.replicates = 1;
    config
        .estimators
        .retain(|e| matches!(e, Estimator::Hrz | Estimator::Selection | Estimator::CausalHr | Estimator::Fig9));
    if config.estimators.is_empty() {
        config.estimators = vec![Estimator::Hrz, Estimator::Selection];
    }
    let report = run_experiment_with(&config, exec)?;
    for t in &report.tables {
        write_table(&a.out, &config.name, t)?;
    }
    Ok(())
}

fn sensitivity(a: SensitivityArgs) -> Outcome {
    if a.tau.is_some() == a.sr.is_some() {
        return Err(Failure::Usage("give exactly one of --tau and --sr".into()));
    }
    let is_json = a.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let (fit, data) = if is_json {
        let text = fs::read_to_string(&a.input).map_err(|e| Failure::Usage(format!("{}: {e}", a.input.display())))?;
        let fit: CoxFit = serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("{} is not a Cox fit: {e}", a.input.display())))?;
        (fit, None)
    } else {
        let data = read_data(&a.input)?;
        (cox_fit(&data, &CovariateSelector::arm_only())?, Some(data))
    };
    let (beta, _) = fit
        .coefficient("arm")
        .ok_or_else(|| Failure::Usage("the Cox fit has no `arm` coefficient".into()))?;
    let tgrid = match &a.tgrid {
        Some(g) => parse_grid(g).map_err(|m| Failure::Usage(format!("--tgrid: {m}")))?,
        None => linspace(0.0, fit.support_end(), 101),
    };

    if let Some(taus) = &a.tau {
        let t = gamma_coupling_curves(&fit, taus, &tgrid)?;
        return write_table(&a.out, "sensitivity", &t);
    }

    let sr: TimeFunction = a.sr.as_deref().unwrap_or_default().parse().map_err(|m| Failure::Usage(format!("--sr: {m}")))?;
    let (surv0, surv1) = match &data {
        Some(d) => {
            let (k0, k1) = (kaplan_meier(d, Some(0))?, kaplan_meier(d, Some(1))?);
            let knots = |km: &KaplanMeier| -> std::result::Result<Vec<(f64, f64)>, Failure> {
                let c = km.curve();
                Ok(tgrid.iter().map(|&t| c.eval(t).map(|s| (t, s))).collect::<hazardlens::Result<_>>()?)
            };
            (knots(&k0)?, knots(&k1)?)
        }
        None => {
            let mut s0 = Vec::new();
            let mut s1 = Vec::new();
            for &t in &tgrid {
                let l = fit.baseline_cumhaz.eval(t)?;
                s0.push((t, (-l).exp()));
                s1.push((t, (-l * beta.exp()).exp()));
            }
            (s0, s1)
        }
    };
    let input = SensitivityInput {
        obs_hr: TimeFunction::constant(beta.exp()),
        surv0: TimeFunction::table(surv0)?,
        surv1: TimeFunction::table(surv1)?,
        sr,
    };
    let curve = sensitivity_sr(&input, &tgrid)?;
    for w in &curve.warnings {
        eprintln!("warning: {w}");
    }
    for (t, m) in &curve.point_errors {
        eprintln!("warning: t={t}: {m}");
    }
    write_table(&a.out, "", &curve.table)
}

fn rmst_cmd(a: RmstArgs) -> Outcome {
    let data = read_data(&a.data)?;
    let r0 = rmst(&kaplan_meier(&data, Some(0))?, a.horizon)?;
    let r1 = rmst(&kaplan_meier(&data, Some(1))?, a.horizon)?;
    let ratio = match rmtl_ratio(&r1, &r0, a.level) {
        Ok(r) => Some(r),
        Err(e) => {
            eprintln!("warning: {e}");
            None
        }
    };
    write_json(&a.out, "rmst.json", &json!({ "horizon": a.horizon, "arm0": r0, "arm1": r1, "rmtl_ratio": ratio }))
}

fn verify_cmd(a: VerifyArgs) -> Outcome {
    let mut opts = VerifyOptions { only: a.only, tol_scale: a.tolerance, ..VerifyOptions::default() };
    if let Some(s) = a.seed {
        opts.seed = s;
    }
    let results = verify(&opts).map_err(|e| Failure::Usage(e.to_string()))?;
    println!("{:<6} {:<18} {:<40} {:>14} {:>12}", "status", "group", "check", "value", "tolerance");
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status:<6} {:<18} {:<40} {:>14.6e} {:>12.3e}", r.group, r.name, r.value, r.tolerance);
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        let mut w = String::from("group,check,value,tolerance,passed,detail\n");
        for r in &results {
            w.push_str(&format!("{},\"{}\",{},{},{},\"{}\"\n", r.group, r.name, r.value, r.tolerance, r.passed, r.detail));
        }
        fs::write(dir.join("verify.csv"), w)?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        for r in results.iter().filter(|r| !r.passed) {
            eprintln!("failed: {} {} ({})", r.group, r.name, r.detail);
        }
        return Err(Failure::Verify(failed));
    }
    Ok(())
}
