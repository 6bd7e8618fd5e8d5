//! Flat `key = value` experiment configs.
//!
//! Blank lines and `#` comments are ignored. Numbers accept `log(x)` and
//! `-log(x)`; grids are `start:end:count` or a comma list.
//!
//! | key | meaning |
//! |-----|---------|
//! | `name` | experiment name, used as file prefix |
//! | `dgp` | `none`, `conditional`, `gamma_shared`, `two_level`, `shared_additive`, `additive_hazard` |
//! | `frailty` | `gamma:<θ>`, `discrete:<z>:<p>,...` or `low_high` |
//! | `beta1`, `beta2`, `nu` | marginal change-point model (`nu` defaults to `inf`) |
//! | `lambda0` | constant baseline rate, or `piecewise:<h0>,<t1>:<h1>,...` |
//! | `beta`, `theta`, `alpha`, `z2_var` | coupling parameters |
//! | `psi`, `omega0` | additive-hazard pieces, same syntax as `lambda0` |
//! | `n`, `replicates`, `seed` | sample size, replicate count, master seed |
//! | `censoring` | `none`, `paper[:u_max:admin:fraction]`, `uniform:<u_max>`, `admin:<t>` |
//! | `estimators` | comma list, see [`Estimator`] |
//! | `tgrid` | evaluation grid |
//! | `taus`, `tau` | Kendall's τ values for gamma-coupling curves |
//! | `aalen_windows` | `a:b,...` windows for constant-effect slopes |
//! | `bandwidth` | bin width of the stratum hazard estimator |
//! | `n_boot`, `level`, `rmst_horizon`, `n_resample` | estimator settings |
//! | `fig9_target` | calibrate a constant baseline so `HR_Z(ν) = target` |

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::causal::coupling::CouplingSpec;
use crate::error::{Error, Result};
use crate::frailty::{FrailtySpec, MarginalModel};
use crate::seed::SeedSpec;
use crate::simlab::censoring::CensoringScheme;
use crate::step::{CumHaz, StepFunction};

pub const BUNDLED: &[(&str, &str)] = &[
    ("sim31", include_str!("../../configs/sim31.conf")),
    ("fig1", include_str!("../../configs/fig1.conf")),
    ("fig2", include_str!("../../configs/fig2.conf")),
    ("fig3", include_str!("../../configs/fig3.conf")),
    ("fig4", include_str!("../../configs/fig4.conf")),
    ("fig6-shape", include_str!("../../configs/fig6-shape.conf")),
    ("fig9-shape", include_str!("../../configs/fig9-shape.conf")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Km,
    Cox,
    Coxcp,
    Aalen,
    Hrz,
    Selection,
    CausalHr,
    CausalHrMc,
    Kendall,
    GammaCoupling,
    Rr,
    Rmst,
    Fig9,
    HazardDifference,
}

impl FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s.trim() {
            "km" => Estimator::Km,
            "cox" => Estimator::Cox,
            "coxcp" => Estimator::Coxcp,
            "aalen" => Estimator::Aalen,
            "hrz" => Estimator::Hrz,
            "selection" => Estimator::Selection,
            "causal_hr" => Estimator::CausalHr,
            "causal_hr_mc" => Estimator::CausalHrMc,
            "kendall" => Estimator::Kendall,
            "gamma_coupling" => Estimator::GammaCoupling,
            "rr" => Estimator::Rr,
            "rmst" => Estimator::Rmst,
            "fig9" => Estimator::Fig9,
            "hazard_difference" => Estimator::HazardDifference,
            other => return Err(format!("unknown estimator {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dgp {
    /// Analytic curves only.
    None,
    /// Multiplicative frailty with the marginal change-point Cox model.
    Conditional,
    Coupled(CouplingSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub dgp: Dgp,
    pub model: MarginalModel,
    pub frailty: FrailtySpec,
    /// Arm coefficient for couplings and closed-form causal curves.
    pub beta: f64,
    pub n: usize,
    pub censoring: CensoringScheme,
    pub estimators: Vec<Estimator>,
    pub tgrid: Vec<f64>,
    pub seed: SeedSpec,
    pub replicates: usize,
    pub taus: Vec<f64>,
    pub aalen_windows: Vec<(f64, f64)>,
    pub bandwidth: f64,
    pub n_boot: usize,
    pub level: f64,
    pub n_resample: usize,
    pub rmst_horizon: Option<f64>,
    pub fig9_target: Option<f64>,
    /// Keys as written, in file order, for the report echo.
    pub echo: Vec<(String, String)>,
}

const KEYS: &[&str] = &[
    "name", "dgp", "frailty", "beta1", "beta2", "nu", "lambda0", "beta", "theta", "alpha", "z2_var", "psi", "omega0",
    "n", "replicates", "seed", "censoring", "estimators", "tgrid", "taus", "tau", "aalen_windows", "bandwidth",
    "n_boot", "level", "rmst_horizon", "n_resample", "fig9_target",
];

pub fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest.trim()),
        None => (1.0, s),
    };
    if let Some(inner) = body.strip_prefix("log(").and_then(|r| r.strip_suffix(')')) {
        let x: f64 = inner.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
        if x > 0.0 {
            return Ok(sign * x.ln());
        }
    }
    Err(format!("not a number: {s:?}"))
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_number).collect()
}

pub fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let grid = if parts.len() == 3 {
        let (a, b) = (parse_number(parts[0])?, parse_number(parts[1])?);
        let n: usize = parts[2].trim().parse().map_err(|_| format!("bad grid count {:?}", parts[2]))?;
        if n < 1 || !(b >= a) {
            return Err(format!("bad grid {s:?}"));
        }
        crate::curve::linspace(a, b, n)
    } else {
        parse_list(s)?
    };
    if grid.is_empty() || grid.iter().any(|t| !(*t >= 0.0)) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(format!("grid must be nonempty, nonnegative and sorted: {s:?}"));
    }
    Ok(grid)
}

pub fn parse_frailty(s: &str) -> std::result::Result<FrailtySpec, String> {
    let (kind, body) = s.split_once(':').unwrap_or((s, ""));
    match kind.trim() {
        "low_high" => Ok(FrailtySpec::low_high_risk()),
        "gamma" => FrailtySpec::gamma(parse_number(body)?).map_err(|e| e.to_string()),
        "discrete" => {
            let atoms = body
                .split(',')
                .map(|a| {
                    let (z, p) = a.split_once(':').ok_or_else(|| format!("expected <z>:<p>, got {a:?}"))?;
                    Ok((parse_number(z)?, parse_number(p)?))
                })
                .collect::<std::result::Result<Vec<_>, String>>()?;
            FrailtySpec::discrete(atoms).map_err(|e| e.to_string())
        }
        other => Err(format!("unknown frailty {other:?}")),
    }
}

/// Piecewise-constant function `<v0>` or `piecewise:<v0>,<t1>:<v1>,...`.
pub fn parse_step(s: &str) -> std::result::Result<StepFunction, String> {
    let body = s.trim().strip_prefix("piecewise:").unwrap_or(s.trim());
    let mut parts = body.split(',');
    let initial = parse_number(parts.next().unwrap_or(""))?;
    let mut times = Vec::new();
    let mut levels = Vec::new();
    for p in parts {
        let (t, v) = p.split_once(':').ok_or_else(|| format!("expected <t>:<value>, got {p:?}"))?;
        times.push(parse_number(t)?);
        levels.push(parse_number(v)?);
    }
    StepFunction::from_levels(times, initial, &levels).map_err(|e| e.to_string())
}

fn parse_baseline(s: &str) -> std::result::Result<CumHaz, String> {
    let step = parse_step(s)?;
    if step.values().iter().any(|v| *v < 0.0) {
        return Err("baseline hazard must be nonnegative".into());
    }
    Ok(if step.jump_times().is_empty() { CumHaz::Rate(step.values()[0]) } else { CumHaz::PiecewiseRate(step) })
}

pub fn parse_censoring(s: &str) -> std::result::Result<CensoringScheme, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let scheme = match parts.as_slice() {
        ["none"] => CensoringScheme::None,
        ["paper"] => CensoringScheme::paper(),
        ["paper", u, a, f] => CensoringScheme::PaperScheme {
            u_max: parse_number(u)?,
            admin_time: parse_number(a)?,
            random_fraction: parse_number(f)?,
        },
        ["uniform", u] => CensoringScheme::Uniform { u_max: parse_number(u)? },
        ["admin", t] => CensoringScheme::Admin { time: parse_number(t)? },
        _ => return Err(format!("unknown censoring scheme {s:?}")),
    };
    scheme.validate().map_err(|e| e.to_string())?;
    Ok(scheme)
}

fn parse_windows(s: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    s.split(',')
        .map(|w| {
            let (a, b) = w.split_once(':').ok_or_else(|| format!("expected <a>:<b>, got {w:?}"))?;
            let (a, b) = (parse_number(a)?, parse_number(b)?);
            if !(b > a && a >= 0.0) {
                return Err(format!("empty window {w:?}"));
            }
            Ok((a, b))
        })
        .collect()
}

impl ExperimentConfig {
    /// Text of a bundled config.
    pub fn bundled(name: &str) -> Option<&'static str> {
        BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut raw: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut echo = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config { line: lineno, message: format!("expected key = value, got {line:?}") })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::Config { line: lineno, message: format!("unknown key {k:?}") });
            }
            if raw.contains_key(&k) {
                return Err(Error::Config { line: lineno, message: format!("duplicate key {k:?}") });
            }
            echo.push((k.clone(), v.clone()));
            raw.insert(k, (lineno, v));
        }
        Self::from_pairs(raw, echo)
    }

    /// Replaces or adds a key, re-validating the whole config.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        if !KEYS.contains(&key) {
            return Err(Error::Config { line: 0, message: format!("unknown key {key:?}") });
        }
        let mut echo: Vec<(String, String)> = self.echo.iter().filter(|(k, _)| k != key).cloned().collect();
        echo.push((key.to_string(), value.to_string()));
        let raw = echo.iter().enumerate().map(|(i, (k, v))| (k.clone(), (i + 1, v.clone()))).collect();
        Self::from_pairs(raw, echo)
    }

    fn from_pairs(raw: BTreeMap<String, (usize, String)>, echo: Vec<(String, String)>) -> Result<Self> {
        type Raw = BTreeMap<String, (usize, String)>;
        let get = &raw;
        fn field<T>(
            get: &Raw,
            key: &str,
            default: Option<T>,
            parse: impl Fn(&str) -> std::result::Result<T, String>,
        ) -> Result<T> {
            match get.get(key) {
                Some((line, v)) => parse(v).map_err(|m| Error::Config { line: *line, message: format!("{key}: {m}") }),
                None => default.ok_or_else(|| Error::Config { line: 0, message: format!("missing required key {key:?}") }),
            }
        }
        let num = |s: &str| parse_number(s);
        let count = |s: &str| s.trim().parse::<usize>().map_err(|_| format!("not a count: {s:?}"));
        let line_of = |k: &str| get.get(k).map(|x| x.0).unwrap_or(0);

        let name = field(get, "name", None, |s| Ok(s.to_string()))?;
        let beta1 = field(get, "beta1", Some(0.0), num)?;
        let beta2 = field(get, "beta2", Some(beta1), num)?;
        let nu = field(get, "nu", Some(f64::INFINITY), |s| if s.trim() == "inf" { Ok(f64::INFINITY) } else { num(s) })?;
        let baseline = field(get, "lambda0", Some(CumHaz::Rate(1.0)), parse_baseline)?;
        let model = MarginalModel::new(beta1, beta2, nu, baseline.clone())
            .map_err(|e| Error::Config { line: line_of("nu").max(line_of("beta1")), message: e.to_string() })?;
        let frailty = field(get, "frailty", Some(FrailtySpec::Gamma { theta: 0.0 }), parse_frailty)?;

        let beta = field(get, "beta", Some(beta1), num)?;
        let dgp_line = line_of("dgp");
        let dgp_name = field(get, "dgp", Some("none".to_string()), |s| Ok(s.trim().to_string()))?;
        let dgp = match dgp_name.as_str() {
            "none" => Dgp::None,
            "conditional" => Dgp::Conditional,
            "gamma_shared" => Dgp::Coupled(CouplingSpec::GammaShared { beta, theta: field(get, "theta", None, num)? }),
            "two_level" => Dgp::Coupled(CouplingSpec::TwoLevel {
                beta,
                lambda0: baseline,
                z2_var: field(get, "z2_var", Some(1.0), num)?,
            }),
            "shared_additive" => Dgp::Coupled(CouplingSpec::SharedAdditive { alpha: field(get, "alpha", None, num)?, beta }),
            "additive_hazard" => Dgp::Coupled(CouplingSpec::AdditiveHazard {
                psi: field(get, "psi", None, parse_step)?,
                omega0: field(get, "omega0", Some(StepFunction::constant(1.0)), parse_step)?,
                frailty: frailty.clone(),
            }),
            other => return Err(Error::Config { line: dgp_line, message: format!("unknown dgp {other:?}") }),
        };
        if let Dgp::Coupled(spec) = &dgp {
            spec.validate().map_err(|e| Error::Config { line: dgp_line, message: e.to_string() })?;
        }

        let n = field(get, "n", Some(1), count)?;
        if n < 1 {
            return Err(Error::Config { line: line_of("n"), message: "n must be at least 1".into() });
        }
        let replicates = field(get, "replicates", Some(1), count)?;
        if replicates < 1 {
            return Err(Error::Config { line: line_of("replicates"), message: "replicates must be at least 1".into() });
        }
        let master = field(get, "seed", Some(0u64), |s| s.trim().parse::<u64>().map_err(|_| format!("not a seed: {s:?}")))?;
        let censoring = field(get, "censoring", Some(CensoringScheme::None), parse_censoring)?;
        let estimators = field(get, "estimators", Some(Vec::new()), |s| {
            s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
        })?;
        let tgrid = field(get, "tgrid", None, parse_grid)?;
        let mut taus = field(get, "taus", Some(Vec::new()), parse_list)?;
        if let Some((_, v)) = get.get("tau") {
            taus.insert(0, num(v).map_err(|m| Error::Config { line: line_of("tau"), message: m })?);
        }
        if let Some(t) = taus.iter().find(|t| !(0.0..1.0).contains(*t)) {
            return Err(Error::Config { line: line_of("taus").max(line_of("tau")), message: format!("tau {t} outside [0,1)") });
        }
        let aalen_windows = field(get, "aalen_windows", Some(Vec::new()), parse_windows)?;
        let bandwidth = field(get, "bandwidth", Some(0.05), num)?;
        if !(bandwidth > 0.0) {
            return Err(Error::Config { line: line_of("bandwidth"), message: "bandwidth must be positive".into() });
        }
        let n_boot = field(get, "n_boot", Some(1000), count)?;
        let level = field(get, "level", Some(0.95), num)?;
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Config { line: line_of("level"), message: "level must lie in (0,1)".into() });
        }
        let n_resample = field(get, "n_resample", Some(1000), count)?;
        let rmst_horizon = field(get, "rmst_horizon", Some(None), |s| num(s).map(Some))?;
        let fig9_target = field(get, "fig9_target", Some(None), |s| num(s).map(Some))?;

        Ok(Self {
            name,
            dgp,
            model,
            frailty,
            beta,
            n,
            censoring,
            estimators,
            tgrid,
            seed: SeedSpec::new(master, 0),
            replicates,
            taus,
            aalen_windows,
            bandwidth,
            n_boot,
            level,
            n_resample,
            rmst_horizon,
            fig9_target,
            echo,
        })
    }
}
