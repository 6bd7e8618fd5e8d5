//! Sensitivity-ratio route from the observed hazard ratio to the causal one.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curve::Table;
use crate::error::{Error, Result};
use crate::step::StepFunction;

/// A user-supplied function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeFunction {
    Const { value: f64 },
    Piecewise { step: StepFunction },
    /// Linear interpolation between `(t, value)` knots, flat outside.
    Table { knots: Vec<(f64, f64)> },
}

impl TimeFunction {
    pub fn constant(value: f64) -> Self {
        TimeFunction::Const { value }
    }

    pub fn table(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Domain("tabulated function needs at least one knot".into()));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Domain("tabulated function has duplicate times".into()));
        }
        Ok(TimeFunction::Table { knots })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Const { value } => *value,
            TimeFunction::Piecewise { step } => step.value_at(t),
            TimeFunction::Table { knots } => {
                let k = knots.partition_point(|p| p.0 <= t);
                if k == 0 {
                    knots[0].1
                } else if k == knots.len() {
                    knots[k - 1].1
                } else {
                    let (a, b) = (knots[k - 1], knots[k]);
                    a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
                }
            }
        }
    }
}

fn num(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Domain(format!("not a number: {s:?}")))
}

fn knot(s: &str) -> Result<(f64, f64)> {
    let (t, v) = s
        .split_once(':')
        .ok_or_else(|| Error::Domain(format!("expected <time>:<value>, got {s:?}")))?;
    Ok((num(t)?, num(v)?))
}

/// `const:<v>`, `piecewise:<v0>,<t1>:<v1>,...` (value `v_k` from `t_k` on)
/// or `table:<t0>:<v0>,<t1>:<v1>,...`.
impl FromStr for TimeFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s.split_once(':').unwrap_or(("const", s));
        match kind.trim() {
            "const" => Ok(TimeFunction::constant(num(body)?)),
            "piecewise" => {
                let mut parts = body.split(',');
                let initial = num(parts.next().unwrap_or(""))?;
                let knots = parts.map(knot).collect::<Result<Vec<_>>>()?;
                let (times, levels): (Vec<f64>, Vec<f64>) = knots.into_iter().unzip();
                Ok(TimeFunction::Piecewise { step: StepFunction::from_levels(times, initial, &levels)? })
            }
            "table" => TimeFunction::table(body.split(',').map(knot).collect::<Result<Vec<_>>>()?),
            other => Err(Error::Domain(format!("unknown function kind {other:?} (use const, piecewise or table)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityInput {
    pub obs_hr: TimeFunction,
    pub surv0: TimeFunction,
    pub surv1: TimeFunction,
    pub sr: TimeFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    /// Columns `t,obs_hr,pi,sr,causal_hr`; `causal_hr` is NaN where undefined.
    pub table: Table,
    pub warnings: Vec<String>,
    /// Grid points where the denominator vanished.
    pub point_errors: Vec<(f64, String)>,
}

/// `HR(t) = obs_hr(t) / [π(t) + SR(t)(1 − π(t))]` with `π = S₀/S₁`.
pub fn sensitivity_sr(input: &SensitivityInput, tgrid: &[f64]) -> Result<SensitivityCurve> {
    let mut table = Table::new("sensitivity", &["t", "obs_hr", "pi", "sr", "causal_hr"]);
    let mut warnings = Vec::new();
    let mut point_errors = Vec::new();
    for &t in tgrid {
        let (s0, s1) = (input.surv0.eval(t), input.surv1.eval(t));
        if !(s0 > 0.0 && s0 <= 1.0 && s1 > 0.0 && s1 <= 1.0) {
            return Err(Error::Domain(format!("survival values at t={t} must lie in (0,1], got {s0} and {s1}")));
        }
        let sr = input.sr.eval(t);
        if !(sr >= 0.0) {
            return Err(Error::Domain(format!("sensitivity ratio must be >= 0, got {sr} at t={t}")));
        }
        let mut pi = s0 / s1;
        if pi > 1.0 {
            warnings.push(format!("pi(t)={pi:.6} > 1 at t={t}; clipped to 1"));
            pi = 1.0;
        }
        let obs = input.obs_hr.eval(t);
        let denom = pi + sr * (1.0 - pi);
        let hr = if denom == 0.0 {
            point_errors.push((t, "zero denominator".to_string()));
            f64::NAN
        } else {
            obs / denom
        };
        table.push(vec![t, obs, pi, sr, hr]);
    }
    Ok(SensitivityCurve { table, warnings, point_errors })
}
