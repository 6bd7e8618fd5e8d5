use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SurvivalSample};
use crate::error::{Error, Result};
use crate::step::{CumHaz, StepFunction};

/// Distinct event times with risk-set sizes and event counts (ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub times: Vec<f64>,
    pub n_risk: Vec<f64>,
    pub n_event: Vec<f64>,
    /// Largest observed time (event or censoring).
    pub last_time: f64,
}

impl RiskTable {
    pub fn from_samples(samples: &[&SurvivalSample]) -> Self {
        let mut obs: Vec<(f64, u8)> = samples.iter().map(|s| (s.time, s.status)).collect();
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let last_time = obs.last().map_or(0.0, |o| o.0);
        let mut table = Self { times: Vec::new(), n_risk: Vec::new(), n_event: Vec::new(), last_time };
        let n = obs.len();
        let mut i = 0;
        while i < n {
            let t = obs[i].0;
            let mut j = i;
            let mut d = 0.0;
            while j < n && obs[j].0 == t {
                d += obs[j].1 as f64;
                j += 1;
            }
            if d > 0.0 {
                table.times.push(t);
                table.n_risk.push((n - i) as f64);
                table.n_event.push(d);
            }
            i = j;
        }
        table
    }
}

/// Product-limit survival curve with Greenwood variances at each event time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaplanMeier {
    pub table: RiskTable,
    pub survival: Vec<f64>,
    pub greenwood_var: Vec<f64>,
}

impl KaplanMeier {
    /// Survival curve as a step function supported up to the last observed time.
    pub fn curve(&self) -> StepFunction {
        StepFunction::from_levels(self.table.times.clone(), 1.0, &self.survival)
            .expect("event times are strictly increasing")
            .with_domain_end(self.table.last_time)
    }

    pub fn variance_curve(&self) -> StepFunction {
        StepFunction::from_levels(self.table.times.clone(), 0.0, &self.greenwood_var)
            .expect("event times are strictly increasing")
            .with_domain_end(self.table.last_time)
    }

    pub fn support_end(&self) -> f64 {
        self.table.last_time
    }
}

pub fn kaplan_meier(data: &Dataset, arm: Option<u8>) -> Result<KaplanMeier> {
    let sel = data.select_arm(arm);
    if sel.is_empty() {
        return Err(Error::EmptySelection(format!("no samples for arm {arm:?}")));
    }
    Ok(kaplan_meier_samples(&sel))
}

pub(crate) fn kaplan_meier_samples(sel: &[&SurvivalSample]) -> KaplanMeier {
    let table = RiskTable::from_samples(sel);
    let mut survival = Vec::with_capacity(table.times.len());
    let mut greenwood_var = Vec::with_capacity(table.times.len());
    let mut s = 1.0;
    let mut gw = 0.0;
    for (&n, &d) in table.n_risk.iter().zip(&table.n_event) {
        s *= 1.0 - d / n;
        if n > d {
            gw += d / (n * (n - d));
            greenwood_var.push(s * s * gw);
        } else {
            greenwood_var.push(0.0);
        }
        survival.push(s);
    }
    KaplanMeier { table, survival, greenwood_var }
}

/// Nelson–Aalen cumulative hazard with its counting-process variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelsonAalen {
    pub table: RiskTable,
    pub cumhaz: Vec<f64>,
    pub variance: Vec<f64>,
}

impl NelsonAalen {
    pub fn as_cumhaz(&self) -> CumHaz {
        CumHaz::Step(
            StepFunction::from_levels(self.table.times.clone(), 0.0, &self.cumhaz)
                .expect("event times are strictly increasing")
                .with_domain_end(self.table.last_time),
        )
    }
}

pub fn nelson_aalen(data: &Dataset, arm: Option<u8>) -> Result<NelsonAalen> {
    let sel = data.select_arm(arm);
    if sel.is_empty() {
        return Err(Error::EmptySelection(format!("no samples for arm {arm:?}")));
    }
    let table = RiskTable::from_samples(&sel);
    let mut cumhaz = Vec::with_capacity(table.times.len());
    let mut variance = Vec::with_capacity(table.times.len());
    let (mut h, mut v) = (0.0, 0.0);
    for (&n, &d) in table.n_risk.iter().zip(&table.n_event) {
        h += d / n;
        v += d / (n * n);
        cumhaz.push(h);
        variance.push(v);
    }
    Ok(NelsonAalen { table, cumhaz, variance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ds(rows: &[(f64, u8)]) -> Dataset {
        Dataset::new(
            rows.iter().enumerate().map(|(i, &(t, s))| SurvivalSample::new(i.to_string(), t, s, 0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn product_limit_by_hand() {
        let km = kaplan_meier(&ds(&[(1.0, 1), (2.0, 1), (3.0, 1)]), None).unwrap();
        let c = km.curve();
        assert_abs_diff_eq!(c.eval(1.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.eval(2.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(c.eval(3.0).unwrap(), 0.0);
        assert_eq!(c.eval(0.5).unwrap(), 1.0);
        // Greenwood at t=1: (2/3)^2 * 1/(3*2)
        assert_abs_diff_eq!(km.greenwood_var[0], 4.0 / 9.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn all_censored_is_flat() {
        let km = kaplan_meier(&ds(&[(1.0, 0), (2.0, 0)]), None).unwrap();
        assert!(km.survival.is_empty());
        assert_eq!(km.curve().eval(2.0).unwrap(), 1.0);
        assert_eq!(km.variance_curve().eval(1.5).unwrap(), 0.0);
    }

    #[test]
    fn empty_selection_errors() {
        assert!(matches!(kaplan_meier(&ds(&[(1.0, 1)]), Some(1)), Err(Error::EmptySelection(_))));
    }

    #[test]
    fn ties_and_censoring() {
        // n=5: events at 1 (x2), censor at 2, event at 3, censor at 4
        let km = kaplan_meier(&ds(&[(1.0, 1), (1.0, 1), (2.0, 0), (3.0, 1), (4.0, 0)]), None).unwrap();
        assert_eq!(km.table.n_risk, vec![5.0, 2.0]);
        assert_abs_diff_eq!(km.survival[1], 0.6 * 0.5, epsilon = 1e-15);
        let na = nelson_aalen(&ds(&[(1.0, 1), (1.0, 1), (2.0, 0), (3.0, 1), (4.0, 0)]), None).unwrap();
        assert_abs_diff_eq!(na.cumhaz[1], 0.4 + 0.5, epsilon = 1e-15);
    }

    #[test]
    fn no_censoring_matches_empirical_survival() {
        let times = [0.3, 1.1, 1.1, 2.5, 4.0, 4.2, 7.5];
        let km = kaplan_meier(&ds(&times.iter().map(|&t| (t, 1)).collect::<Vec<_>>()), None).unwrap();
        let c = km.curve();
        for &t in &[0.0, 0.3, 1.0, 1.1, 3.0, 4.2, 7.0, 7.5] {
            let emp = times.iter().filter(|&&x| x > t).count() as f64 / times.len() as f64;
            assert_abs_diff_eq!(c.eval(t).unwrap(), emp, epsilon = 1e-12);
        }
    }
}
