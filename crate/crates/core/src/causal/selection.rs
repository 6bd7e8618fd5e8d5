//! Selection of latent variables among survivors.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::curve::Table;
use crate::data::PotentialOutcomePair;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::seed::SeedSpec;
use crate::step::CumHaz;

/// Mean of a latent variable among units still at risk at `t`, with its SE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivorMean {
    pub t: f64,
    pub n: usize,
    pub mean: f64,
    pub se: f64,
}

/// `E(v | time > t)` over the given `(time, v)` observations.
pub fn survivor_mean<I: IntoIterator<Item = (f64, f64)>>(obs: I, t: f64) -> SurvivorMean {
    let (mut n, mut s, mut ss) = (0usize, 0.0, 0.0);
    for (time, v) in obs {
        if time > t {
            n += 1;
            s += v;
            ss += v * v;
        }
    }
    if n == 0 {
        return SurvivorMean { t, n, mean: f64::NAN, se: f64::NAN };
    }
    let mean = s / n as f64;
    let var = if n > 1 { (ss - n as f64 * mean * mean) / (n - 1) as f64 } else { f64::NAN };
    SurvivorMean { t, n, mean, se: (var.max(0.0) / n as f64).sqrt() }
}

/// Monte-Carlo `E(Z | T > t, A = a)` from potential-outcome pairs, using
/// the potential time of arm `a` for every unit.
pub fn frailty_survivor_mean(pairs: &[PotentialOutcomePair], arm: u8, t: f64) -> SurvivorMean {
    survivor_mean(pairs.iter().map(|p| (if arm == 1 { p.t1 } else { p.t0 }, p.z)), t)
}

/// Draws `(A, V, T)` from the Cox model `Λ₀(T) = e^{−Aβ} V`, `V ~ Exp(1)`.
pub fn cox_latent_sample(beta: f64, lambda0: &CumHaz, n: usize, seed: SeedSpec, exec: Exec) -> Result<Vec<(u8, f64, f64)>> {
    exec.blocks(n, |b, range| {
        let mut rng = seed.block(b).rng();
        range
            .map(|_| {
                let a = rng.random_bool(0.5) as u8;
                let v: f64 = rng.sample(Exp1);
                lambda0.inverse(v * (-beta * a as f64).exp()).map(|t| (a, v, t))
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .collect()
}

/// Empirical against analytic `E(V | T > t, A = a) = 1 + e^{aβ}Λ₀(t)`.
///
/// Columns `t,arm,empirical,se,analytic,n_at_risk`.
pub fn cox_selection_check(beta: f64, lambda0: &CumHaz, n: usize, seed: SeedSpec, tgrid: &[f64]) -> Result<Table> {
    if n < 1000 {
        return Err(Error::Domain(format!("cox_selection_check needs n >= 1000, got {n}")));
    }
    let draws = cox_latent_sample(beta, lambda0, n, seed, Exec::default())?;
    let mut table = Table::new("cox_selection", &["t", "arm", "empirical", "se", "analytic", "n_at_risk"]);
    for &t in tgrid {
        for arm in [0u8, 1] {
            let m = survivor_mean(draws.iter().filter(|d| d.0 == arm).map(|d| (d.2, d.1)), t);
            let analytic = 1.0 + (arm as f64 * beta).exp() * lambda0.eval(t);
            table.push(vec![t, arm as f64, m.mean, m.se, analytic, m.n as f64]);
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn survivor_mean_by_hand() {
        let m = survivor_mean([(1.0, 2.0), (3.0, 4.0), (5.0, 8.0)], 2.0);
        assert_eq!((m.n, m.mean), (2, 6.0));
        assert_abs_diff_eq!(m.se, (8.0f64 / 2.0).sqrt(), epsilon = 1e-12);
        assert!(survivor_mean([(1.0, 2.0)], 5.0).mean.is_nan());
    }

    #[test]
    fn analytic_column() {
        let beta = -(2f64.ln());
        let tab = cox_selection_check(beta, &CumHaz::Rate(0.4), 5000, SeedSpec::new(2, 0), &[0.0, 2.0]).unwrap();
        let analytic = tab.column("analytic").unwrap();
        assert_eq!(&analytic[..2], &[1.0, 1.0]);
        assert_abs_diff_eq!(analytic[3], 1.4, epsilon = 1e-14);
        assert_abs_diff_eq!(analytic[2], 1.8, epsilon = 1e-14);
        assert!(cox_selection_check(beta, &CumHaz::Rate(0.4), 10, SeedSpec::new(2, 0), &[1.0]).is_err());
    }
}
