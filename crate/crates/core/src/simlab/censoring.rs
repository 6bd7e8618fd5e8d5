use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Latent, PotentialOutcomePair, SurvivalSample};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::seed::SeedSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CensoringScheme {
    None,
    /// `Uniform(0, u_max)` censoring for a random `random_fraction` of units,
    /// administrative censoring at `admin_time` for the rest.
    PaperScheme { u_max: f64, admin_time: f64, random_fraction: f64 },
    Uniform { u_max: f64 },
    Admin { time: f64 },
}

impl CensoringScheme {
    pub fn paper() -> Self {
        CensoringScheme::PaperScheme { u_max: 10.0, admin_time: 8.0, random_fraction: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            CensoringScheme::None => true,
            CensoringScheme::PaperScheme { u_max, admin_time, random_fraction } => {
                u_max > 0.0 && admin_time >= 0.0 && (0.0..=1.0).contains(&random_fraction)
            }
            CensoringScheme::Uniform { u_max } => u_max > 0.0,
            CensoringScheme::Admin { time } => time >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid censoring parameters {self:?}")))
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            CensoringScheme::None => f64::INFINITY,
            CensoringScheme::PaperScheme { u_max, admin_time, random_fraction } => {
                let uniform = rng.random_bool(random_fraction);
                let u = rng.random::<f64>() * u_max;
                if uniform {
                    u
                } else {
                    admin_time
                }
            }
            CensoringScheme::Uniform { u_max } => rng.random::<f64>() * u_max,
            CensoringScheme::Admin { time } => time,
        }
    }
}

/// Observed data `min(T, C)` from true times, with latent columns kept.
/// Censoring draws come from their own stream, so the event times of a
/// dataset do not depend on the scheme.
pub fn apply_censoring(truth: &[PotentialOutcomePair], scheme: CensoringScheme, seed: SeedSpec) -> Result<Dataset> {
    scheme.validate()?;
    let rows = Exec::default().blocks(truth.len(), |b, range| {
        let mut rng = seed.block(b).rng();
        range
            .map(|i| {
                let p = &truth[i];
                let c = scheme.draw(&mut rng);
                let (time, status) = if p.t_obs <= c { (p.t_obs, 1) } else { (c, 0) };
                if !time.is_finite() {
                    return Err(Error::Domain(format!("unit {} never fails and is never censored", i + 1)));
                }
                Ok(SurvivalSample::new((i + 1).to_string(), time, status, p.a))
            })
            .collect::<Vec<_>>()
    });
    let samples = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let latent = truth.iter().map(|p| Latent { z: p.z, t0: p.t0, t1: p.t1 }).collect();
    Ok(Dataset::new(samples)?.with_latent(latent))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(n: usize) -> Vec<PotentialOutcomePair> {
        (0..n).map(|i| PotentialOutcomePair::new(1.0 + i as f64 * 0.01, 2.0, 1.0, (i % 2) as u8)).collect()
    }

    #[test]
    fn none_keeps_all_events() {
        let d = apply_censoring(&truth(50), CensoringScheme::None, SeedSpec::new(1, 0)).unwrap();
        assert!(d.samples.iter().all(|s| s.status == 1));
        assert_eq!(d.censoring_fraction(), 0.0);
    }

    #[test]
    fn admin_zero_censors_everything() {
        let d = apply_censoring(&truth(50), CensoringScheme::Admin { time: 0.0 }, SeedSpec::new(1, 0)).unwrap();
        assert!(d.samples.iter().all(|s| s.status == 0 && s.time == 0.0));
    }

    #[test]
    fn mixed_uniform_admin_bounds() {
        let t: Vec<_> = (0..10_000).map(|_| PotentialOutcomePair::new(100.0, 100.0, 1.0, 0)).collect();
        let d = apply_censoring(&t, CensoringScheme::paper(), SeedSpec::new(4, 0)).unwrap();
        let admin = d.samples.iter().filter(|s| s.time == 8.0).count() as f64 / 1e4;
        assert!((admin - 0.5).abs() < 0.03);
        assert!(d.samples.iter().all(|s| s.status == 0 && s.time <= 10.0));
        assert!(CensoringScheme::Uniform { u_max: 0.0 }.validate().is_err());
    }
}
