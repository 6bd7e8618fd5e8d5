//! Coupled potential-outcome generators `(T⁰, T¹)` sharing latent frailty.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::PotentialOutcomePair;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::frailty::FrailtySpec;
use crate::seed::SeedSpec;
use crate::step::{CumHaz, StepFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingSpec {
    /// `T⁰ = log(θV₀/Z + 1)/θ`, `T¹ = log(θV₁/Z + 1)/(θe^β)` with `Z ~ Gamma(1, θ)`.
    GammaShared { beta: f64, theta: f64 },
    /// Two nested gamma frailties; `Z₁` has mean and variance 1 and `Z₂` mean 1,
    /// variance `z2_var` (1 in the reference construction, 0 collapses `Z₂`).
    TwoLevel { beta: f64, lambda0: CumHaz, z2_var: f64 },
    /// `T⁰ = V₀ + Z`, `T¹ = e^{−β}(V₁ + Z)`; `Z` has mean `1 − α`, the `V`s mean `α`, all variance 1.
    SharedAdditive { alpha: f64, beta: f64 },
    /// Hazard `a·ψ(t) + z·ω₀(t)` with both pieces piecewise constant.
    AdditiveHazard { psi: StepFunction, omega0: StepFunction, frailty: FrailtySpec },
}

impl CouplingSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        match self {
            CouplingSpec::GammaShared { beta, theta } => {
                if !beta.is_finite() || !(*theta >= 0.0) {
                    return bad(format!("gamma coupling needs finite beta and theta >= 0 (got {beta}, {theta})"));
                }
            }
            CouplingSpec::TwoLevel { beta, z2_var, .. } => {
                if !beta.is_finite() || !(*z2_var >= 0.0) {
                    return bad(format!("two-level coupling needs finite beta and z2_var >= 0 (got {beta}, {z2_var})"));
                }
            }
            CouplingSpec::SharedAdditive { alpha, beta } => {
                if !(*alpha > 0.0 && *alpha < 1.0) || !beta.is_finite() {
                    return bad(format!("shared-additive coupling needs alpha in (0,1) (got {alpha})"));
                }
            }
            CouplingSpec::AdditiveHazard { .. } => {}
        }
        Ok(())
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Result<PotentialOutcomePair> {
        let a = rng.random_bool(0.5) as u8;
        let v0: f64 = rng.sample(Exp1);
        let v1: f64 = rng.sample(Exp1);
        Ok(match self {
            CouplingSpec::GammaShared { beta, theta } => {
                let z = FrailtySpec::Gamma { theta: *theta }.sample(rng);
                let base = |v: f64| if *theta == 0.0 { v / z } else { (theta * v / z).ln_1p() / theta };
                let t0 = base(v0);
                let t1 = if *theta == 0.0 { base(v1) / beta.exp() } else { (theta * v1 / z).ln_1p() / (theta * beta.exp()) };
                PotentialOutcomePair::new(t0, t1, z, a)
            }
            CouplingSpec::TwoLevel { beta, lambda0, z2_var } => {
                let z1 = FrailtySpec::Gamma { theta: 1.0 }.sample(rng);
                let z2 = FrailtySpec::Gamma { theta: *z2_var }.sample(rng);
                let time = |e: f64, arm: f64| -> Result<f64> {
                    let x = e / z2;
                    let h = if *z2_var == 0.0 { x } else { (z2_var * x).ln_1p() / z2_var };
                    let l = (h / z1).ln_1p();
                    lambda0.inverse(l * (-beta * arm).exp())
                };
                let mut p = PotentialOutcomePair::new(time(v0, 0.0)?, time(v1, 1.0)?, z1, a);
                p.z2 = Some(z2);
                p
            }
            CouplingSpec::SharedAdditive { alpha, beta } => {
                let z = Gamma::new((1.0 - alpha).powi(2), 1.0 / (1.0 - alpha)).expect("valid gamma").sample(rng);
                let v = Gamma::new(alpha * alpha, 1.0 / alpha).expect("valid gamma");
                let (w0, w1) = (v.sample(rng), v.sample(rng));
                PotentialOutcomePair::new(w0 + z, (-beta).exp() * (w1 + z), z, a)
            }
            CouplingSpec::AdditiveHazard { psi, omega0, frailty } => {
                let z = frailty.sample(rng);
                let t0 = additive_cumhaz(psi, omega0, z, 0.0)?.inverse(v0)?;
                let t1 = additive_cumhaz(psi, omega0, z, 1.0)?.inverse(v1)?;
                PotentialOutcomePair::new(t0, t1, z, a)
            }
        })
    }
}

/// Cumulative hazard for hazard `a·ψ(t) + z·ω₀(t)`; fails on a negative segment.
pub(crate) fn additive_cumhaz(psi: &StepFunction, omega0: &StepFunction, z: f64, a: f64) -> Result<CumHaz> {
    let mut jumps: Vec<f64> = psi.jump_times().iter().chain(omega0.jump_times()).copied().collect();
    jumps.sort_by(f64::total_cmp);
    jumps.dedup();
    let mut values = Vec::with_capacity(jumps.len() + 1);
    for s in std::iter::once(0.0).chain(jumps.iter().copied()) {
        let h = a * psi.value_at(s) + z * omega0.value_at(s);
        if h < 0.0 {
            return Err(Error::NegativeHazard { t: s, z, hazard: h });
        }
        values.push(h);
    }
    Ok(CumHaz::PiecewiseRate(StepFunction::new(jumps, values)?))
}

/// Draws `n` units with `A ~ Bernoulli(1/2)` and `T = T^A`.
pub fn gen_coupled(spec: &CouplingSpec, n: usize, seed: SeedSpec) -> Result<Vec<PotentialOutcomePair>> {
    gen_coupled_with(spec, n, seed, Exec::default())
}

pub fn gen_coupled_with(spec: &CouplingSpec, n: usize, seed: SeedSpec, exec: Exec) -> Result<Vec<PotentialOutcomePair>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    exec.blocks(n, |b, range| {
        let mut rng = seed.block(b).rng();
        range.map(|_| spec.draw(&mut rng)).collect::<Vec<_>>()
    })
    .into_iter()
    .collect()
}

/// Two-level gamma generator with `(Z₁, Z₂)` kept on each pair.
pub fn gen_two_level(beta: f64, lambda0: CumHaz, n: usize, seed: SeedSpec) -> Result<Vec<PotentialOutcomePair>> {
    gen_coupled(&CouplingSpec::TwoLevel { beta, lambda0, z2_var: 1.0 }, n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consistency_and_determinism() {
        let spec = CouplingSpec::GammaShared { beta: 0.5f64.ln(), theta: 0.5 };
        let a = gen_coupled_with(&spec, 9000, SeedSpec::new(11, 0), Exec::Sequential).unwrap();
        let b = gen_coupled_with(&spec, 9000, SeedSpec::new(11, 0), Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p.is_consistent() && p.t0 > 0.0 && p.t1 > 0.0));
    }

    #[test]
    fn two_level_keeps_both_frailties() {
        let pairs = gen_two_level(-0.5, CumHaz::Rate(1.0), 10, SeedSpec::new(1, 0)).unwrap();
        assert!(pairs.iter().all(|p| p.z2.is_some()));
    }

    #[test]
    fn negative_hazard_is_reported() {
        let spec = CouplingSpec::AdditiveHazard {
            psi: StepFunction::new(vec![1.0], vec![0.0, -2.0]).unwrap(),
            omega0: StepFunction::constant(1.0),
            frailty: FrailtySpec::discrete(vec![(0.5, 0.5), (1.5, 0.5)]).unwrap(),
        };
        match gen_coupled(&spec, 10, SeedSpec::new(1, 0)) {
            Err(Error::NegativeHazard { t, .. }) => assert_eq!(t, 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(gen_coupled(&CouplingSpec::SharedAdditive { alpha: 1.0, beta: 0.0 }, 5, SeedSpec::new(1, 0)).is_err());
        assert!(gen_coupled(&CouplingSpec::GammaShared { beta: 0.0, theta: -1.0 }, 5, SeedSpec::new(1, 0)).is_err());
        assert!(gen_coupled(&CouplingSpec::GammaShared { beta: 0.0, theta: 1.0 }, 0, SeedSpec::new(1, 0)).is_err());
    }
}
