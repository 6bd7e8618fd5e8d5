use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `φ(u) − s` for the numeric inverse.
pub const ROOT_TOL: f64 = 1e-12;
pub const ROOT_MAX_ITER: usize = 200;

/// Distribution of a multiplicative frailty `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FrailtySpec {
    /// Mean 1, variance `theta`; `theta = 0` is the degenerate `Z ≡ 1`.
    Gamma { theta: f64 },
    /// Finite mixture of `(z, p)` atoms.
    Discrete { atoms: Vec<(f64, f64)> },
}

impl FrailtySpec {
    pub fn gamma(theta: f64) -> Result<Self> {
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(Error::Domain(format!("gamma frailty variance must be >= 0, got {theta}")));
        }
        Ok(FrailtySpec::Gamma { theta })
    }

    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Domain("discrete frailty needs at least one atom".into()));
        }
        if atoms.iter().any(|&(z, p)| !(z > 0.0) || !(p > 0.0)) {
            return Err(Error::Domain("discrete frailty atoms need z > 0 and p > 0".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("discrete frailty probabilities sum to {total}, not 1")));
        }
        Ok(FrailtySpec::Discrete { atoms })
    }

    /// Binary frailty with `P(Z=0.2)=0.2`, `P(Z=1.2)=0.8`.
    pub fn low_high_risk() -> Self {
        FrailtySpec::Discrete { atoms: vec![(0.2, 0.2), (1.2, 0.8)] }
    }

    pub fn mean(&self) -> f64 {
        match self {
            FrailtySpec::Gamma { .. } => 1.0,
            FrailtySpec::Discrete { atoms } => atoms.iter().map(|(z, p)| z * p).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            FrailtySpec::Gamma { theta } => *theta,
            FrailtySpec::Discrete { atoms } => {
                let m = self.mean();
                atoms.iter().map(|(z, p)| p * (z - m).powi(2)).sum()
            }
        }
    }

    /// `log φ(u)`, evaluated without underflow for large `u`.
    pub fn log_laplace(&self, u: f64) -> f64 {
        match self {
            FrailtySpec::Gamma { theta } => {
                if *theta == 0.0 {
                    -u
                } else {
                    -(theta * u).ln_1p() / theta
                }
            }
            FrailtySpec::Discrete { atoms } => {
                let zmin = atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
                let rest: f64 = atoms.iter().map(|&(z, p)| p * (-(z - zmin) * u).exp()).sum();
                -zmin * u + rest.ln()
            }
        }
    }

    /// `φ(u) = E e^{−Zu}`.
    pub fn laplace(&self, u: f64) -> f64 {
        self.log_laplace(u).exp()
    }

    /// `(d/du) log φ(u)`; always negative.
    pub fn dlog_laplace(&self, u: f64) -> f64 {
        -self.posterior_mean(u)
    }

    /// `E(Z e^{−Zu}) / E(e^{−Zu})`: mean frailty among those surviving
    /// conditional cumulative hazard `u`.
    pub fn posterior_mean(&self, u: f64) -> f64 {
        match self {
            FrailtySpec::Gamma { theta } => 1.0 / (1.0 + theta * u),
            FrailtySpec::Discrete { atoms } => {
                let zmin = atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
                let (num, den) = atoms.iter().fold((0.0, 0.0), |(n, d), &(z, p)| {
                    let w = p * (-(z - zmin) * u).exp();
                    (n + z * w, d + w)
                });
                num / den
            }
        }
    }

    /// `φ⁻¹(e^{−l})` for `l ≥ 0`: the conditional cumulative hazard matching
    /// marginal cumulative hazard `l`.
    pub fn inv_laplace_neglog(&self, l: f64) -> Result<f64> {
        if !(l >= 0.0) {
            return Err(Error::Domain(format!("marginal cumulative hazard must be >= 0, got {l}")));
        }
        if l == 0.0 {
            return Ok(0.0);
        }
        match self {
            FrailtySpec::Gamma { theta } => Ok(if *theta == 0.0 { l } else { (theta * l).exp_m1() / theta }),
            FrailtySpec::Discrete { .. } => self.solve_log(-l),
        }
    }

    /// Unique `u ≥ 0` with `φ(u) = s`.
    pub fn inv_laplace(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Domain(format!("inverse Laplace transform needs s in (0,1], got {s}")));
        }
        self.inv_laplace_neglog(-s.ln())
    }

    /// Bracketed Newton on `log φ(u) = target` (`target < 0`). Stops when
    /// `|φ(u) − e^{target}| < ROOT_TOL` and the log residual is at rounding level.
    fn solve_log(&self, target: f64) -> Result<f64> {
        let s = target.exp();
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut grow = 0;
        while self.log_laplace(hi) > target {
            lo = hi;
            hi *= 2.0;
            grow += 1;
            if grow > 1100 {
                return Err(Error::Domain(format!("cannot bracket inverse Laplace root for log s = {target}")));
            }
        }
        let mut u = 0.5 * (lo + hi);
        for _ in 0..ROOT_MAX_ITER {
            let f = self.log_laplace(u) - target;
            if f > 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let resid = (self.laplace(u) - s).abs();
            if resid < ROOT_TOL && f.abs() <= 1e-14 * target.abs().max(1.0) {
                return Ok(u);
            }
            let newton = u - f / self.dlog_laplace(u);
            u = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= f64::EPSILON * hi {
                return Ok(u);
            }
        }
        if (self.laplace(u) - s).abs() < ROOT_TOL {
            Ok(u)
        } else {
            Err(Error::Domain(format!("inverse Laplace root-finding did not converge for s = {s}")))
        }
    }

    /// `|D log φ|(φ⁻¹(u))` for `u ∈ (0, 1]`; increasing in `u`.
    pub fn g_abs(&self, u: f64) -> Result<f64> {
        Ok(self.posterior_mean(self.inv_laplace(u)?))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FrailtySpec::Gamma { theta } => {
                if *theta == 0.0 {
                    1.0
                } else {
                    Gamma::new(1.0 / theta, *theta).expect("valid gamma parameters").sample(rng)
                }
            }
            FrailtySpec::Discrete { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(z, p) in atoms {
                    acc += p;
                    if u < acc {
                        return z;
                    }
                }
                atoms[atoms.len() - 1].0
            }
        }
    }
}
