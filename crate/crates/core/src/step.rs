//! Right-continuous step functions and cumulative hazards built from them.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Piecewise-constant, right-continuous function on `[0, ∞)`.
///
/// `values[0]` holds on `[0, jump_times[0])`, `values[k]` on
/// `[jump_times[k-1], jump_times[k])`, the last value beyond the last jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    jump_times: Vec<f64>,
    values: Vec<f64>,
    domain_end: Option<f64>,
}

impl StepFunction {
    pub fn new(jump_times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != jump_times.len() + 1 {
            return domain(format!(
                "step function needs {} values for {} jumps, got {}",
                jump_times.len() + 1,
                jump_times.len(),
                values.len()
            ));
        }
        if jump_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return domain("jump times must be finite and nonnegative");
        }
        if jump_times.windows(2).any(|w| w[1] <= w[0]) {
            return domain("jump times must be strictly increasing");
        }
        Ok(Self { jump_times, values, domain_end: None })
    }

    pub fn constant(value: f64) -> Self {
        Self { jump_times: Vec::new(), values: vec![value], domain_end: None }
    }

    /// Step function starting at `initial` that takes `level[k]` from `times[k]` on.
    pub fn from_levels(times: Vec<f64>, initial: f64, levels: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(levels.len() + 1);
        values.push(initial);
        values.extend_from_slice(levels);
        Self::new(times, values)
    }

    pub fn with_domain_end(mut self, end: f64) -> Self {
        self.domain_end = Some(end);
        self
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain_end(&self) -> Option<f64> {
        self.domain_end
    }

    /// Index of the interval containing `t` (0 = before the first jump).
    fn interval(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&j| j <= t)
    }

    fn check(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return domain(format!("evaluation time {t} is negative or NaN"));
        }
        if let Some(end) = self.domain_end {
            if t > end {
                return domain(format!("evaluation time {t} beyond domain end {end}"));
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.values[self.interval(t)])
    }

    /// Evaluation without the domain check, clamping negative times to 0.
    pub fn value_at(&self, t: f64) -> f64 {
        self.values[self.interval(t.max(0.0))]
    }

    /// Exact `∫₀ᵗ f(s) ds` as a sum of rectangles.
    pub fn integrate(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.integral_unchecked(t))
    }

    fn integral_unchecked(&self, t: f64) -> f64 {
        let mut area = 0.0;
        let mut left = 0.0;
        for (k, &j) in self.jump_times.iter().enumerate() {
            if j >= t {
                return area + self.values[k] * (t - left);
            }
            area += self.values[k] * (j - left);
            left = j;
        }
        area + self.values[self.values.len() - 1] * (t - left)
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Marker returned by inversions when the cumulative hazard never reaches the target.
pub const NEVER: f64 = f64::INFINITY;

/// A cumulative hazard `Λ(t)` with `Λ(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CumHaz {
    /// `Λ(t) = rate · t`.
    Rate(f64),
    /// Piecewise-constant hazard; `Λ` is its continuous, piecewise-linear integral.
    PiecewiseRate(StepFunction),
    /// `Λ` itself is a step function (Nelson–Aalen, Breslow).
    Step(StepFunction),
}

impl CumHaz {
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            CumHaz::Rate(r) => r * t,
            CumHaz::PiecewiseRate(h) => h.integral_unchecked(t),
            CumHaz::Step(s) => s.value_at(t),
        }
    }

    /// `Λ(t) − Λ(s)` for `s ≤ t`.
    pub fn between(&self, s: f64, t: f64) -> f64 {
        self.eval(t) - self.eval(s)
    }

    /// Hazard at `t` when it exists (zero between jumps of a step cumulative hazard).
    pub fn hazard(&self, t: f64) -> f64 {
        match self {
            CumHaz::Rate(r) => *r,
            CumHaz::PiecewiseRate(h) => h.value_at(t),
            CumHaz::Step(_) => 0.0,
        }
    }

    /// Largest time at which the function is defined, if bounded.
    pub fn support_end(&self) -> Option<f64> {
        match self {
            CumHaz::Rate(_) => None,
            CumHaz::PiecewiseRate(h) => h.domain_end(),
            CumHaz::Step(s) => s.domain_end().or_else(|| s.jump_times().last().copied()),
        }
    }

    /// `inf{t : Λ(t) ≥ u}`; [`NEVER`] if `Λ` stays below `u`.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return domain(format!("inverse cumulative hazard needs u > 0, got {u}"));
        }
        Ok(match self {
            CumHaz::Rate(r) => {
                if *r > 0.0 {
                    u / r
                } else {
                    NEVER
                }
            }
            CumHaz::PiecewiseRate(h) => {
                let mut acc = 0.0;
                let mut left = 0.0;
                let jumps = h.jump_times();
                let vals = h.values();
                for (k, &rate) in vals.iter().enumerate() {
                    let right = jumps.get(k).copied().unwrap_or(f64::INFINITY);
                    if rate > 0.0 {
                        let seg = rate * (right - left);
                        if acc + seg >= u {
                            return Ok(left + (u - acc) / rate);
                        }
                        acc += seg;
                    }
                    left = right;
                }
                NEVER
            }
            CumHaz::Step(s) => {
                if s.values()[0] >= u {
                    return Ok(0.0);
                }
                match s.values()[1..].iter().position(|&v| v >= u) {
                    Some(k) => s.jump_times()[k],
                    None => NEVER,
                }
            }
        })
    }
}

/// Free-function form of [`CumHaz::inverse`].
pub fn inverse_cumulative(cumhaz: &CumHaz, u: f64) -> Result<f64> {
    cumhaz.inverse(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_eval_and_integral() {
        let f = StepFunction::constant(0.4);
        assert_eq!(f.eval(3.0).unwrap(), 0.4);
        assert_abs_diff_eq!(f.integrate(4.0).unwrap(), 1.6, epsilon = 1e-15);
    }

    #[test]
    fn right_continuity() {
        let f = StepFunction::new(vec![1.0, 2.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.eval(1.0).unwrap(), 2.0);
        assert_eq!(f.eval(0.999).unwrap(), 1.0);
        assert_eq!(f.eval(2.0).unwrap(), 3.0);
        assert_abs_diff_eq!(f.integrate(2.5).unwrap(), 1.0 + 2.0 + 1.5, epsilon = 1e-15);
    }

    #[test]
    fn domain_errors() {
        let f = StepFunction::constant(1.0).with_domain_end(5.0);
        assert!(f.eval(5.0).is_ok());
        assert!(f.eval(5.1).is_err());
        assert!(f.eval(-0.1).is_err());
        assert!(StepFunction::new(vec![2.0, 1.0], vec![0.0; 3]).is_err());
        assert!(StepFunction::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn linear_inversion() {
        assert_abs_diff_eq!(CumHaz::Rate(0.4).inverse(0.8).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn exhausted_hazard_never_reaches() {
        let h = StepFunction::new(vec![1.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(CumHaz::PiecewiseRate(h).inverse(2.0).unwrap(), NEVER);
    }

    #[test]
    fn piecewise_inversion() {
        let h = StepFunction::new(vec![4.0], vec![0.4, 0.2]).unwrap();
        assert_abs_diff_eq!(CumHaz::PiecewiseRate(h).inverse(2.0).unwrap(), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn step_cumhaz_inversion() {
        let s = StepFunction::new(vec![1.0, 3.0], vec![0.0, 0.5, 1.2]).unwrap();
        let c = CumHaz::Step(s);
        assert_eq!(c.inverse(0.5).unwrap(), 1.0);
        assert_eq!(c.inverse(0.6).unwrap(), 3.0);
        assert_eq!(c.inverse(1.3).unwrap(), NEVER);
        assert!(c.inverse(0.0).is_err());
    }

    proptest! {
        #[test]
        fn inverse_round_trip(
            rates in proptest::collection::vec(0.0f64..2.0, 1..6),
            gaps in proptest::collection::vec(0.1f64..3.0, 5),
            t in 0.01f64..20.0,
        ) {
            let mut jumps = Vec::new();
            let mut acc = 0.0;
            for g in gaps.iter().take(rates.len() - 1) {
                acc += g;
                jumps.push(acc);
            }
            let h = StepFunction::new(jumps, rates.clone()).unwrap();
            let c = CumHaz::PiecewiseRate(h.clone());
            let u = c.eval(t);
            prop_assume!(u > 1e-9);
            let back = c.inverse(u).unwrap();
            prop_assert!(back <= t + 1e-9);
            if h.value_at(t) > 0.0 && h.value_at((t - 1e-9).max(0.0)) > 0.0 {
                prop_assert!((back - t).abs() < 1e-7);
            }
        }
    }
}
