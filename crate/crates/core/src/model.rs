//! System specification for the one-mode, one-dimensional hybrid systems:
//! affine drift `X(x) = -γ(x - c)`, constant diffusion `h`, a Dirac reset
//! kernel at `a`, and either a guard at `b` or a state-dependent jump rate.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{HybridError, Result};

/// How discrete jumps are triggered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpRegime {
    /// `ẋ = X(x)`, reset to `a` on reaching the guard `b`.
    DeterministicFlowGuardJump,
    /// `dx = X dt + h dW`, reset to `a` on reaching the guard `b`.
    SdeGuardJump,
    /// `dx = X dt + h dW`, reset to `a` at the epochs of a Poisson process with rate `λ(x)`.
    SdePoissonJump,
}

impl JumpRegime {
    pub fn has_guard(self) -> bool {
        !matches!(self, JumpRegime::SdePoissonJump)
    }
}

/// Jump intensity that ramps from 0 to `lambda_max` across `[anchor - threshold, anchor + threshold]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateFunction {
    pub lambda_max: f64,
    pub threshold: f64,
    pub anchor: f64,
}

impl RateFunction {
    pub fn new(lambda_max: f64, threshold: f64, anchor: f64) -> Result<Self> {
        let rate = Self {
            lambda_max,
            threshold,
            anchor,
        };
        rate.validate()?;
        Ok(rate)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_max >= 0.0 && self.lambda_max.is_finite()) {
            return Err(HybridError::InvalidSpec(format!(
                "lambda_max must be finite and >= 0, got {}",
                self.lambda_max
            )));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(HybridError::InvalidSpec(format!(
                "rate threshold must be > 0, got {}",
                self.threshold
            )));
        }
        if !self.anchor.is_finite() {
            return Err(HybridError::InvalidSpec("rate anchor must be finite".into()));
        }
        Ok(())
    }
}

/// Evaluates `λ(x)`. The sine ramp uses half-width equal to the threshold,
/// which is what makes the three branches meet continuously.
pub fn eval_rate(rate: &RateFunction, x: f64) -> f64 {
    let offset = x - rate.anchor;
    if offset < -rate.threshold {
        0.0
    } else if offset > rate.threshold {
        rate.lambda_max
    } else {
        0.5 * rate.lambda_max * (1.0 + (FRAC_PI_2 * offset / rate.threshold).sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridSystemSpec {
    /// γ in `X(x) = -γ(x - c)`.
    pub drift_gamma: f64,
    /// c in `X(x) = -γ(x - c)`.
    pub drift_center: f64,
    /// Constant noise amplitude `h`; the diffusion coefficient is `H = h²/2`.
    pub diffusion_h: f64,
    /// Guard location `b`, present iff the regime has a guard.
    #[serde(default)]
    pub guard: Option<f64>,
    /// Location `a` of the Dirac reset kernel.
    pub reset_target: f64,
    pub jump_regime: JumpRegime,
    /// Jump intensity, present iff the regime is Poisson-driven.
    #[serde(default)]
    pub rate: Option<RateFunction>,
}

impl HybridSystemSpec {
    pub fn deterministic_guard_jump(gamma: f64, center: f64, reset: f64, guard: f64) -> Result<Self> {
        let spec = Self {
            drift_gamma: gamma,
            drift_center: center,
            diffusion_h: 0.0,
            guard: Some(guard),
            reset_target: reset,
            jump_regime: JumpRegime::DeterministicFlowGuardJump,
            rate: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sde_guard_jump(gamma: f64, center: f64, h: f64, reset: f64, guard: f64) -> Result<Self> {
        let spec = Self {
            drift_gamma: gamma,
            drift_center: center,
            diffusion_h: h,
            guard: Some(guard),
            reset_target: reset,
            jump_regime: JumpRegime::SdeGuardJump,
            rate: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sde_poisson_jump(gamma: f64, center: f64, h: f64, reset: f64, rate: RateFunction) -> Result<Self> {
        let spec = Self {
            drift_gamma: gamma,
            drift_center: center,
            diffusion_h: h,
            guard: None,
            reset_target: reset,
            jump_regime: JumpRegime::SdePoissonJump,
            rate: Some(rate),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Noise amplitude giving the diffusion coefficient `H`.
    pub fn h_for_diffusion(diffusion: f64) -> f64 {
        (2.0 * diffusion).sqrt()
    }

    /// `H = h²/2`.
    pub fn diffusion_coefficient(&self) -> f64 {
        0.5 * self.diffusion_h * self.diffusion_h
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(HybridError::InvalidSpec(msg));
        for (name, value) in [
            ("drift_gamma", self.drift_gamma),
            ("drift_center", self.drift_center),
            ("diffusion_h", self.diffusion_h),
            ("reset_target", self.reset_target),
        ] {
            if !value.is_finite() {
                return invalid(format!("{name} must be finite"));
            }
        }
        if self.diffusion_h < 0.0 {
            return invalid(format!("diffusion_h must be >= 0, got {}", self.diffusion_h));
        }
        match self.jump_regime {
            JumpRegime::DeterministicFlowGuardJump if self.diffusion_h != 0.0 => {
                return invalid("a deterministic flow has diffusion_h = 0".into());
            }
            JumpRegime::SdePoissonJump if self.diffusion_h == 0.0 => {
                return invalid("the Poisson-jump regime needs diffusion_h > 0".into());
            }
            _ => {}
        }
        match (self.jump_regime.has_guard(), self.guard) {
            (true, None) => return invalid("guard regimes need a guard location".into()),
            (false, Some(_)) => return invalid("the Poisson-jump regime has no guard".into()),
            (true, Some(b)) => {
                if !b.is_finite() {
                    return invalid("guard must be finite".into());
                }
                if self.reset_target >= b {
                    return invalid(format!(
                        "reset target {} must lie below the guard {b}",
                        self.reset_target
                    ));
                }
                // The flow has to point into the guard for it to be reached.
                if eval_drift(self, b) <= 0.0 {
                    return invalid(format!(
                        "drift at the guard must be positive, got {}",
                        eval_drift(self, b)
                    ));
                }
            }
            (false, None) => {}
        }
        match (self.jump_regime, &self.rate) {
            (JumpRegime::SdePoissonJump, Some(rate)) => rate.validate()?,
            (JumpRegime::SdePoissonJump, None) => {
                return invalid("the Poisson-jump regime needs a rate function".into())
            }
            (_, Some(_)) => return invalid("guard regimes carry no rate function".into()),
            (_, None) => {}
        }
        Ok(())
    }

    /// Jump intensity at `x`; zero for guard regimes.
    pub fn rate_at(&self, x: f64) -> f64 {
        self.rate.as_ref().map_or(0.0, |rate| eval_rate(rate, x))
    }
}

pub fn eval_drift(spec: &HybridSystemSpec, x: f64) -> f64 {
    -spec.drift_gamma * (x - spec.drift_center)
}

/// Closed-form flow of `ẋ = -γ(x - c)` started at `x0`, valid while the
/// trajectory stays below the guard.
pub fn exact_flow_map(spec: &HybridSystemSpec, x0: f64, t: f64) -> Result<f64> {
    if spec.diffusion_h != 0.0 {
        return Err(HybridError::InvalidArgument(
            "the flow map exists only for a deterministic flow".into(),
        ));
    }
    if !(t >= 0.0) {
        return Err(HybridError::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    let c = spec.drift_center;
    if let Some(b) = spec.guard {
        if let Some(crossing_time) = guard_hitting_time(spec, x0, b) {
            if crossing_time < t {
                return Err(HybridError::GuardCrossed { x0, t, crossing_time });
            }
        }
    }
    if t == 0.0 {
        return Ok(x0);
    }
    Ok(c + (x0 - c) * (-spec.drift_gamma * t).exp())
}

/// First time `s >= 0` with `Φ_s(x0) >= b`, if the flow ever gets there.
fn guard_hitting_time(spec: &HybridSystemSpec, x0: f64, b: f64) -> Option<f64> {
    if x0 >= b {
        return Some(0.0);
    }
    let c = spec.drift_center;
    let gamma = spec.drift_gamma;
    // Monotone approach to c: the guard is reached iff it sits strictly between x0 and c.
    if gamma > 0.0 && c > b {
        Some(((x0 - c) / (b - c)).ln() / gamma)
    } else if gamma < 0.0 && x0 > c {
        // repelling fixed point, trajectories to the right escape upward
        Some(((b - c) / (x0 - c)).ln() / -gamma)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_flow() -> HybridSystemSpec {
        HybridSystemSpec::deterministic_guard_jump(1.0, 3.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn drift_values() {
        let spec = paper_flow();
        assert_eq!(eval_drift(&spec, 2.0), 1.0);
        assert_eq!(eval_drift(&spec, 3.0), 0.0);
        assert_eq!(eval_drift(&spec, 1.0), 2.0);
    }

    #[test]
    fn rate_values() {
        let rate = RateFunction::new(100.0, 0.25, 2.0).unwrap();
        assert_eq!(eval_rate(&rate, 2.0), 50.0);
        assert!(eval_rate(&rate, 1.75).abs() < 1e-12);
        assert_eq!(eval_rate(&rate, 3.0), 100.0);
        assert_eq!(eval_rate(&rate, 1.0), 0.0);
    }

    #[test]
    fn rate_is_continuous_at_the_ramp_ends() {
        let rate = RateFunction::new(100.0, 0.25, 2.0).unwrap();
        let delta = 1e-9;
        for edge in [1.75, 2.25] {
            let jump = (eval_rate(&rate, edge + delta) - eval_rate(&rate, edge - delta)).abs();
            assert!(jump <= 1e-6 * rate.lambda_max, "jump {jump} at {edge}");
        }
    }

    #[test]
    fn flow_map_examples() {
        let spec = paper_flow();
        assert_eq!(exact_flow_map(&spec, 0.37, 0.0).unwrap(), 0.37);
        let at_guard = 3.0 - 2.0 * (-(2.0f64.ln())).exp();
        assert!((at_guard - 2.0).abs() < 1e-15);
        let x = exact_flow_map(&spec, 1.0, 2.0f64.ln()).unwrap();
        assert!((x - 2.0).abs() < 1e-14);

        let unguarded = HybridSystemSpec { guard: None, ..spec };
        let far = exact_flow_map(&unguarded, 1.0, 60.0).unwrap();
        assert!((far - 3.0).abs() < 1e-12);
    }

    #[test]
    fn flow_map_rejects_guard_crossing() {
        let spec = paper_flow();
        let err = exact_flow_map(&spec, 1.0, 0.7).unwrap_err();
        match err {
            HybridError::GuardCrossed { crossing_time, .. } => {
                assert!((crossing_time - 2.0f64.ln()).abs() < 1e-14)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spec_invariants() {
        assert!(HybridSystemSpec::deterministic_guard_jump(1.0, 3.0, 2.5, 2.0).is_err());
        // drift pointing away from the guard
        assert!(HybridSystemSpec::deterministic_guard_jump(1.0, 1.5, 1.0, 2.0).is_err());
        let rate = RateFunction::new(100.0, 0.25, 2.0).unwrap();
        assert!(HybridSystemSpec::sde_poisson_jump(1.0, 3.0, 0.0, 1.0, rate).is_err());
        assert!(HybridSystemSpec::sde_poisson_jump(1.0, 3.0, 1.0, 1.0, rate).is_ok());
        assert!(RateFunction::new(100.0, 0.0, 2.0).is_err());
        // H = 0 is the degenerate member of the SDE guard family
        assert!(HybridSystemSpec::sde_guard_jump(1.0, 3.0, 0.0, 1.0, 2.0).is_ok());
    }

    #[test]
    fn diffusion_coefficient_roundtrip() {
        let h = HybridSystemSpec::h_for_diffusion(0.5);
        assert_eq!(h, 1.0);
        let spec = HybridSystemSpec::sde_guard_jump(1.0, 3.0, h, 1.0, 2.0).unwrap();
        assert_eq!(spec.diffusion_coefficient(), 0.5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn flow_map_is_a_semigroup(x in -2.0f64..1.9, t in 0.0f64..3.0, s in 0.0f64..3.0) {
                let spec = HybridSystemSpec { guard: None, ..paper_flow() };
                let composed = exact_flow_map(&spec, exact_flow_map(&spec, x, s).unwrap(), t).unwrap();
                let direct = exact_flow_map(&spec, x, t + s).unwrap();
                prop_assert!((composed - direct).abs() <= 1e-12);
            }

            #[test]
            fn drift_is_affine(x in -1e3f64..1e3, y in -1e3f64..1e3) {
                // dyadic inputs keep every intermediate exactly representable
                let x = (x * 64.0).round() / 64.0;
                let y = (y * 64.0).round() / 64.0;
                let spec = paper_flow();
                prop_assert_eq!(
                    eval_drift(&spec, x) + eval_drift(&spec, y),
                    2.0 * eval_drift(&spec, (x + y) / 2.0)
                );
            }
        }
    }
}
