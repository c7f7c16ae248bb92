//! Urgency-scaled valuation of spectrum access.
//!
//! A UE's per-channel valuation is `alpha * rate_mbps`. `alpha` starts at a
//! baseline and rises by a fixed step for every consecutive round in which the
//! UE obtained no channel, saturating at a ceiling after `saturation` failures.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UrgencyError {
    #[error("baseline alpha must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("alpha ceiling {ceiling} is below the baseline {baseline}")]
    CeilingBelowBaseline { baseline: f64, ceiling: f64 },
    #[error("saturation count must be at least 1")]
    ZeroSaturation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrgencyParams {
    pub alpha0: f64,
    pub alpha_bar: f64,
    pub saturation: u32,
}

impl Default for UrgencyParams {
    fn default() -> Self {
        UrgencyParams {
            alpha0: 0.5,
            alpha_bar: 1.0,
            saturation: 5,
        }
    }
}

impl UrgencyParams {
    pub fn new(alpha0: f64, alpha_bar: f64, saturation: u32) -> Result<Self, UrgencyError> {
        let params = UrgencyParams {
            alpha0,
            alpha_bar,
            saturation,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), UrgencyError> {
        if !(self.alpha0 > 0.0) {
            return Err(UrgencyError::NonPositiveBaseline(self.alpha0));
        }
        if !(self.alpha_bar >= self.alpha0) {
            return Err(UrgencyError::CeilingBelowBaseline {
                baseline: self.alpha0,
                ceiling: self.alpha_bar,
            });
        }
        if self.saturation == 0 {
            return Err(UrgencyError::ZeroSaturation);
        }
        Ok(())
    }

    /// Increment applied per consecutive failure.
    pub fn epsilon(&self) -> f64 {
        (self.alpha_bar - self.alpha0) / self.saturation as f64
    }
}

/// What happened to a UE in one round, as far as urgency is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundResult {
    /// At least one channel was allocated.
    Won,
    Lost,
    Abstained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrgencyState {
    pub params: UrgencyParams,
    /// Consecutive rounds without a channel.
    pub failures: u32,
}

impl UrgencyState {
    pub fn new(params: UrgencyParams) -> Self {
        UrgencyState {
            params,
            failures: 0,
        }
    }

    pub fn alpha(&self) -> f64 {
        let p = &self.params;
        if self.failures >= p.saturation {
            return p.alpha_bar;
        }
        (p.alpha0 + p.epsilon() * self.failures as f64).min(p.alpha_bar)
    }

    /// Per-channel valuation for a channel delivering `rate_mbps`.
    pub fn valuation(&self, rate_mbps: f64) -> f64 {
        self.alpha() * rate_mbps
    }

    pub fn is_saturated(&self) -> bool {
        self.failures >= self.params.saturation
    }

    /// Any positive allocation resets the streak; losing or sitting out extends it.
    pub fn record_outcome(self, result: RoundResult) -> Self {
        let failures = match result {
            RoundResult::Won => 0,
            RoundResult::Lost | RoundResult::Abstained => self.failures.saturating_add(1),
        };
        UrgencyState { failures, ..self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(alpha0: f64, alpha_bar: f64, sat: u32, h: u32) -> UrgencyState {
        UrgencyState {
            params: UrgencyParams::new(alpha0, alpha_bar, sat).unwrap(),
            failures: h,
        }
    }

    #[test]
    fn alpha_examples() {
        let s = state(1.0, 2.0, 5, 3);
        assert!((s.params.epsilon() - 0.2).abs() < 1e-15);
        assert!((s.alpha() - 1.6).abs() < 1e-12);
        assert_eq!(state(1.0, 2.0, 5, 0).alpha(), 1.0);
        assert_eq!(state(1.0, 2.0, 5, 10).alpha(), 2.0);
    }

    #[test]
    fn valuation_examples() {
        let s = state(1.0, 2.0, 5, 3);
        assert!((s.valuation(2.0) - 3.2).abs() < 1e-12);
        assert_eq!(s.valuation(0.0), 0.0);
        assert_eq!(state(0.5, 1.0, 5, 5).valuation(4.0), 4.0);
    }

    #[test]
    fn outcome_examples() {
        let s = state(0.5, 1.0, 5, 4);
        assert_eq!(s.record_outcome(RoundResult::Won).failures, 0);
        assert_eq!(s.record_outcome(RoundResult::Lost).failures, 5);
        assert_eq!(
            state(0.5, 1.0, 5, 0)
                .record_outcome(RoundResult::Abstained)
                .failures,
            1
        );
    }

    #[test]
    fn win_then_loss_is_one_step_above_baseline() {
        let p = UrgencyParams::new(0.5, 1.0, 5).unwrap();
        let s = UrgencyState {
            params: p,
            failures: 7,
        }
        .record_outcome(RoundResult::Won)
        .record_outcome(RoundResult::Lost);
        assert!((s.alpha() - (p.alpha0 + p.epsilon())).abs() < 1e-15);
    }

    #[test]
    fn invalid_params() {
        assert!(UrgencyParams::new(0.0, 1.0, 5).is_err());
        assert!(UrgencyParams::new(1.0, 0.5, 5).is_err());
        assert!(UrgencyParams::new(0.5, 1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn alpha_bounded_and_monotone(a0 in 0.01f64..5.0, spread in 0.0f64..5.0, sat in 1u32..20, h in 0u32..100) {
            let s = state(a0, a0 + spread, sat, h);
            let next = s.record_outcome(RoundResult::Lost);
            prop_assert!(s.alpha() >= a0 && s.alpha() <= a0 + spread);
            prop_assert!(next.alpha() >= s.alpha());
            if h >= sat {
                prop_assert_eq!(s.alpha(), a0 + spread);
            }
        }

        #[test]
        fn valuation_is_linear(a0 in 0.01f64..5.0, spread in 0.0f64..5.0, h in 0u32..10, r in 0.0f64..100.0) {
            let s = state(a0, a0 + spread, 5, h);
            prop_assert_eq!(s.valuation(2.0 * r), 2.0 * s.valuation(r));
        }
    }
}
