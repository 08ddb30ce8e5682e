//! Per-slot gain: rate improvements over the running average plus fairness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rate::RatePair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("fairness is undefined for an empty network")]
    EmptyNetwork,
    #[error("invalid gain weights: {0}")]
    InvalidWeights(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainWeights {
    /// Weight of the fusion-rate improvement.
    pub gamma1: f64,
    /// Weight of the primary-rate improvement.
    pub gamma2: f64,
    /// Weight of the Jain fairness index.
    pub gamma3: f64,
}

impl Default for GainWeights {
    fn default() -> Self {
        Self {
            gamma1: 2.0,
            gamma2: 2.0,
            gamma3: 0.4,
        }
    }
}

impl GainWeights {
    pub fn validate(&self) -> Result<(), RewardError> {
        let all = [self.gamma1, self.gamma2, self.gamma3];
        if all.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(RewardError::InvalidWeights(format!(
                "{all:?} must be finite and >= 0"
            )));
        }
        if all.iter().all(|g| *g == 0.0) {
            return Err(RewardError::InvalidWeights(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Running means of every rate observed so far (no window).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RateHistory {
    pub sf_mean: f64,
    pub pu_mean: f64,
    pub count: u64,
}

/// Jain index over the two group sizes: `(n_f + n_p)^2 / (2 (n_f^2 + n_p^2))`.
///
/// Ranges from 0.5 (everyone in one group) to 1 (equal split).
pub fn jain_fairness(n_fusion: usize, n_primary: usize) -> Result<f64, RewardError> {
    if n_fusion + n_primary == 0 {
        return Err(RewardError::EmptyNetwork);
    }
    let (f, p) = (n_fusion as f64, n_primary as f64);
    Ok(0.5 * ((f + p) * (f + p)) / (f * f + p * p))
}

/// Gain of the current slot against the history of *previous* slots.
pub fn gain(
    rates: &RatePair,
    history: &RateHistory,
    counts: (usize, usize),
    weights: &GainWeights,
) -> Result<f64, RewardError> {
    let fairness = jain_fairness(counts.0, counts.1)?;
    Ok(weights.gamma1 * (rates.r_sf - history.sf_mean)
        + weights.gamma2 * (rates.r_pu - history.pu_mean)
        + weights.gamma3 * fairness)
}

/// Fold one more observation into the running means.
pub fn update_history(history: &RateHistory, rates: &RatePair) -> RateHistory {
    let count = history.count + 1;
    let n = count as f64;
    RateHistory {
        sf_mean: history.sf_mean + (rates.r_sf - history.sf_mean) / n,
        pu_mean: history.pu_mean + (rates.r_pu - history.pu_mean) / n,
        count,
    }
}
