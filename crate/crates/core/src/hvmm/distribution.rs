use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 0.9;

/// Running exponential-moving-average mean and variance of the scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionState {
    pub mean: f64,
    pub variance: f64,
    pub momentum: f64,
    pub observations: u64,
}

impl DistributionState {
    /// Starts at mean 0, variance 0.
    pub fn new(momentum: f64) -> Result<Self> {
        if !(momentum > 0.0 && momentum < 1.0) {
            return Err(Error::Config(format!(
                "gamma must lie strictly between 0 and 1, got {momentum}"
            )));
        }
        Ok(Self {
            mean: 0.0,
            variance: 0.0,
            momentum,
            observations: 0,
        })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Folds one score in. The mean is updated first and the variance is
    /// taken against the new mean.
    pub fn update(&mut self, score: f64) -> Result<()> {
        if !score.is_finite() || score < 0.0 {
            return Err(Error::Argument(format!(
                "score must be finite and non-negative, got {score}"
            )));
        }
        let g = self.momentum;
        self.mean = g * self.mean + (1.0 - g) * score;
        let dev = score - self.mean;
        self.variance = (g * self.variance + (1.0 - g) * dev * dev).max(0.0);
        self.observations += 1;
        Ok(())
    }
}

/// Functional form of [`DistributionState::update`].
pub fn update_distribution(dist: DistributionState, score: f64) -> Result<DistributionState> {
    let mut next = dist;
    next.update(score)?;
    Ok(next)
}
