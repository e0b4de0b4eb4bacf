use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::distribution::DistributionState;
use crate::error::{Error, Result};

pub const DEFAULT_K1: f64 = 0.0;
pub const DEFAULT_K2: f64 = 1.0;

/// Dual K-Sigma admission thresholds, `g = mean + k * sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub g1: f64,
    pub g2: f64,
    pub k1: f64,
    pub k2: f64,
}

pub fn check_multipliers(k1: f64, k2: f64) -> Result<()> {
    if !(k1.is_finite() && k2.is_finite()) {
        return Err(Error::Config(format!("k1 and k2 must be finite, got {k1}, {k2}")));
    }
    if k1 >= k2 {
        return Err(Error::Config(format!("k1 must be less than k2, got k1={k1} k2={k2}")));
    }
    Ok(())
}

pub fn thresholds_from(dist: &DistributionState, k1: f64, k2: f64) -> Result<Thresholds> {
    check_multipliers(k1, k2)?;
    let sigma = dist.std_dev();
    Ok(Thresholds {
        g1: dist.mean + k1 * sigma,
        g2: dist.mean + k2 * sigma,
        k1,
        k2,
    })
}

/// Ordered so that `Discard < Blurred < Clear`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RetentionState {
    Discard,
    Blurred,
    Clear,
}

impl RetentionState {
    pub fn as_str(self) -> &'static str {
        match self {
            RetentionState::Clear => "Clear",
            RetentionState::Blurred => "Blurred",
            RetentionState::Discard => "Discard",
        }
    }

    pub fn resolution(self) -> Resolution {
        match self {
            RetentionState::Clear => Resolution::High,
            RetentionState::Blurred => Resolution::Low,
            RetentionState::Discard => Resolution::None,
        }
    }

    /// The queue tier a retained frame goes into; `None` for discards.
    pub fn tier(self) -> Option<MemoryTier> {
        match self {
            RetentionState::Clear => Some(MemoryTier::Clear),
            RetentionState::Blurred => Some(MemoryTier::Blurred),
            RetentionState::Discard => None,
        }
    }
}

impl fmt::Display for RetentionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RetentionState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Clear" => Ok(RetentionState::Clear),
            "Blurred" => Ok(RetentionState::Blurred),
            "Discard" => Ok(RetentionState::Discard),
            other => Err(Error::Argument(format!("unknown retention state '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Resolution {
    High,
    Low,
    None,
}

/// A state that can live in the memory queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MemoryTier {
    Clear,
    Blurred,
}

impl From<MemoryTier> for RetentionState {
    fn from(t: MemoryTier) -> Self {
        match t {
            MemoryTier::Clear => RetentionState::Clear,
            MemoryTier::Blurred => RetentionState::Blurred,
        }
    }
}

/// Routes a score against the thresholds. A query frame is always Clear.
///
/// `score >= g2` is Clear, `g1 <= score < g2` is Blurred, anything lower is
/// Discard.
pub fn route(score: f64, th: &Thresholds, is_query_frame: bool) -> (RetentionState, Resolution) {
    let state = if is_query_frame || score >= th.g2 {
        RetentionState::Clear
    } else if score >= th.g1 {
        RetentionState::Blurred
    } else {
        RetentionState::Discard
    };
    (state, state.resolution())
}
