//! Run configuration and its `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! capacity = 20
//! lambda = 0.2
//! query_frames = 40, 99
//! ```

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hvmm::{EngineConfig, TokenCost, DEFAULT_CAPACITY, DEFAULT_GAMMA, DEFAULT_K1, DEFAULT_K2};
use crate::scorer::DEFAULT_LAMBDA;

/// Side length, in pixels, that Blurred frames are downsampled to.
pub const DEFAULT_TRANSITION_SIZE: u32 = 224;
pub const DEFAULT_COST_HIGH: f64 = 1.0;
/// Low-resolution cost used when no high-resolution side is configured.
pub const DEFAULT_COST_LOW: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub capacity: usize,
    pub lambda: f64,
    pub k1: f64,
    pub k2: f64,
    pub gamma: f64,
    pub transition_size: u32,
    /// Nominal side of a high-resolution frame. When set, the low cost
    /// defaults to `(transition_size / high_res_side)^2`.
    pub high_res_side: Option<u32>,
    pub cost_high: f64,
    /// Explicit low-resolution cost; overrides the derived value.
    pub cost_low: Option<f64>,
    pub query_frames: BTreeSet<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            capacity: DEFAULT_CAPACITY,
            lambda: DEFAULT_LAMBDA,
            k1: DEFAULT_K1,
            k2: DEFAULT_K2,
            gamma: DEFAULT_GAMMA,
            transition_size: DEFAULT_TRANSITION_SIZE,
            high_res_side: None,
            cost_high: DEFAULT_COST_HIGH,
            cost_low: None,
            query_frames: BTreeSet::new(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "capacity",
    "lambda",
    "k1",
    "k2",
    "gamma",
    "transition_size",
    "high_res_side",
    "cost_high",
    "cost_low",
    "query_frames",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

impl RunConfig {
    pub fn effective_cost_low(&self) -> f64 {
        match (self.cost_low, self.high_res_side) {
            (Some(c), _) => c,
            (None, Some(side)) => {
                let r = self.transition_size as f64 / side as f64;
                r * r
            }
            (None, None) => DEFAULT_COST_LOW,
        }
    }

    pub fn engine_config(&self) -> Result<EngineConfig> {
        let cfg = EngineConfig {
            lambda: self.lambda,
            gamma: self.gamma,
            k1: self.k1,
            k2: self.k2,
            capacity: self.capacity,
            cost: TokenCost {
                high: self.cost_high,
                low: self.effective_cost_low(),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.high_res_side == Some(0) {
            return Err(Error::Config("high_res_side must be positive".into()));
        }
        self.engine_config().map(drop)
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "capacity" => self.capacity = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "k1" => self.k1 = parse(key, value)?,
            "k2" => self.k2 = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "transition_size" => self.transition_size = parse(key, value)?,
            "high_res_side" => {
                self.high_res_side = match value {
                    "" | "none" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "cost_high" => self.cost_high = parse(key, value)?,
            "cost_low" => {
                self.cost_low = match value {
                    "" | "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "query_frames" => {
                self.query_frames = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.merge_text(&text)
    }
}

/// Renders in the same `key = value` format [`RunConfig::merge_text`] reads.
impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        writeln!(out, "capacity = {}", self.capacity)?;
        writeln!(out, "lambda = {:?}", self.lambda)?;
        writeln!(out, "k1 = {:?}", self.k1)?;
        writeln!(out, "k2 = {:?}", self.k2)?;
        writeln!(out, "gamma = {:?}", self.gamma)?;
        writeln!(out, "transition_size = {}", self.transition_size)?;
        match self.high_res_side {
            Some(s) => writeln!(out, "high_res_side = {s}")?,
            None => writeln!(out, "high_res_side = none")?,
        }
        writeln!(out, "cost_high = {:?}", self.cost_high)?;
        writeln!(out, "cost_low = {:?}", self.effective_cost_low())?;
        let q: Vec<String> = self.query_frames.iter().map(u64::to_string).collect();
        writeln!(out, "query_frames = {}", q.join(","))?;
        f.write_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_print() {
        let text = RunConfig::default().to_string();
        for line in [
            "capacity = 20",
            "lambda = 0.2",
            "k1 = 0.0",
            "k2 = 1.0",
            "transition_size = 224",
            "gamma = 0.9",
            "cost_low = 0.25",
        ] {
            assert!(text.lines().any(|l| l == line), "missing {line} in\n{text}");
        }
    }

    #[test]
    fn printed_config_reparses() {
        let mut cfg = RunConfig::default();
        cfg.merge_text("lambda = 0.4\nquery_frames = 3, 9\nhigh_res_side = 448 # comment\n")
            .unwrap();
        let mut back = RunConfig::default();
        back.merge_text(&cfg.to_string()).unwrap();
        assert_eq!(back.lambda, 0.4);
        assert_eq!(back.query_frames, BTreeSet::from([3, 9]));
        assert_eq!(back.effective_cost_low(), 0.25);
        assert_eq!(back.engine_config().unwrap(), cfg.engine_config().unwrap());
    }

    #[test]
    fn cost_low_derivation() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.effective_cost_low(), 0.25);
        cfg.high_res_side = Some(896);
        assert_eq!(cfg.effective_cost_low(), 0.0625);
        cfg.cost_low = Some(0.5);
        assert_eq!(cfg.effective_cost_low(), 0.5);
    }

    #[test]
    fn errors() {
        let mut cfg = RunConfig::default();
        assert!(cfg.merge_text("nonsense").unwrap_err().is_config());
        assert!(cfg.merge_text("colour = red").unwrap_err().is_config());
        assert!(cfg.merge_text("capacity = -3").unwrap_err().is_config());
        cfg.merge_text("k1 = 1.0\nk2 = 0.5").unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("k1 must be less than k2"));
    }
}
