use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::distribution::{DistributionState, DEFAULT_GAMMA};
use super::queue::{MemoryQueue, DEFAULT_CAPACITY};
use super::routing::{
    check_multipliers, route, thresholds_from, Resolution, RetentionState, Thresholds, DEFAULT_K1,
    DEFAULT_K2,
};
use crate::error::{Error, Result};
use crate::feature_io::FrameFeature;
use crate::scorer::{CurvatureScorer, ScoreRecord, DEFAULT_LAMBDA};
use crate::trace::StepTrace;

/// Abstract token charge for a high- and a low-resolution frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenCost {
    pub high: f64,
    pub low: f64,
}

impl Default for TokenCost {
    fn default() -> Self {
        Self { high: 1.0, low: 0.25 }
    }
}

impl TokenCost {
    pub fn for_state(&self, state: RetentionState) -> f64 {
        match state {
            RetentionState::Clear => self.high,
            RetentionState::Blurred => self.low,
            RetentionState::Discard => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub k1: f64,
    pub k2: f64,
    pub capacity: usize,
    pub cost: TokenCost,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            gamma: DEFAULT_GAMMA,
            k1: DEFAULT_K1,
            k2: DEFAULT_K2,
            capacity: DEFAULT_CAPACITY,
            cost: TokenCost::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!(
                "gamma must lie strictly between 0 and 1, got {}",
                self.gamma
            )));
        }
        check_multipliers(self.k1, self.k2)?;
        if self.capacity == 0 {
            return Err(Error::Config("capacity must be at least 1".into()));
        }
        for (name, v) in [("cost_high", self.cost.high), ("cost_low", self.cost.low)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// The routed outcome for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetentionDecision {
    pub frame_id: u64,
    pub state: RetentionState,
    pub resolution: Resolution,
    pub token_cost: f64,
    pub thresholds: Thresholds,
    /// `None` for a query frame forced Clear before any score exists.
    pub score: Option<f64>,
    pub forced_by_query: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateCounts {
    pub clear: u64,
    pub blurred: u64,
    pub discard: u64,
    pub warmup: u64,
}

/// Sequential scoring, routing and memory state for one stream.
#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    scorer: CurvatureScorer,
    distribution: DistributionState,
    queue: MemoryQueue,
    last_id: Option<u64>,
    tokens_total: f64,
    counts: StateCounts,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            scorer: CurvatureScorer::new(config.lambda)?,
            distribution: DistributionState::new(config.gamma)?,
            queue: MemoryQueue::new(config.capacity)?,
            config,
            last_id: None,
            tokens_total: 0.0,
            counts: StateCounts::default(),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn distribution(&self) -> &DistributionState {
        &self.distribution
    }

    pub fn queue(&self) -> &MemoryQueue {
        &self.queue
    }

    pub fn counts(&self) -> StateCounts {
        self.counts
    }

    /// Cumulative token cost of every frame admitted so far.
    pub fn tokens_total(&self) -> f64 {
        self.tokens_total
    }

    /// Processes one frame: score, update the distribution, derive the
    /// thresholds from the updated distribution, route, then admit and
    /// evict.
    pub fn step(&mut self, frame: &FrameFeature, is_query_frame: bool) -> Result<StepTrace> {
        if let Some(last) = self.last_id {
            if frame.frame_id <= last {
                return Err(Error::Sequencing(format!(
                    "frame_id {} arrived after {last}",
                    frame.frame_id
                )));
            }
        }
        let score: Option<ScoreRecord> = self.scorer.score_frame(frame)?;
        self.last_id = Some(frame.frame_id);

        if let Some(rec) = &score {
            self.distribution.update(rec.score)?;
        }
        let thresholds = thresholds_from(&self.distribution, self.config.k1, self.config.k2)?;

        let decision = match (&score, is_query_frame) {
            (Some(rec), _) => Some(route(rec.score, &thresholds, is_query_frame)),
            (None, true) => Some((RetentionState::Clear, Resolution::High)),
            (None, false) => None,
        }
        .map(|(state, resolution)| RetentionDecision {
            frame_id: frame.frame_id,
            state,
            resolution,
            token_cost: self.config.cost.for_state(state),
            thresholds,
            score: score.map(|r| r.score),
            forced_by_query: is_query_frame,
        });

        let mut evicted = Vec::new();
        match &decision {
            Some(d) => {
                match d.state {
                    RetentionState::Clear => self.counts.clear += 1,
                    RetentionState::Blurred => self.counts.blurred += 1,
                    RetentionState::Discard => self.counts.discard += 1,
                }
                if let Some(tier) = d.state.tier() {
                    evicted = self.queue.admit(frame.frame_id, tier, d.token_cost);
                    self.tokens_total += d.token_cost;
                }
            }
            None => self.counts.warmup += 1,
        }

        Ok(StepTrace {
            timestamp: frame.timestamp,
            frame_id: frame.frame_id,
            score,
            distribution: self.distribution,
            thresholds,
            decision,
            evicted,
            queue_len: self.queue.len(),
            tokens_total: self.tokens_total,
        })
    }
}

/// Runs a full stream through a fresh engine.
pub fn run_stream(
    config: EngineConfig,
    frames: &[FrameFeature],
    query_frames: &BTreeSet<u64>,
) -> Result<(Engine, Vec<StepTrace>)> {
    let mut engine = Engine::new(config)?;
    let traces = frames
        .iter()
        .map(|f| engine.step(f, query_frames.contains(&f.frame_id)))
        .collect::<Result<Vec<_>>>()?;
    Ok((engine, traces))
}
