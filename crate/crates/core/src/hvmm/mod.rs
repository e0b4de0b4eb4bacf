//! Hierarchical visual memory management: an EMA estimate of the score
//! distribution, K-Sigma dual thresholds, Clear/Blurred/Discard routing and
//! a frame-bounded FIFO queue.

pub mod distribution;
pub mod engine;
pub mod queue;
pub mod routing;

pub use distribution::{update_distribution, DistributionState, DEFAULT_GAMMA};
pub use engine::{run_stream, Engine, EngineConfig, RetentionDecision, StateCounts, TokenCost};
pub use queue::{MemoryEntry, MemoryQueue, DEFAULT_CAPACITY};
pub use routing::{
    route, thresholds_from, MemoryTier, Resolution, RetentionState, Thresholds, DEFAULT_K1, DEFAULT_K2,
};
