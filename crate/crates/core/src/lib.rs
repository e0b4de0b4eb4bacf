//! Curvature-aware streaming visual memory.
//!
//! Frames arrive as L2-normalized feature vectors. Each one is scored by
//! how sharply the feature trajectory turns ([`scorer`]), routed against
//! adaptive K-Sigma thresholds into Clear, Blurred or Discard, and admitted
//! to a frame-bounded FIFO queue ([`hvmm`]). The [`simulator`],
//! [`strategies`] and [`evaluator`] modules measure how well the selection
//! tracks planted semantic transitions.

pub mod config;
pub mod error;
pub mod evaluator;
pub mod feature_io;
pub mod hvmm;
pub mod scorer;
pub mod simulator;
pub mod strategies;
pub mod trace;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use feature_io::{read_stream, write_stream, FrameFeature, StreamFormat};
pub use hvmm::{Engine, EngineConfig, RetentionState};
pub use scorer::{CurvatureScorer, ScoreRecord};
pub use trace::{StepTrace, TraceLine};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
