//! Per-frame step traces and their JSONL encoding.
//!
//! Each line is one object with the fields
//! `t, id, M, C, CS, mu, sigma, g1, g2, state, forced, evicted, queue_len,
//! tokens_total`. `M`, `C` and `CS` are `null` for the first frame of a
//! stream; `state` is `null` when no routing decision was made.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hvmm::{DistributionState, RetentionDecision, RetentionState, Thresholds};
use crate::scorer::ScoreRecord;

/// Everything the engine did for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub timestamp: f64,
    pub frame_id: u64,
    pub score: Option<ScoreRecord>,
    pub distribution: DistributionState,
    pub thresholds: Thresholds,
    pub decision: Option<RetentionDecision>,
    pub evicted: Vec<u64>,
    pub queue_len: usize,
    pub tokens_total: f64,
}

/// Wire form of a [`StepTrace`]. Field names are a stable contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub t: f64,
    pub id: u64,
    #[serde(rename = "M")]
    pub motion: Option<f64>,
    #[serde(rename = "C")]
    pub curvature: Option<f64>,
    #[serde(rename = "CS")]
    pub score: Option<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub g1: f64,
    pub g2: f64,
    pub state: Option<RetentionState>,
    pub forced: bool,
    pub evicted: Vec<u64>,
    pub queue_len: usize,
    pub tokens_total: f64,
}

impl From<&StepTrace> for TraceLine {
    fn from(s: &StepTrace) -> Self {
        Self {
            t: s.timestamp,
            id: s.frame_id,
            motion: s.score.map(|r| r.motion),
            curvature: s.score.map(|r| r.curvature),
            score: s.score.map(|r| r.score),
            mu: s.distribution.mean,
            sigma: s.distribution.std_dev(),
            g1: s.thresholds.g1,
            g2: s.thresholds.g2,
            state: s.decision.map(|d| d.state),
            forced: s.decision.is_some_and(|d| d.forced_by_query),
            evicted: s.evicted.clone(),
            queue_len: s.queue_len,
            tokens_total: s.tokens_total,
        }
    }
}

impl StepTrace {
    pub fn to_line(&self) -> TraceLine {
        TraceLine::from(self)
    }

    /// One JSONL line, without the trailing newline.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_line()).expect("trace lines always serialize")
    }
}

pub fn write_trace<W: Write>(traces: &[StepTrace], mut sink: W) -> Result<()> {
    for t in traces {
        sink.write_all(t.to_json().as_bytes())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

pub fn read_trace<R: BufRead>(source: R) -> Result<Vec<TraceLine>> {
    source
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, line)| {
            let line = line?;
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("trace line {}: {e}", i + 1)))
        })
        .collect()
}

/// Result of comparing a recorded trace against a recomputation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayVerdict {
    Match,
    /// 1-based line number of the first difference, with both versions
    /// (`None` where one side ran out of lines).
    Diverge {
        line: usize,
        expected: Option<String>,
        found: Option<String>,
    },
}

/// Compares two JSONL texts line by line, byte for byte.
pub fn compare_traces(recorded: &str, recomputed: &str) -> ReplayVerdict {
    let mut a = recorded.lines();
    let mut b = recomputed.lines();
    let mut line = 0;
    loop {
        line += 1;
        match (a.next(), b.next()) {
            (None, None) => return ReplayVerdict::Match,
            (x, y) if x == y => continue,
            (x, y) => {
                return ReplayVerdict::Diverge {
                    line,
                    expected: y.map(str::to_owned),
                    found: x.map(str::to_owned),
                }
            }
        }
    }
}
