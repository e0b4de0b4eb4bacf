//! Frame selectors sharing one interface, used for baseline comparisons.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_io::FrameFeature;
use crate::hvmm::{run_stream, EngineConfig, MemoryTier};
use crate::scorer::{score_stream, ScoreRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectorKind {
    Uniform,
    FirstOrderCosine,
    CurvatureTopK,
    CurveStreamFull,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 4] = [
        SelectorKind::Uniform,
        SelectorKind::FirstOrderCosine,
        SelectorKind::CurvatureTopK,
        SelectorKind::CurveStreamFull,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectorKind::Uniform => "uniform",
            SelectorKind::FirstOrderCosine => "cosine",
            SelectorKind::CurvatureTopK => "curvature",
            SelectorKind::CurveStreamFull => "curvestream",
        }
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown selector kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub kind: SelectorKind,
    pub budget: usize,
    /// Optional floor on motion for `FirstOrderCosine`; frames below it are
    /// never selected.
    pub min_motion: Option<f64>,
    /// Engine settings. `lambda` is used by both curvature kinds; the rest
    /// only by `CurveStreamFull`.
    pub engine: EngineConfig,
}

impl SelectorConfig {
    pub fn new(kind: SelectorKind, budget: usize) -> Self {
        Self {
            kind,
            budget,
            min_motion: None,
            engine: EngineConfig::default(),
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.engine.lambda = lambda;
        self
    }
}

/// `floor(i * n / budget)` for `i` in `0..budget`.
pub fn uniform_indices(n: usize, budget: usize) -> Vec<usize> {
    if budget >= n {
        return (0..n).collect();
    }
    (0..budget).map(|i| i * n / budget).collect()
}

/// Top `k` records by `key`, ties broken by the smaller frame id, returned
/// in ascending id order.
pub fn top_k_by<F: Fn(&ScoreRecord) -> f64>(records: &[ScoreRecord], k: usize, key: F) -> Vec<u64> {
    let mut ranked: Vec<(f64, u64)> = records.iter().map(|r| (key(r), r.frame_id)).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut ids: Vec<u64> = ranked.into_iter().take(k).map(|(_, id)| id).collect();
    ids.sort_unstable();
    ids
}

/// Selects at most `config.budget` frame ids, in ascending order.
pub fn select(config: &SelectorConfig, stream: &[FrameFeature]) -> Result<Vec<u64>> {
    if stream.is_empty() {
        return Err(Error::Argument("cannot select from an empty stream".into()));
    }
    if config.budget == 0 {
        return Err(Error::Config("budget must be at least 1".into()));
    }
    let k = config.budget;
    match config.kind {
        SelectorKind::Uniform => Ok(uniform_indices(stream.len(), k)
            .into_iter()
            .map(|i| stream[i].frame_id)
            .collect()),
        SelectorKind::FirstOrderCosine => {
            let mut recs = score_stream(stream, 0.0)?;
            if let Some(floor) = config.min_motion {
                recs.retain(|r| r.motion >= floor);
            }
            Ok(top_k_by(&recs, k, |r| r.motion))
        }
        SelectorKind::CurvatureTopK => {
            let recs = score_stream(stream, config.engine.lambda)?;
            Ok(top_k_by(&recs, k, |r| r.score))
        }
        SelectorKind::CurveStreamFull => {
            let (engine, _) = run_stream(config.engine, stream, &BTreeSet::new())?;
            let entries: Vec<_> = engine.queue().entries().collect();
            let mut ids: Vec<u64> = entries
                .iter()
                .filter(|e| e.tier == MemoryTier::Clear)
                .chain(entries.iter().filter(|e| e.tier == MemoryTier::Blurred))
                .take(k)
                .map(|e| e.frame_id)
                .collect();
            ids.sort_unstable();
            Ok(ids)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(vectors: &[[f32; 3]]) -> Vec<FrameFeature> {
        vectors
            .iter()
            .enumerate()
            .map(|(i, v)| FrameFeature::new(i as u64, i as f64, v.to_vec()).unwrap())
            .collect()
    }

    fn wobble(n: usize) -> Vec<FrameFeature> {
        (0..n)
            .map(|i| {
                let a = (i as f64 * 0.7).sin() * 0.3 + i as f64 * 0.05;
                FrameFeature::from_f64(i as u64, 0.0, &[a.cos(), a.sin(), 0.2 * (i as f64 * 1.3).cos()])
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn uniform_floor_spacing() {
        let s = wobble(10);
        let ids = select(&SelectorConfig::new(SelectorKind::Uniform, 5), &s).unwrap();
        assert_eq!(ids, vec![0, 2, 4, 6, 8]);
        let ids = select(&SelectorConfig::new(SelectorKind::Uniform, 50), &s).unwrap();
        assert_eq!(ids.len(), 10);
    }

    #[test]
    fn constant_stream_ties_break_to_earliest() {
        let s = stream(&[[1.0, 0.0, 0.0]; 12]);
        let ids = select(&SelectorConfig::new(SelectorKind::CurvatureTopK, 4), &s).unwrap();
        assert_eq!(ids, vec![1, 2, 3, 4]);
    }

    #[test]
    fn zero_lambda_matches_cosine() {
        let s = wobble(60);
        for budget in [1, 5, 17] {
            let a = select(&SelectorConfig::new(SelectorKind::CurvatureTopK, budget).with_lambda(0.0), &s).unwrap();
            let b = select(&SelectorConfig::new(SelectorKind::FirstOrderCosine, budget), &s).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn budget_is_respected() {
        let s = wobble(80);
        for kind in SelectorKind::ALL {
            for budget in [1, 3, 10, 100] {
                let ids = select(&SelectorConfig::new(kind, budget), &s).unwrap();
                assert!(ids.len() <= budget);
                assert!(ids.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn curvestream_prefers_clear_entries() {
        let s = wobble(100);
        let cfg = SelectorConfig::new(SelectorKind::CurveStreamFull, 3);
        let (engine, _) = run_stream(cfg.engine, &s, &BTreeSet::new()).unwrap();
        let clear: Vec<u64> = engine
            .queue()
            .entries()
            .filter(|e| e.tier == MemoryTier::Clear)
            .map(|e| e.frame_id)
            .collect();
        let ids = select(&cfg, &s).unwrap();
        let expected: BTreeSet<u64> = clear.iter().copied().take(3).collect();
        if clear.len() >= 3 {
            assert_eq!(ids, expected.into_iter().collect::<Vec<_>>());
        }
    }

    #[test]
    fn errors() {
        assert!(select(&SelectorConfig::new(SelectorKind::Uniform, 3), &[]).is_err());
        assert!(select(&SelectorConfig::new(SelectorKind::Uniform, 0), &wobble(5))
            .unwrap_err()
            .is_config());
        assert!("optical-flow".parse::<SelectorKind>().unwrap_err().is_config());
        assert_eq!("curvature".parse::<SelectorKind>().unwrap(), SelectorKind::CurvatureTopK);
    }
}
