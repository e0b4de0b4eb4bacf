//! Curvature-aware scoring of feature trajectories.
//!
//! For each frame the scorer combines a first-order term, the cosine
//! distance between consecutive features, with a second-order term, the
//! cosine distance between consecutive displacement vectors:
//!
//! ```text
//! motion    = 1 - cos(F[t], F[t-1])
//! curvature = 1 - cos(F[t-1] - F[t-2], F[t] - F[t-1])
//! score     = motion + lambda * curvature
//! ```
//!
//! All arithmetic is done in f64.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_io::{FrameFeature, MIN_NORM};

/// Displacements shorter than this carry no direction; curvature is 0.
pub const MIN_DISPLACEMENT: f64 = 1e-8;

pub const DEFAULT_LAMBDA: f64 = 0.2;

/// Scores for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub frame_id: u64,
    pub motion: f64,
    pub curvature: f64,
    pub score: f64,
    pub lambda: f64,
    /// Set when curvature was forced to 0 because a displacement was too
    /// short, or because fewer than three frames were available.
    pub degenerate_curvature: bool,
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 - cos(a, b)`, clamped to [0, 2].
///
/// The denominator is `sqrt(|a|^2 |b|^2)` so that identical inputs give
/// exactly 0.
fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let denom = (dot(a, a) * dot(b, b)).sqrt();
    let cos = (dot(a, b) / denom).clamp(-1.0, 1.0);
    1.0 - cos
}

/// First-order motion variation between consecutive features.
pub fn motion_variation(prev: &[f64], curr: &[f64]) -> Result<f64> {
    check_dims(prev, curr)?;
    for v in [prev, curr] {
        if dot(v, v).sqrt() < MIN_NORM {
            return Err(Error::Argument("feature vector has (near) zero norm".into()));
        }
    }
    Ok(cosine_distance(prev, curr))
}

/// Second-order geometric curvature of three consecutive features.
///
/// Returns `(curvature, degenerate)`; `degenerate` is true when either
/// displacement is shorter than [`MIN_DISPLACEMENT`], in which case the
/// curvature is 0.
pub fn geometric_curvature(f_prev2: &[f64], f_prev1: &[f64], f_curr: &[f64]) -> Result<(f64, bool)> {
    check_dims(f_prev2, f_prev1)?;
    check_dims(f_prev1, f_curr)?;
    let d1: Vec<f64> = f_prev1.iter().zip(f_prev2).map(|(a, b)| a - b).collect();
    let d2: Vec<f64> = f_curr.iter().zip(f_prev1).map(|(a, b)| a - b).collect();
    if dot(&d1, &d1).sqrt() < MIN_DISPLACEMENT || dot(&d2, &d2).sqrt() < MIN_DISPLACEMENT {
        return Ok((0.0, true));
    }
    Ok((cosine_distance(&d1, &d2), false))
}

/// Sliding three-frame window plus the curvature weight.
#[derive(Debug, Clone)]
pub struct CurvatureScorer {
    window: VecDeque<(u64, Vec<f64>)>,
    lambda: f64,
}

impl CurvatureScorer {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(Self {
            window: VecDeque::with_capacity(3),
            lambda,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// Pushes a frame into the window and scores it.
    ///
    /// The first frame has nothing to compare against and yields `None`.
    /// The second yields a motion-only record (curvature 0, flagged
    /// degenerate). From the third frame on the full score is computed.
    pub fn score_frame(&mut self, frame: &FrameFeature) -> Result<Option<ScoreRecord>> {
        let curr = frame.to_f64();
        if let Some((_, last)) = self.window.back() {
            check_dims(last, &curr)?;
        }

        let record = match self.window.len() {
            0 => None,
            n => {
                let prev1 = &self.window[n - 1].1;
                let motion = cosine_distance(prev1, &curr);
                let (curvature, degenerate_curvature) = if n >= 2 {
                    geometric_curvature(&self.window[n - 2].1, prev1, &curr)?
                } else {
                    (0.0, true)
                };
                Some(ScoreRecord {
                    frame_id: frame.frame_id,
                    motion,
                    curvature,
                    score: motion + self.lambda * curvature,
                    lambda: self.lambda,
                    degenerate_curvature,
                })
            }
        };

        if self.window.len() == 3 {
            self.window.pop_front();
        }
        self.window.push_back((frame.frame_id, curr));
        Ok(record)
    }
}

/// Scores a whole stream, one record per frame after the first.
pub fn score_stream(frames: &[FrameFeature], lambda: f64) -> Result<Vec<ScoreRecord>> {
    let mut scorer = CurvatureScorer::new(lambda)?;
    let mut out = Vec::with_capacity(frames.len().saturating_sub(1));
    for f in frames {
        if let Some(rec) = scorer.score_frame(f)? {
            out.push(rec);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(id: u64, v: &[f32]) -> FrameFeature {
        FrameFeature::new(id, id as f64, v.to_vec()).unwrap()
    }

    #[test]
    fn motion_examples() {
        let v = [0.6, 0.8];
        assert_eq!(motion_variation(&v, &v).unwrap(), 0.0);
        assert_eq!(motion_variation(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(motion_variation(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 2.0);
        assert!(motion_variation(&[1.0, 0.0], &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn curvature_examples() {
        let (c, deg) = geometric_curvature(&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!((c, deg), (0.0, false));
        let (c, deg) = geometric_curvature(&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!((c, deg), (1.0, false));
        let (c, deg) = geometric_curvature(&[0.3, 0.4], &[0.3, 0.4], &[1.0, 0.0]).unwrap();
        assert_eq!((c, deg), (0.0, true));
        assert!(geometric_curvature(&[0.0; 2], &[0.0; 3], &[0.0; 3]).is_err());
    }

    #[test]
    fn warm_up_policy() {
        let mut s = CurvatureScorer::new(0.2).unwrap();
        assert!(s.score_frame(&frame(0, &[1.0, 0.0, 0.0])).unwrap().is_none());
        let rec = s.score_frame(&frame(1, &[0.0, 1.0, 0.0])).unwrap().unwrap();
        assert_eq!(rec.motion, 1.0);
        assert_eq!(rec.curvature, 0.0);
        assert!(rec.degenerate_curvature);
        assert_eq!(rec.score, 1.0);
    }

    #[test]
    fn collinear_third_frame_scores_motion_only() {
        // three points on a straight line through the sphere's interior are
        // not unit vectors, so drive the scorer through raw f64 windows.
        let a = [1.0, 0.0];
        let b = [1.0, 0.2];
        let c = [1.0, 0.4];
        let (curv, _) = geometric_curvature(&a, &b, &c).unwrap();
        assert_eq!(curv, 0.0);
        let motion = 0.02;
        assert_eq!(motion + 0.2 * curv, 0.02);
    }

    #[test]
    fn score_is_eq5_arithmetic() {
        let (m, c, lambda) = (0.5, 1.0, 0.2);
        assert!((m + lambda * c - 0.7f64).abs() < 1e-15);
    }

    #[test]
    fn window_never_exceeds_three() {
        let mut s = CurvatureScorer::new(0.2).unwrap();
        for i in 0..10u64 {
            let angle = i as f32 * 0.1;
            s.score_frame(&frame(i, &[angle.cos(), angle.sin(), 0.1])).unwrap();
            assert!(s.window_len() <= 3);
        }
    }

    #[test]
    fn dimension_change_is_rejected() {
        let mut s = CurvatureScorer::new(0.2).unwrap();
        s.score_frame(&frame(0, &[1.0, 0.0])).unwrap();
        assert!(matches!(
            s.score_frame(&frame(1, &[1.0, 0.0, 0.0])),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn negative_lambda_is_config_error() {
        assert!(CurvatureScorer::new(-0.1).unwrap_err().is_config());
        assert!(CurvatureScorer::new(f64::NAN).is_err());
    }

    fn unit(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, dim)
            .prop_filter("non-zero", |v| dot(v, v) > 1e-6)
            .prop_map(|v| {
                let n = dot(&v, &v).sqrt();
                v.into_iter().map(|x| x / n).collect()
            })
    }

    proptest! {
        #[test]
        fn ranges_hold(a in unit(6), b in unit(6), c in unit(6), lambda in 0.0f64..5.0) {
            let m = motion_variation(&b, &c).unwrap();
            let (k, _) = geometric_curvature(&a, &b, &c).unwrap();
            prop_assert!((0.0..=2.0).contains(&m));
            prop_assert!((0.0..=2.0).contains(&k));
            prop_assert!(m + lambda * k <= 2.0 * (1.0 + lambda));
        }

        #[test]
        fn curvature_is_scale_invariant(
            a in unit(5), b in unit(5), c in unit(5),
            alpha in 0.01f64..100.0, beta in 0.01f64..100.0,
        ) {
            let (k, deg) = geometric_curvature(&a, &b, &c).unwrap();
            prop_assume!(!deg);
            // rebuild the triple from scaled displacements
            let p1: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + alpha * (y - x)).collect();
            let p2: Vec<f64> = p1.iter().zip(b.iter().zip(&c)).map(|(p, (y, z))| p + beta * (z - y)).collect();
            let (k2, _) = geometric_curvature(&a, &p1, &p2).unwrap();
            prop_assert!((k - k2).abs() <= 1e-12, "{} vs {}", k, k2);
        }

        #[test]
        fn constant_velocity_has_zero_curvature(a in prop::collection::vec(-1.0f64..1.0, 4), d in unit(4), step in 1e-3f64..1.0) {
            let b: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x + step * y).collect();
            let c: Vec<f64> = b.iter().zip(&d).map(|(x, y)| x + step * y).collect();
            // d2 == d1 only holds exactly when the subtraction is exact
            let d1: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
            let d2: Vec<f64> = c.iter().zip(&b).map(|(x, y)| x - y).collect();
            prop_assume!(d1 == d2);
            prop_assert_eq!(geometric_curvature(&a, &b, &c).unwrap(), (0.0, false));
        }

        #[test]
        fn zero_lambda_reduces_to_motion(a in unit(3), b in unit(3), c in unit(3)) {
            let frames: Vec<_> = [a, b, c].iter().enumerate()
                .map(|(i, v)| FrameFeature::from_f64(i as u64, 0.0, v).unwrap())
                .collect();
            for rec in score_stream(&frames, 0.0).unwrap() {
                prop_assert_eq!(rec.score, rec.motion);
            }
        }
    }
}
