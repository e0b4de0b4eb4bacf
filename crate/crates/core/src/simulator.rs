//! Synthetic feature trajectories on the unit hypersphere with labeled
//! direction changes.
//!
//! Smooth segments rotate along a great circle at a constant angle
//! `drift_step` per frame. On a sphere consecutive chords of a great circle
//! turn by exactly `drift_step`, so the noiseless smooth-segment curvature
//! is `1 - cos(drift_step)`. At a transition frame the next chord is
//! rebuilt so that it makes an angle of exactly `turn_angle` with the
//! previous chord, which gives a curvature of `1 - cos(turn_angle)` at that
//! frame; motion then continues on the great circle through the new chord.
//!
//! Randomness comes from SplitMix64 seeded with `seed`. Uniform variates
//! are the top 53 bits of each output times 2^-53; normal variates use the
//! Box-Muller transform on consecutive uniform pairs, returning the cosine
//! branch first and the sine branch second.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_io::{FrameFeature, MIN_DIMENSION};

/// Minimum spacing between transitions, and the first index a transition
/// may occupy. Both keep every transition scoreable with a full window.
pub const MIN_TRANSITION_GAP: usize = 4;
pub const FIRST_TRANSITION: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dimension: usize,
    pub total_frames: usize,
    /// Sorted frame indices at which the trajectory changes direction.
    pub transitions: Vec<usize>,
    /// Geodesic step per frame in smooth segments, radians.
    pub drift_step: f64,
    /// Angle between the chords before and after a transition, radians.
    pub turn_angle: f64,
    /// Per-coordinate Gaussian observation noise, applied before
    /// renormalization.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Seconds between frames.
    pub frame_interval: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dimension: 128,
            total_frames: 500,
            transitions: Vec::new(),
            drift_step: 0.02,
            turn_angle: PI / 3.0,
            noise_sigma: 0.0,
            seed: 0,
            frame_interval: 1.0 / 30.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.dimension < MIN_DIMENSION {
            return bad(format!("dimension must be at least {MIN_DIMENSION}, got {}", self.dimension));
        }
        if self.total_frames == 0 {
            return bad("total_frames must be positive".into());
        }
        if !(self.drift_step.is_finite() && self.drift_step >= 0.0 && self.drift_step < PI) {
            return bad(format!("drift_step must lie in [0, pi), got {}", self.drift_step));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(self.frame_interval.is_finite() && self.frame_interval >= 0.0) {
            return bad(format!("frame_interval must be >= 0, got {}", self.frame_interval));
        }
        if self.transitions.is_empty() {
            return Ok(());
        }
        if self.dimension < 3 {
            return bad("transitions need dimension >= 3".into());
        }
        if !(self.turn_angle.is_finite() && (0.0..=PI).contains(&self.turn_angle)) {
            return bad(format!("turn_angle must lie in [0, pi], got {}", self.turn_angle));
        }
        // a chord on the unit sphere already turns by drift_step, so that is
        // the smallest turn a transition can make
        if self.turn_angle < self.drift_step {
            return bad(format!(
                "turn_angle {} is smaller than drift_step {}",
                self.turn_angle, self.drift_step
            ));
        }
        for w in self.transitions.windows(2) {
            if w[1] < w[0] + MIN_TRANSITION_GAP {
                return bad(format!(
                    "transitions {} and {} are closer than {MIN_TRANSITION_GAP} frames (or unsorted)",
                    w[0], w[1]
                ));
            }
        }
        let first = self.transitions[0];
        let last = *self.transitions.last().unwrap();
        if first < FIRST_TRANSITION || last >= self.total_frames {
            return bad(format!(
                "transitions must lie in [{FIRST_TRANSITION}, {})",
                self.total_frames
            ));
        }
        Ok(())
    }

    /// Noiseless curvature expected at smooth-segment frames.
    pub fn smooth_curvature(&self) -> f64 {
        1.0 - self.drift_step.cos()
    }

    /// Noiseless curvature expected at transition frames.
    pub fn transition_curvature(&self) -> f64 {
        1.0 - self.turn_angle.cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStream {
    pub frames: Vec<FrameFeature>,
    /// Frame indices (equal to frame ids) of the planted transitions.
    pub ground_truth: Vec<usize>,
}

/// SplitMix64 plus Box-Muller normals.
pub struct SimRng {
    inner: SplitMix64,
    spare: Option<f64>,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: SplitMix64::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Uniform integer in `[lo, hi)`.
    pub fn below(&mut self, lo: usize, hi: usize) -> usize {
        lo + ((self.uniform() * (hi - lo) as f64) as usize).min(hi - lo - 1)
    }

    fn gaussian_vec(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.normal()).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Removes the components of `v` along each (unit) basis vector.
fn orthogonalize(v: &mut [f64], basis: &[&[f64]]) {
    for b in basis {
        let p = dot(v, b);
        v.iter_mut().zip(b.iter()).for_each(|(x, y)| *x -= p * y);
    }
}

fn random_orthonormal(rng: &mut SimRng, dim: usize, basis: &[&[f64]]) -> Vec<f64> {
    loop {
        let mut v = rng.gaussian_vec(dim);
        orthogonalize(&mut v, basis);
        // second pass for numerical orthogonality
        orthogonalize(&mut v, basis);
        if dot(&v, &v) > 1e-12 {
            normalize(&mut v);
            return v;
        }
    }
}

/// Picks `count` transition indices in `[FIRST_TRANSITION, total)` at least
/// [`MIN_TRANSITION_GAP`] apart, using a stream derived from `seed`.
pub fn place_transitions(total_frames: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if total_frames <= FIRST_TRANSITION
        || (total_frames - FIRST_TRANSITION) < (count - 1) * MIN_TRANSITION_GAP + 1
    {
        return Err(Error::Config(format!(
            "cannot place {count} transitions {MIN_TRANSITION_GAP} frames apart in {total_frames} frames"
        )));
    }
    let mut rng = SimRng::new(seed ^ 0x7472_616e_7369_7469);
    let mut picked: Vec<usize> = Vec::with_capacity(count);
    let budget = 10_000 * count;
    for _ in 0..budget {
        let c = rng.below(FIRST_TRANSITION, total_frames);
        if picked.iter().all(|&p| p.abs_diff(c) >= MIN_TRANSITION_GAP) {
            picked.push(c);
            if picked.len() == count {
                picked.sort_unstable();
                return Ok(picked);
            }
        }
    }
    Err(Error::Config(format!(
        "could not place {count} transitions in {total_frames} frames"
    )))
}

/// Generates a labeled stream. Deterministic for a fixed spec.
pub fn generate(spec: &SyntheticSpec) -> Result<LabeledStream> {
    spec.validate()?;
    let dim = spec.dimension;
    let mut rng = SimRng::new(spec.seed);

    let mut pos = rng.gaussian_vec(dim);
    normalize(&mut pos);
    let mut tangent = random_orthonormal(&mut rng, dim, &[&pos]);

    let (sin_step, cos_step) = spec.drift_step.sin_cos();
    let half_sin = (spec.drift_step / 2.0).sin();
    let half_cos = (spec.drift_step / 2.0).cos();
    let chord_len = 2.0 * half_sin;

    let mut is_transition = vec![false; spec.total_frames];
    for &t in &spec.transitions {
        is_transition[t] = true;
    }

    let mut frames = Vec::with_capacity(spec.total_frames);
    for (i, &turn) in is_transition.iter().enumerate() {
        if i > 0 {
            if turn {
                // chord direction w with <w, pos> = -sin(step/2) (stays on the
                // sphere) and <w, previous chord> = cos(turn_angle)
                let side = random_orthonormal(&mut rng, dim, &[&pos, &tangent]);
                let a = -half_sin;
                let b = (spec.turn_angle.cos() + half_sin * half_sin) / half_cos;
                let c = (1.0 - a * a - b * b).max(0.0).sqrt();
                let w: Vec<f64> = (0..dim)
                    .map(|k| a * pos[k] + b * tangent[k] + c * side[k])
                    .collect();
                let mut next: Vec<f64> = pos.iter().zip(&w).map(|(p, w)| p + chord_len * w).collect();
                normalize(&mut next);
                let along = dot(&w, &next);
                let mut next_tangent: Vec<f64> = w.iter().zip(&next).map(|(w, n)| w - along * n).collect();
                if dot(&next_tangent, &next_tangent) > 1e-24 {
                    normalize(&mut next_tangent);
                } else {
                    next_tangent = random_orthonormal(&mut rng, dim, &[&next]);
                }
                pos = next;
                tangent = next_tangent;
            } else {
                let next: Vec<f64> = (0..dim).map(|k| cos_step * pos[k] + sin_step * tangent[k]).collect();
                let next_tangent: Vec<f64> =
                    (0..dim).map(|k| -sin_step * pos[k] + cos_step * tangent[k]).collect();
                pos = next;
                tangent = next_tangent;
            }
            normalize(&mut pos);
            orthogonalize(&mut tangent, &[&pos]);
            normalize(&mut tangent);
        }

        let observed: Vec<f64> = if spec.noise_sigma > 0.0 {
            pos.iter().map(|x| x + spec.noise_sigma * rng.normal()).collect()
        } else {
            pos.clone()
        };
        frames.push(FrameFeature::from_f64(
            i as u64,
            i as f64 * spec.frame_interval,
            &observed,
        )?);
    }

    Ok(LabeledStream {
        frames,
        ground_truth: spec.transitions.clone(),
    })
}
