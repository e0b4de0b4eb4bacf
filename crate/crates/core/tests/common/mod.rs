#![allow(dead_code)]

use curvestream::simulator::SimRng;
use curvestream::FrameFeature;

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Motion and curvature straight from the definitions; `None` for frames
/// without enough history.
pub fn direct_scores(frames: &[FrameFeature], lambda: f64) -> Vec<Option<(f64, f64, f64)>> {
    let v: Vec<Vec<f64>> = frames.iter().map(|f| f.to_f64()).collect();
    (0..v.len())
        .map(|t| {
            if t == 0 {
                return None;
            }
            let m = 1.0 - cosine(&v[t], &v[t - 1]);
            let c = if t >= 2 {
                let d1 = sub(&v[t - 1], &v[t - 2]);
                let d2 = sub(&v[t], &v[t - 1]);
                let n1 = d1.iter().map(|x| x * x).sum::<f64>().sqrt();
                let n2 = d2.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n1 < 1e-8 || n2 < 1e-8 {
                    0.0
                } else {
                    1.0 - cosine(&d1, &d2)
                }
            } else {
                0.0
            };
            Some((m, c, m + lambda * c))
        })
        .collect()
}

/// Independent Gaussian vectors, one per frame.
pub fn random_stream(n: usize, dim: usize, seed: u64) -> Vec<FrameFeature> {
    let mut rng = SimRng::new(seed);
    (0..n)
        .map(|i| {
            let raw: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            FrameFeature::from_f64(i as u64, i as f64 / 30.0, &raw).unwrap()
        })
        .collect()
}
