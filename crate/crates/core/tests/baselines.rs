mod common;

use std::f64::consts::PI;

use curvestream::evaluator::transition_recall;
use curvestream::simulator::{generate, place_transitions, SyntheticSpec};
use curvestream::strategies::{select, top_k_by, SelectorConfig, SelectorKind};
use curvestream::scorer::ScoreRecord;

fn stream(seed: u64, noise: f64) -> curvestream::simulator::LabeledStream {
    generate(&SyntheticSpec {
        total_frames: 300,
        transitions: place_transitions(300, 5, seed).unwrap(),
        drift_step: 0.02,
        turn_angle: PI / 3.0,
        noise_sigma: noise,
        seed,
        dimension: 64,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

fn recall(kind: SelectorKind, s: &curvestream::simulator::LabeledStream) -> f64 {
    let ids = select(&SelectorConfig::new(kind, 10), &s.frames).unwrap();
    let truth: Vec<u64> = s.ground_truth.iter().map(|&i| i as u64).collect();
    transition_recall(&ids, &truth, 1).recall
}

#[test]
fn curvature_beats_first_order_on_clean_drift() {
    let (mut curv, mut cos) = (0.0, 0.0);
    for seed in 0..8 {
        let s = stream(seed, 0.0);
        curv += recall(SelectorKind::CurvatureTopK, &s);
        cos += recall(SelectorKind::FirstOrderCosine, &s);
    }
    assert!(curv >= cos, "curvature {curv} cosine {cos}");
    assert!(curv / 8.0 > 0.99);
}

#[test]
fn curvature_selection_matches_direct_top_k() {
    for seed in 0..4 {
        let s = stream(seed, 0.003);
        let direct: Vec<ScoreRecord> = common::direct_scores(&s.frames, 0.2)
            .into_iter()
            .enumerate()
            .filter_map(|(i, d)| {
                d.map(|(m, c, cs)| ScoreRecord {
                    frame_id: i as u64,
                    motion: m,
                    curvature: c,
                    score: cs,
                    lambda: 0.2,
                    degenerate_curvature: false,
                })
            })
            .collect();
        let mut ranked: Vec<(f64, u64)> = direct.iter().map(|r| (r.score, r.frame_id)).collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut expected: Vec<u64> = ranked.iter().take(10).map(|p| p.1).collect();
        expected.sort_unstable();
        assert_eq!(top_k_by(&direct, 10, |r| r.score), expected);
        let ids = select(&SelectorConfig::new(SelectorKind::CurvatureTopK, 10), &s.frames).unwrap();
        assert_eq!(ids, expected, "seed {seed}");
    }
}
