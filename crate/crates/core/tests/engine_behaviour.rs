mod common;

use std::collections::BTreeSet;
use std::f64::consts::PI;

use curvestream::hvmm::{run_stream, Engine, EngineConfig, RetentionState};
use curvestream::simulator::{generate, SimRng, SyntheticSpec};
use curvestream::trace::read_trace;
use curvestream::{Error, FrameFeature};

fn drift_spec(transitions: Vec<usize>, turn_angle: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        total_frames: 200,
        transitions,
        drift_step: 0.01,
        turn_angle,
        seed,
        ..SyntheticSpec::default()
    }
}

#[test]
fn orthogonal_change_is_kept_clear() {
    let frames = generate(&drift_spec(vec![120], PI / 2.0, 3)).unwrap().frames;
    let (_, steps) = run_stream(EngineConfig::default(), &frames, &BTreeSet::new()).unwrap();
    let change = &steps[120];
    assert_eq!(change.decision.as_ref().unwrap().state, RetentionState::Clear);
    let rec = change.score.unwrap();
    assert!((rec.curvature - 1.0).abs() <= 1e-6);
    let best = steps
        .iter()
        .filter_map(|s| s.score)
        .max_by(|a, b| a.score.total_cmp(&b.score))
        .unwrap();
    assert_eq!(best.frame_id, 120);
}

#[test]
fn scores_agree_with_direct_evaluation() {
    let frames = common::random_stream(300, 16, 12);
    let (_, steps) = run_stream(EngineConfig::default(), &frames, &BTreeSet::new()).unwrap();
    for (step, direct) in steps.iter().zip(common::direct_scores(&frames, 0.2)) {
        match (step.score, direct) {
            (None, None) => {}
            (Some(r), Some((m, c, cs))) => {
                assert!((r.motion - m).abs() < 1e-12);
                assert!((r.curvature - c).abs() < 1e-12);
                assert!((r.score - cs).abs() < 1e-12);
            }
            other => panic!("mismatch at {}: {other:?}", step.frame_id),
        }
    }
}

#[test]
fn query_frames_are_always_clear() {
    let mut rng = SimRng::new(21);
    for trial in 0..100u64 {
        let frames = common::random_stream(60, 8, 1000 + trial);
        let queries: BTreeSet<u64> = (0..5).map(|_| rng.below(0, 60) as u64).collect();
        let (_, steps) = run_stream(EngineConfig::default(), &frames, &queries).unwrap();
        for s in steps.iter().filter(|s| queries.contains(&s.frame_id)) {
            let d = s.decision.as_ref().unwrap();
            assert_eq!(d.state, RetentionState::Clear, "trial {trial} frame {}", s.frame_id);
            assert!(d.forced_by_query);
        }
    }
}

#[test]
fn identical_runs_give_identical_traces() {
    let frames = generate(&drift_spec(vec![30, 90, 150], PI / 3.0, 8)).unwrap().frames;
    let render = || -> Vec<String> {
        let (_, steps) = run_stream(EngineConfig::default(), &frames, &BTreeSet::from([40])).unwrap();
        steps.iter().map(|s| s.to_json()).collect()
    };
    assert_eq!(render(), render());
}

#[test]
fn default_run_over_hundred_frames() {
    let frames = common::random_stream(100, 32, 2);
    let (engine, steps) = run_stream(EngineConfig::default(), &frames, &BTreeSet::new()).unwrap();
    let text: String = steps.iter().map(|s| s.to_json() + "\n").collect();
    let lines = read_trace(text.as_bytes()).unwrap();
    assert_eq!(lines.len(), 100);
    assert!(lines[0].score.is_none() && lines[0].state.is_none());
    assert!(lines[1..].iter().all(|l| l.score.is_some()));
    assert!(lines.iter().all(|l| l.queue_len <= 20));
    let c = engine.counts();
    assert_eq!(c.clear + c.blurred + c.discard + c.warmup, 100);
}

#[test]
fn capacity_one_keeps_single_entry() {
    let frames = common::random_stream(50, 8, 6);
    let config = EngineConfig { capacity: 1, ..EngineConfig::default() };
    let (engine, _) = run_stream(config, &frames, &BTreeSet::new()).unwrap();
    assert_eq!(engine.queue().len(), 1);
}

#[test]
fn out_of_order_frame_is_a_sequencing_error() {
    let frames = common::random_stream(3, 4, 1);
    let mut engine = Engine::new(EngineConfig::default()).unwrap();
    engine.step(&frames[1], false).unwrap();
    let err = engine.step(&frames[0], false).unwrap_err();
    assert!(matches!(err, Error::Sequencing(_)));
    let dup = FrameFeature::new(1, 0.0, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    assert!(matches!(engine.step(&dup, false), Err(Error::Sequencing(_))));
}

#[test]
fn token_total_counts_admitted_cost() {
    let frames = common::random_stream(400, 8, 31);
    let (engine, steps) = run_stream(EngineConfig::default(), &frames, &BTreeSet::new()).unwrap();
    let c = engine.counts();
    let expected = c.clear as f64 * 1.0 + c.blurred as f64 * 0.25;
    assert!((engine.tokens_total() - expected).abs() < 1e-9);
    assert!(steps.windows(2).all(|w| w[1].tokens_total >= w[0].tokens_total));
}
