mod common;

use std::collections::{BTreeSet, HashMap, VecDeque};

use curvestream::hvmm::{run_stream, EngineConfig, MemoryQueue, MemoryTier};
use curvestream::simulator::SimRng;

#[test]
fn engine_queue_matches_deque_replay() {
    let frames = common::random_stream(100_000, 4, 77);
    for capacity in [1usize, 5, 20] {
        let config = EngineConfig { capacity, ..EngineConfig::default() };
        let (engine, steps) = run_stream(config, &frames, &BTreeSet::new()).unwrap();
        let mut reference: VecDeque<(u64, MemoryTier)> = VecDeque::new();
        let mut evicted_total = Vec::new();
        for step in &steps {
            assert!(step.queue_len <= capacity);
            let mut expected_evicted = Vec::new();
            if let Some(tier) = step.decision.as_ref().and_then(|d| d.state.tier()) {
                reference.push_back((step.frame_id, tier));
                while reference.len() > capacity {
                    expected_evicted.push(reference.pop_front().unwrap().0);
                }
            }
            assert_eq!(step.evicted, expected_evicted);
            assert_eq!(step.queue_len, reference.len());
            evicted_total.extend(step.evicted.iter().copied());
        }
        let actual: Vec<(u64, MemoryTier)> =
            engine.queue().entries().map(|e| (e.frame_id, e.tier)).collect();
        assert_eq!(actual, reference.into_iter().collect::<Vec<_>>());

        let admitted: Vec<u64> = steps
            .iter()
            .filter(|s| s.decision.as_ref().is_some_and(|d| d.state.tier().is_some()))
            .map(|s| s.frame_id)
            .collect();
        let mut accounted: Vec<u64> = evicted_total;
        accounted.extend(actual.iter().map(|e| e.0));
        accounted.sort_unstable();
        assert_eq!(accounted, admitted, "capacity {capacity}");
    }
}

#[test]
fn raw_queue_holds_last_admissions() {
    let mut rng = SimRng::new(5);
    let mut queue = MemoryQueue::new(20).unwrap();
    let mut log: Vec<(u64, MemoryTier)> = Vec::new();
    let mut costs: HashMap<u64, f64> = HashMap::new();
    for id in 0..100_000u64 {
        let tier = if rng.uniform() < 0.5 { MemoryTier::Clear } else { MemoryTier::Blurred };
        let cost = if tier == MemoryTier::Clear { 1.0 } else { 0.25 };
        queue.admit(id, tier, cost);
        costs.insert(id, cost);
        log.push((id, tier));
        if id % 997 == 0 || id == 99_999 {
            let tail = &log[log.len().saturating_sub(20)..];
            let got: Vec<(u64, MemoryTier)> = queue.entries().map(|e| (e.frame_id, e.tier)).collect();
            assert_eq!(got, tail);
            let cost: f64 = tail.iter().map(|(i, _)| costs[i]).sum();
            assert!((queue.token_cost() - cost).abs() < 1e-9);
        }
    }
}
