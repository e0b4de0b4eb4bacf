use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::routing::MemoryTier;
use crate::error::{Error, Result};

pub const DEFAULT_CAPACITY: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub frame_id: u64,
    pub tier: MemoryTier,
    pub token_cost: f64,
    pub insertion_index: u64,
}

/// Frame-bounded FIFO memory. Eviction always removes the oldest entry,
/// whatever its tier.
#[derive(Debug, Clone)]
pub struct MemoryQueue {
    capacity: usize,
    entries: VecDeque<MemoryEntry>,
    evictions: Vec<u64>,
    next_index: u64,
}

impl MemoryQueue {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("capacity must be at least 1".into()));
        }
        Ok(Self {
            capacity,
            entries: VecDeque::with_capacity(capacity + 1),
            evictions: Vec::new(),
            next_index: 0,
        })
    }

    /// Appends a frame and evicts from the front until the queue fits.
    /// Returns the evicted frame ids, oldest first.
    pub fn admit(&mut self, frame_id: u64, tier: MemoryTier, token_cost: f64) -> Vec<u64> {
        self.entries.push_back(MemoryEntry {
            frame_id,
            tier,
            token_cost,
            insertion_index: self.next_index,
        });
        self.next_index += 1;
        let mut evicted = Vec::new();
        while self.entries.len() > self.capacity {
            if let Some(old) = self.entries.pop_front() {
                evicted.push(old.frame_id);
            }
        }
        self.evictions.extend_from_slice(&evicted);
        evicted
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &MemoryEntry> {
        self.entries.iter()
    }

    /// Every frame id evicted so far, in eviction order.
    pub fn evictions(&self) -> &[u64] {
        &self.evictions
    }

    /// Token cost currently held.
    pub fn token_cost(&self) -> f64 {
        self.entries.iter().map(|e| e.token_cost).sum()
    }
}
