use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use crate::prototype::Prototype;

/// Limits on what a peer queue may hold. `None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QueuePolicy {
    pub max_sets: Option<usize>,
    pub max_prototypes: Option<usize>,
}

/// A received prototype set; `remaining` indexes the prototypes not yet
/// consumed, so recipients can share one snapshot allocation.
#[derive(Debug, Clone)]
struct Batch {
    source: Arc<[Prototype]>,
    remaining: Vec<u32>,
}

/// LIFO stack of prototype batches received from one neighbour.
#[derive(Debug, Clone, Default)]
pub struct PeerQueue {
    // back is the top of the stack
    batches: VecDeque<Batch>,
    total: usize,
    policy: QueuePolicy,
}

impl PeerQueue {
    pub fn new(policy: QueuePolicy) -> Self {
        Self {
            batches: VecDeque::new(),
            total: 0,
            policy,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Prototypes waiting across all batches.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn batch_count(&self) -> usize {
        self.batches.len()
    }

    /// Sizes of the stored batches, bottom first.
    pub fn batch_sizes(&self) -> Vec<usize> {
        self.batches.iter().map(|b| b.remaining.len()).collect()
    }

    fn evict_oldest(&mut self) {
        if let Some(old) = self.batches.pop_front() {
            self.total -= old.remaining.len();
        }
    }

    /// Pushes a batch on top, then evicts from the bottom until the policy
    /// holds. A batch larger than the prototype cap is truncated to it.
    pub fn push(&mut self, batch: Arc<[Prototype]>) {
        if batch.is_empty() {
            return;
        }
        let mut remaining: Vec<u32> = (0..batch.len() as u32).collect();
        if let Some(cap) = self.policy.max_prototypes {
            remaining.truncate(cap);
        }
        if let Some(max_sets) = self.policy.max_sets {
            while self.batches.len() >= max_sets.max(1) {
                self.evict_oldest();
            }
        }
        self.total += remaining.len();
        self.batches.push_back(Batch {
            source: batch,
            remaining,
        });
        if let Some(cap) = self.policy.max_prototypes {
            while self.total > cap && self.batches.len() > 1 {
                self.evict_oldest();
            }
        }
    }

    /// Removes a uniformly random prototype from the top batch.
    pub fn pop_random<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Prototype> {
        let top = self.batches.back_mut()?;
        let k = rng.random_range(0..top.remaining.len());
        let index = top.remaining.swap_remove(k) as usize;
        let proto = top.source[index].clone();
        if top.remaining.is_empty() {
            self.batches.pop_back();
        }
        self.total -= 1;
        Some(proto)
    }
}
