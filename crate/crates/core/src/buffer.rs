//! Fixed-capacity FIFO memory of `(embedding, score)` pairs and
//! threshold-based positive/negative mining.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::axis::Axis;
use crate::error::{AesaError, Result};

pub const DEFAULT_CAPACITY: usize = 256;
pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct BufferEntry {
    pub embedding: Vec<f64>,
    pub score: f64,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBuffer {
    capacity: usize,
    entries: VecDeque<BufferEntry>,
    next_step: u64,
    pub axis: Axis,
}

/// A mined pair: one entry within ε of the anchor score, one beyond it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinedPair<'a> {
    pub positive: &'a BufferEntry,
    pub negative: &'a BufferEntry,
}

impl MemoryBuffer {
    pub fn new(capacity: usize, axis: Axis) -> Result<Self> {
        if capacity == 0 {
            return Err(AesaError::Config("buffer capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
            next_step: 0,
            axis,
        })
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

    /// Entries, oldest first.
    pub fn entries(&self) -> impl Iterator<Item = &BufferEntry> {
        self.entries.iter()
    }

    /// Append a snapshot, evicting the oldest entry when full.
    pub fn push(&mut self, embedding: Vec<f64>, score: f64) -> Result<()> {
        if let Some(first) = self.entries.front() {
            if first.embedding.len() != embedding.len() {
                return Err(AesaError::Shape(format!(
                    "buffer holds {}-dim embeddings, got {}",
                    first.embedding.len(),
                    embedding.len()
                )));
            }
        }
        if embedding.iter().any(|v| !v.is_finite()) {
            return Err(AesaError::NonFinite("buffer embedding".into()));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(AesaError::InvalidInput(format!(
                "buffer score {score} outside [0, 1]"
            )));
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(BufferEntry {
            embedding,
            score,
            step: self.next_step,
        });
        self.next_step += 1;
        Ok(())
    }

    /// Draw one positive (`|y_a − y| < ε`) and one negative (`|y_a − y| > ε`),
    /// each uniformly among qualifying entries. Entries exactly at ε qualify for
    /// neither. Returns `None` unless both sets are non-empty.
    pub fn sample_triplet(
        &self,
        anchor_score: f64,
        epsilon: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<MinedPair<'_>> {
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for entry in &self.entries {
            let gap = (anchor_score - entry.score).abs();
            if gap < epsilon {
                positives.push(entry);
            } else if gap > epsilon {
                negatives.push(entry);
            }
        }
        if positives.is_empty() || negatives.is_empty() {
            return None;
        }
        let positive = *positives.choose(rng)?;
        let negative = *negatives.choose(rng)?;
        Some(MinedPair { positive, negative })
    }

    /// [`sample_triplet`](Self::sample_triplet) with a generator seeded from `seed`.
    pub fn sample_triplet_seeded(
        &self,
        anchor_score: f64,
        epsilon: f64,
        seed: u64,
    ) -> Option<MinedPair<'_>> {
        self.sample_triplet(anchor_score, epsilon, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}
