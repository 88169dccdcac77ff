//! Minibatching and optimizer settings shared by local and standalone training.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

pub const DEFAULT_BATCH: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { lr: 0.01, momentum: 0.9, batch_size: DEFAULT_BATCH }
    }
}

impl TrainParams {
    pub fn with_lr(self, lr: f64) -> Self {
        Self { lr, ..self }
    }
}

/// Step-decay learning rate: `base · factor^k` once `k` milestones have passed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    /// Rounds at which the rate is multiplied by `factor`.
    pub milestones: Vec<usize>,
    pub factor: f64,
}

impl LrSchedule {
    pub fn constant(base: f64) -> Self {
        Self { base, milestones: Vec::new(), factor: 1.0 }
    }

    /// Milestones given as fractions of the round budget.
    pub fn from_fractions(base: f64, fractions: &[f64], factor: f64, rounds: usize) -> Result<Self> {
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config("learning-rate milestones must be fractions in [0, 1]".into()));
        }
        let milestones = fractions.iter().map(|f| (f * rounds as f64).round() as usize).collect();
        Ok(Self { base, milestones, factor })
    }

    pub fn at(&self, round: usize) -> f64 {
        let passed = self.milestones.iter().filter(|&&m| round >= m).count();
        self.base * self.factor.powi(passed as i32)
    }
}

/// One local iteration's sample indices: the whole shard when it fits in a
/// batch, otherwise `batch` distinct indices drawn at random.
pub fn sample_batch(n: usize, batch: usize, rng: &mut Rng) -> Vec<usize> {
    if n <= batch {
        (0..n).collect()
    } else {
        let mut idx = index::sample(rng, n, batch).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// One shuffled pass over `n` samples in batches of at most `batch`.
pub fn minibatches(n: usize, batch: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    if n <= batch {
        return vec![(0..n).collect()];
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch).map(<[usize]>::to_vec).collect()
}
