use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Inclusive range of per-message delays, in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DelayRange {
    pub min: u64,
    pub max: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("delay range [{min},{max}] is empty")]
pub struct DelayError {
    pub min: u64,
    pub max: u64,
}

impl DelayRange {
    pub fn new(min: u64, max: u64) -> Result<Self, DelayError> {
        if min > max {
            return Err(DelayError { min, max });
        }
        Ok(DelayRange { min, max })
    }
}

impl Default for DelayRange {
    fn default() -> Self {
        DelayRange { min: 1, max: 10 }
    }
}

/// Reliable FIFO point-to-point channels with seeded random delays.
///
/// Each directed channel owns an independent stream of the same seed, so
/// changing traffic on one channel never perturbs delays on another.
#[derive(Debug, Clone)]
pub struct Network {
    n: usize,
    default: DelayRange,
    overrides: BTreeMap<(usize, usize), DelayRange>,
    rngs: Vec<ChaCha8Rng>,
    last_arrival: Vec<u64>,
}

impl Network {
    pub fn new(
        n: usize,
        seed: u64,
        default: DelayRange,
        overrides: BTreeMap<(usize, usize), DelayRange>,
    ) -> Self {
        let rngs = (0..n * n)
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c as u64);
                rng
            })
            .collect();
        Network {
            n,
            default,
            overrides,
            rngs,
            last_arrival: vec![0; n * n],
        }
    }

    pub fn delay_range(&self, from: usize, to: usize) -> DelayRange {
        self.overrides
            .get(&(from, to))
            .copied()
            .unwrap_or(self.default)
    }

    /// Arrival time of a message sent now. Never earlier than the previous
    /// message on the same channel; the caller breaks ties by send order.
    pub fn schedule(&mut self, from: usize, to: usize, now: u64) -> u64 {
        let c = from * self.n + to;
        let range = self.delay_range(from, to);
        let d = self.rngs[c].gen_range(range.min..=range.max);
        let at = (now + d).max(self.last_arrival[c]);
        self.last_arrival[c] = at;
        at
    }
}
