//! Reproducible per-trial random streams.
//!
//! Every path owns a ChaCha8 stream selected by `(seed, stream)`; the main
//! increments are drawn from it in step order. Sub-step refinements draw
//! from a second key family, positioned by step index, so whether a step is
//! refined never shifts the main increments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const MAIN_TAG: u8 = 0x4d;
const BRIDGE_TAG: u8 = 0x42;

/// Stream id for trial `trial` of sweep cell `cell`.
#[inline]
pub fn stream_id(cell: u32, trial: u32) -> u64 {
    (u64::from(cell) << 32) | u64::from(trial)
}

fn key(seed: u64, tag: u8) -> [u8; 32] {
    let mut k = [0u8; 32];
    k[..8].copy_from_slice(&seed.to_le_bytes());
    k[31] = tag;
    k
}

/// Random source for one simulated path.
#[derive(Debug, Clone)]
pub struct PathRng {
    main: ChaCha8Rng,
    bridge: ChaCha8Rng,
}

impl PathRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut main = ChaCha8Rng::from_seed(key(seed, MAIN_TAG));
        main.set_stream(stream);
        let mut bridge = ChaCha8Rng::from_seed(key(seed, BRIDGE_TAG));
        bridge.set_stream(stream);
        PathRng { main, bridge }
    }

    /// Next standard normal of the main sequence.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.main.sample(StandardNormal)
    }

    /// Positions the refinement generator at the block reserved for `step`.
    pub fn start_bridge(&mut self, step: u64) {
        self.bridge.set_word_pos(u128::from(step) << 32);
    }

    /// Next standard normal of the current step's refinement block.
    #[inline]
    pub fn bridge_normal(&mut self) -> f64 {
        self.bridge.sample(StandardNormal)
    }
}
