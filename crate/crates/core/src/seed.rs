//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed with the
//! stream id selecting an independent 64-bit stream. Two streams with the
//! same `(master_seed, stream_id)` produce identical sequences regardless of
//! which thread consumes them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.master_seed;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Stream `index` of the same master seed.
    pub fn stream(&self, index: u64) -> Self {
        Self { master_seed: self.master_seed, stream_id: index }
    }

    /// Stream for block `b` of a blocked loop. Blocks of different
    /// `stream_id`s never share a stream.
    pub fn block(&self, b: usize) -> Self {
        self.derive(0).stream(b as u64)
    }

    /// A child seed whose streams do not overlap with the parent's. `tag`
    /// distinguishes siblings (censoring, bootstrap, generation...).
    pub fn derive(&self, tag: u64) -> Self {
        let mut state = self.master_seed ^ self.stream_id.rotate_left(29) ^ tag.wrapping_mul(0xA24B_AED4_963E_E407);
        let master_seed = splitmix64(&mut state) ^ splitmix64(&mut state).rotate_left(17);
        Self { master_seed, stream_id: 0 }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Tags for [`SeedSpec::derive`].
pub mod tags {
    pub const GENERATE: u64 = 1;
    pub const CENSOR: u64 = 2;
    pub const BOOTSTRAP: u64 = 3;
    pub const RESAMPLE: u64 = 4;
}
