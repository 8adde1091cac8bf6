//! Seeded, substreamed random number generation.
//!
//! All stochastic state in a run derives from a single 64-bit seed plus a
//! stream id. Substreams are independent ChaCha8 keystreams, so parallel
//! workers can draw from disjoint streams without coordination and the
//! output never depends on worker count or evaluation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Well-known stream ids, one per consumer of randomness.
pub mod streams {
    pub const POINTING: u64 = 1;
    pub const SCINTILLATION: u64 = 2;
    pub const WEATHER: u64 = 3;
    pub const THROUGHPUT_DITHER: u64 = 4;
    /// Base id for per-sweep-point receiver noise; point index is added.
    pub const SWEEP_NOISE: u64 = 1_000;
    /// Base id for per-sweep-point payloads; point index is added.
    pub const SWEEP_PAYLOAD: u64 = 2_000;
    /// Base id for crosstalk interferer payloads; point index is added.
    pub const SWEEP_INTERFERER: u64 = 3_000;
}

/// Handle naming one deterministic random substream.
///
/// Identical `(seed, stream_id)` always reproduces the identical keystream;
/// the raw integer stream is bit-stable across platforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Derive the substream with the given id from the same seed.
    pub fn substream(&self, stream_id: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id,
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Two independent standard-normal draws addressed by sample index.
    ///
    /// Each index consumes exactly four 32-bit keystream words, so draws are
    /// random-access: the value at index `i` never depends on which other
    /// indices were sampled.
    pub fn gaussian_pair(&self, index: u64) -> (f64, f64) {
        let mut rng = self.rng();
        rng.set_word_pos(index as u128 * 4);
        let u1 = ((rng.next_u64() >> 11) + 1) as f64 * 2f64.powi(-53);
        let u2 = (rng.next_u64() >> 11) as f64 * 2f64.powi(-53);
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        (radius * angle.cos(), radius * angle.sin())
    }

    /// Uniform draw in `[0, 1)` addressed by sample index.
    pub fn uniform(&self, index: u64) -> f64 {
        let mut rng = self.rng();
        rng.set_word_pos(index as u128 * 4);
        (rng.next_u64() >> 11) as f64 * 2f64.powi(-53)
    }
}
