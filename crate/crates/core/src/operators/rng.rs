//! Counter-based random streams.
//!
//! A stream is a 64-bit key plus a counter; output `i` is the SplitMix64
//! finalizer applied to `key + i·γ`. Keys are derived from
//! `(master_seed, layer, column)` so every neuron owns an independent,
//! reproducible stream regardless of scheduling.

use rand_core::RngCore;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One SplitMix64 step: bijective on `u64`.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    mix64(x.wrapping_add(GAMMA))
}

/// Combines a seed with an index into a new seed, e.g. one per Monte Carlo trial.
#[inline]
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    key: u64,
    counter: u64,
}

impl RngStream {
    /// The stream owned by neuron `column` of layer `layer`.
    pub fn derive(master_seed: u64, layer: usize, column: usize) -> Self {
        let k = splitmix64(master_seed);
        let k = splitmix64(k ^ (layer as u64).wrapping_mul(0xA076_1D64_78BD_642F));
        let k = splitmix64(k ^ (column as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB));
        Self { key: k, counter: 0 }
    }

    pub fn from_key(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Number of 64-bit words drawn so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_word(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_word() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_word() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_word()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dst)
    }
}
