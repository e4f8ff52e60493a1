//! Seeded, splittable random-number streams.
//!
//! A stream is identified by a `(seed, stream_id)` pair and backed by its own
//! Xoshiro256++ state. The 256-bit state is
//! `[m(seed), m(stream_id), m(m(seed) ^ A), m(m(stream_id) ^ B)]` with
//! `m = splitmix64`, which is injective in the pair, so distinct pairs never
//! start from the same state.
//!
//! Child streams are derived with [`RngStream::derive`]: the child keeps the
//! parent's seed and takes `splitmix64(parent_id ^ splitmix64(index + 1))` as
//! its stream id. The derivation depends only on the parent identity and the
//! index, never on how many values the parent has produced, so per-replicate
//! and per-chain streams are the same regardless of scheduling or thread
//! count.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const STATE_SALT_A: u64 = 0x6A09_E667_F3BC_C908;
const STATE_SALT_B: u64 = 0xBB67_AE85_84CA_A73B;

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: Xoshiro256PlusPlus,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let w0 = splitmix64(seed);
        let w1 = splitmix64(stream_id);
        let words = [
            w0,
            w1,
            splitmix64(w0 ^ STATE_SALT_A),
            splitmix64(w1 ^ STATE_SALT_B),
        ];
        let mut bytes = [0u8; 32];
        for (chunk, w) in bytes.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        let inner = Xoshiro256PlusPlus::from_seed(bytes);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Fresh child stream for `index`, independent of this stream's position.
    pub fn derive(&self, index: u64) -> RngStream {
        let id = splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(1)));
        RngStream::new(self.seed, id)
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
