//! Reproducible, independently seekable random streams.
//!
//! A stream is identified by `(seed, index)`. The pair is mapped to a ChaCha8
//! key (derived from `seed`) and ChaCha stream number (`index`), so distinct
//! pairs give independent sequences and equal pairs replay identically.
//! Child streams are derived deterministically, which lets Monte Carlo loops
//! hand one stream to each path regardless of thread scheduling.

use rand::{Error as RandError, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct PrngStream {
    seed: u64,
    index: u64,
    rng: ChaCha8Rng,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl PrngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        PrngStream { seed, index, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Child stream `i` of this stream. Depends only on `(seed, index, i)`,
    /// never on how much of the parent has been consumed.
    pub fn derive(&self, i: u64) -> PrngStream {
        let child_seed = splitmix64(self.seed ^ splitmix64(self.index.wrapping_add(0x5851_F42D_4C95_7F2D)));
        PrngStream::new(child_seed, i)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for PrngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.rng.try_fill_bytes(dest)
    }
}
