//! Seed streams.
//!
//! All randomness in the toolkit flows from one `u64` master seed. A
//! [`SeedStream`] is split by integer stream index (iteration, channel, fold,
//! epoch, ...) into child streams whose seeds are a SplitMix64 mix of the
//! parent seed and the index, and each stream drives a ChaCha8 generator.
//! Both primitives are fully specified, so results do not depend on the
//! thread schedule or on the platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream `index`; distinct indices give unrelated streams.
    pub fn split(&self, index: u64) -> Self {
        let child = mix64(self.seed ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN)));
        Self { seed: child }
    }

    /// Child stream keyed by a label, for readability at call sites.
    pub fn named(&self, label: &str) -> Self {
        let h = label
            .bytes()
            .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01B3));
        self.split(h)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}
