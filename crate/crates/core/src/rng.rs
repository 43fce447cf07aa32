//! SplitMix64 random streams.
//!
//! Every noise draw in a generated corpus comes from a [`RandomStream`]
//! derived from `(master_seed, condition_ordinal, image_index)`, so the bytes
//! of any perturbed image can be reproduced in isolation and in any language
//! that implements the same three formulas below.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const IMAGE_STRIDE: u64 = 0xC2B2_AE3D_27D4_EB4F;

/// 2^-53, the spacing of the uniform grid produced by [`RandomStream::next_f64`].
pub const UNIT_EPSILON: f64 = 1.0 / (1u64 << 53) as f64;

/// The SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A SplitMix64 sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomStream {
    state: u64,
}

impl RandomStream {
    pub fn from_state(state: u64) -> Self {
        Self { state }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * UNIT_EPSILON
    }
}

/// Stream for one `(condition, image)` pair of a corpus.
pub fn derive_stream(master_seed: u64, condition_ordinal: u64, image_index: u64) -> RandomStream {
    let seed = master_seed
        ^ condition_ordinal.wrapping_mul(GOLDEN_GAMMA)
        ^ image_index.wrapping_mul(IMAGE_STRIDE);
    RandomStream::from_state(mix64(seed))
}
