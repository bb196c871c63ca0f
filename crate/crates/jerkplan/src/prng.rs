//! Deterministic pseudo-random numbers for the seeded instance generators.
//!
//! SplitMix64: a 64-bit Weyl sequence passed through a finalizing mix. Two
//! multiplies and three xor-shifts per draw, full 2⁶⁴ period, and identical
//! streams on every platform, which is all the generators need.

/// SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Next 64 uniform bits.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw from the half-open interval (0, 1].
    ///
    /// The top 53 bits are shifted down and offset by one so 0 is excluded;
    /// generators use draws as scale factors that must stay positive.
    pub fn next_unit(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) / (1u64 << 53) as f64
    }

    /// Uniform draw from (lo, hi].
    pub fn next_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }

    /// Uniform integer from 0..bound (bound > 0) by multiply-shift.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }
}
