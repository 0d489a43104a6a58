//! Counter-based seeded sampling.
//!
//! Every random draw in the crate is a pure function of
//! (seed, stream, counter): SplitMix64 finalizers over the three words.
//! Streams keep independent columns of an experiment independent, so adding
//! a draw to one column never perturbs another, and reports regenerate
//! byte-identically from their recorded seed.

use crate::modular::PrimePowerModulus;

/// SplitMix64 finalizer: the standard 64-bit avalanche mix.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One 64-bit draw from stream `stream` at position `counter`.
pub fn draw(seed: u64, stream: u64, counter: u64) -> u64 {
    mix(mix(seed ^ mix(stream)).wrapping_add(counter.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// A single named stream with an advancing counter. Cheap, `Copy`-free by
/// design: cloning a stream would silently replay draws.
#[derive(Debug)]
pub struct Stream {
    seed: u64,
    stream: u64,
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            seed,
            stream,
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = draw(self.seed, self.stream, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform draw from [0, bound) by rejection; bound > 0.
    pub fn below_u64(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Uniform draw from [0, bound) for bounds up to 2^127, built from two
    /// 64-bit words with rejection.
    pub fn below_u128(&mut self, bound: u128) -> u128 {
        assert!(bound > 0);
        if bound <= u64::MAX as u128 {
            return self.below_u64(bound as u64) as u128;
        }
        let zone = u128::MAX - u128::MAX % bound;
        loop {
            let v = ((self.next_u64() as u128) << 64) | self.next_u64() as u128;
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Uniform unit residue modulo q (nonzero, coprime to p).
    pub fn unit(&mut self, modulus: &PrimePowerModulus) -> u128 {
        loop {
            let v = self.below_u128(modulus.q());
            if v != 0 && modulus.is_unit(v) {
                return v;
            }
        }
    }
}
