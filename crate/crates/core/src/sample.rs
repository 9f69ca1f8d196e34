//! Exact seeded sampling of prefixes from the marginal `P_M`.
//!
//! Each bit is drawn with probability `P_M([x0]) / P_M([x])` for a 0, by
//! comparing the exact rational against a lazily generated uniform real one
//! random bit at a time.

use num_bigint::BigInt;
use num_traits::Zero;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ce::CeMeasure;
use crate::dyadic::{BitString, Dyadic};

/// Uniform random bits drawn 64 at a time.
#[derive(Debug, Clone)]
struct BitStream {
    rng: ChaCha8Rng,
    buf: u64,
    left: u32,
}

impl BitStream {
    fn new(seed: u64) -> Self {
        BitStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            buf: 0,
            left: 0,
        }
    }

    fn next_bit(&mut self) -> bool {
        if self.left == 0 {
            self.buf = self.rng.next_u64();
            self.left = 64;
        }
        let b = self.buf & 1 == 1;
        self.buf >>= 1;
        self.left -= 1;
        b
    }

    /// True with probability exactly `num / den` (`0 <= num <= den`, `den > 0`).
    fn bernoulli(&mut self, num: &BigInt, den: &BigInt) -> bool {
        // Compare U = 0.u1u2... with p = num/den digit by digit.
        let mut rem = num.clone();
        loop {
            if rem.is_zero() {
                return false;
            }
            rem <<= 1;
            let p_bit = rem >= *den;
            if p_bit {
                rem -= den;
            }
            let u_bit = self.next_bit();
            if u_bit != p_bit {
                return p_bit;
            }
        }
    }
}

/// Sequential sampler; one instance per seed stream.
#[derive(Debug, Clone)]
pub struct MarginalSampler {
    measure: CeMeasure,
    bits: BitStream,
    prefix: BitString,
    mass: Dyadic,
}

impl MarginalSampler {
    pub fn new(measure: CeMeasure, seed: u64) -> Self {
        let mass = measure.marginal(&BitString::empty());
        MarginalSampler {
            measure,
            bits: BitStream::new(seed),
            prefix: BitString::empty(),
            mass,
        }
    }

    pub fn prefix(&self) -> &BitString {
        &self.prefix
    }

    pub fn next_bit(&mut self) -> bool {
        let zero_child = self.prefix.child(false);
        let zero_mass = self.measure.marginal(&zero_child);
        // common denominator 2^e for both masses
        let e = zero_mass.exponent().max(self.mass.exponent());
        let num = zero_mass.scale_pow2(e as i64);
        let den = self.mass.scale_pow2(e as i64);
        debug_assert!(num.exponent() == 0 && den.exponent() == 0);
        let pick_zero = self.bits.bernoulli(num.numerator(), den.numerator());
        if pick_zero {
            self.prefix = zero_child;
            self.mass = zero_mass;
        } else {
            self.mass = &self.mass - &zero_mass;
            self.prefix.push(true);
        }
        !pick_zero
    }

    /// Extends the sampled prefix to at least `depth` bits.
    pub fn extend_to(&mut self, depth: usize) -> &BitString {
        while self.prefix.len() < depth {
            self.next_bit();
        }
        &self.prefix
    }
}

/// Length-`depth` prefix drawn from `P_M`; identical for identical seeds.
pub fn sample_marginal(mu: &CeMeasure, seed: u64, depth: usize) -> BitString {
    let mut s = MarginalSampler::new(mu.clone(), seed);
    s.extend_to(depth).clone()
}
