//! Deterministic random numbers, version 1.
//!
//! Every random draw in the crate goes through [`DetRng`] so that runs are
//! reproducible from a single 64-bit seed, independently of platform, thread
//! count or the `rand` ecosystem's algorithm choices. The derivations below
//! are part of the output contract; changing any of them changes results.
//!
//! * Generator: SplitMix64 (Steele, Lea & Flood 2014), state initialized to
//!   the seed verbatim. Each `next_u64` adds `0x9e3779b97f4a7c15` to the state
//!   and applies the finalizer `z ^= z >> 30; z *= 0xbf58476d1ce4e5b9;
//!   z ^= z >> 27; z *= 0x94d049bb133111eb; z ^= z >> 31`.
//! * Unit float: `(next_u64 >> 11) * 2^-53`, uniform on `[0, 1)`.
//! * Bounded integer `below(n)`: high 64 bits of the 128-bit product
//!   `next_u64 * n`.
//! * Standard normal: one Box-Muller pair per draw, `u1 = 1 - unit()`,
//!   `u2 = unit()`, result `sqrt(-2 ln u1) * cos(2 pi u2)`; the sine half is
//!   discarded.
//! * Instance seed: `SplitMix64(global ^ fnv1a64(id_bytes)).next_u64`, with
//!   64-bit FNV-1a over the UTF-8 bytes of the instance id.

use core::hash::Hasher;

use fnv::FnvHasher;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

/// Version tag of the derivations documented above.
pub const RNG_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct DetRng(SplitMix64);

impl DetRng {
    pub fn new(seed: u64) -> Self {
        Self(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` by multiply-shift. `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Seed for one instance, derived from the run seed and the instance id so
/// that results do not depend on evaluation order.
pub fn instance_seed(global_seed: u64, instance_id: &str) -> u64 {
    DetRng::new(global_seed ^ fnv1a64(instance_id.as_bytes())).next_u64()
}
