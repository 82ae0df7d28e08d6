//! Seeded randomness shared by every generator in the crate.
//!
//! All randomness flows through [`Pcg64`] (PCG XSL-RR 128/64) seeded with
//! `seed_from_u64`. Integer draws and shuffles are defined here rather than
//! borrowed from `rand`'s distribution code so that golden outputs only depend
//! on the raw 64-bit stream:
//!
//! * `below(n)`: draw `x = next_u64()`, reject while `x >= 2^64 - (2^64 mod n)`,
//!   return `x mod n`.
//! * `unit_f64()`: `(next_u64() >> 11) * 2^-53`, uniform on `[0, 1)`.
//! * `shuffle`: Fisher-Yates from the back, swapping `i` with `below(i + 1)`
//!   for `i = len-1 .. 1`.

use rand::{RngCore, SeedableRng};
pub use rand_pcg::Pcg64;

pub fn seeded(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}

/// Seed for the `index`-th independent sub-stream of `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform integer in `0..n`. Panics if `n == 0`.
pub fn below<R: RngCore + ?Sized>(rng: &mut R, n: u64) -> u64 {
    assert!(n > 0, "below(0)");
    let zone = u64::MAX - (u64::MAX % n + 1) % n;
    loop {
        let x = rng.next_u64();
        if x <= zone {
            return x % n;
        }
    }
}

pub fn below_usize<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    below(rng, n as u64) as usize
}

pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn shuffle<T, R: RngCore + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below_usize(rng, i + 1);
        items.swap(i, j);
    }
}

/// Seeded permutation of `0..n`.
pub fn permutation(seed: u64, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(&mut seeded(seed), &mut idx);
    idx
}
