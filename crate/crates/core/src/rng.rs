//! Reproducible random streams.
//!
//! Every random draw in the engine comes from a stream derived from
//! `(root seed, purpose tag, index)`, so a Monte Carlo trial produces the same
//! numbers no matter which worker thread runs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{CMat, CVec, C64};

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Stream id derived from a root seed, a purpose tag and an index.
pub fn stream_id(seed: u64, purpose: &str, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ tag_hash(purpose)).wrapping_add(splitmix64(index)))
}

/// Independent generator for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: &str, index: u64) -> SimRng {
    SimRng::seed_from_u64(stream_id(seed, purpose, index))
}

/// One draw of CN(0, 1).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Vector of i.i.d. CN(0, 1) entries.
pub fn complex_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| complex_normal(rng))
}

/// Draws `factor * w` with `w ~ CN(0, I)`, i.e. a CN(0, factor factor^H) sample.
pub fn correlated_normal<R: Rng + ?Sized>(rng: &mut R, factor: &CMat) -> CVec {
    factor * complex_normal_vec(rng, factor.ncols())
}
