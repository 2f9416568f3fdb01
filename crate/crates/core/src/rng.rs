//! Deterministic RNG substreams.
//!
//! Every random draw in the simulator comes from a ChaCha stream keyed by
//! `(seed, setup, trial, purpose)`, so results do not depend on the order or
//! thread in which setups and trials are processed.

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c64, C64, CVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Geometry = 1,
    Trial = 2,
    Oracle = 3,
}

pub fn substream(seed: u64, setup: u64, trial: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&setup.to_le_bytes());
    key[16..24].copy_from_slice(&trial.to_le_bytes());
    key[24..].copy_from_slice(&(purpose as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// One draw of `CN(0, 1)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| complex_normal(rng))
}
