//! Seeded random streams.
//!
//! Every trial owns a family of ChaCha8 streams keyed by the master seed and
//! the trial index. Stream 0 of a trial feeds the channel synthesizer; each
//! scheme draws its initialization from its own stream, so adding or removing
//! a scheme never shifts another scheme's draws.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::C64;

pub type Stream = ChaCha8Rng;

/// What a stream is used for within a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Channel,
    /// Initialization for the scheme with the given slot index.
    Scheme(u8),
}

/// Stream for `purpose` in trial `trial`, derived only from the master seed
/// and the trial index.
pub fn trial_stream(master_seed: u64, trial: u64, purpose: Purpose) -> Stream {
    let slot = match purpose {
        Purpose::Channel => 0u64,
        Purpose::Scheme(i) => 1 + u64::from(i),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((trial << 8) | slot);
    rng
}

/// Circularly-symmetric complex Gaussian sample with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Phase uniform on `[0, 2π)`.
pub fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>() * TAU
}
