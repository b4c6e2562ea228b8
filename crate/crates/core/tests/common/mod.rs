//! Instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rishp::channel::synthesize;
use rishp::rng::{complex_gaussian, trial_stream, Purpose, Stream};
use rishp::{AnalogStructure, CMat, CVec, ChannelSet, SystemConfig, C64};

pub fn desk_config() -> SystemConfig {
    SystemConfig { m: 16, n_rf: 2, k: 2, r: 16, snr_db: -10.0, ..SystemConfig::default() }
}

pub fn single_element_config() -> SystemConfig {
    SystemConfig { m: 1, n_rf: 1, k: 1, r: 1, l_b: 1, l_i: 1, ..SystemConfig::default() }
}

pub fn channels(cfg: &SystemConfig, seed: u64, trial: u64) -> ChannelSet {
    let mut rng = trial_stream(seed, trial, Purpose::Channel);
    synthesize(cfg, &mut rng, false).expect("valid configuration")
}

pub fn stream(seed: u64, trial: u64, slot: u8) -> Stream {
    trial_stream(seed, trial, Purpose::Scheme(slot))
}

pub fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Gaussian matrix rescaled to Frobenius norm `norm`.
pub fn direction<R: Rng + ?Sized>(rows: usize, cols: usize, norm: f64, rng: &mut R) -> CMat {
    let d = gaussian(rows, cols, rng);
    let scale = norm / d.norm();
    d * C64::from(scale)
}

/// `H_I diag(ψ) H_B` by explicit sums.
pub fn cascade_by_sums(h_i: &CMat, psi: &[C64], h_b: &CMat) -> CMat {
    let (k, r) = h_i.shape();
    let m = h_b.ncols();
    CMat::from_fn(k, m, |row, col| (0..r).map(|e| h_i[(row, e)] * psi[e] * h_b[(e, col)]).sum())
}

pub fn column(v: &CVec) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

pub fn structure_slot(s: AnalogStructure) -> u8 {
    match s {
        AnalogStructure::FullyConnected => 0,
        AnalogStructure::PartiallyConnected => 1,
    }
}
