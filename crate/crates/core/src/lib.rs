//! Joint hybrid analog-digital precoding and RIS phase-shift design for
//! RIS-aided multi-user mmWave downlinks.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: system configuration, validation and the shared domain types.
//! - [`channel`]: geometric mmWave channel synthesis (ULA at the base station,
//!   UPA at the RIS) plus a lossless text dump format.
//! - [`solver`]: the modified-MSE objective, the closed-form digital precoder,
//!   gradient-projection updates for the analog precoder and the RIS phases,
//!   and the alternating driver.
//! - [`baselines`]: fully-digital and fixed/no-RIS comparison schemes.
//! - [`metrics`]: per-user SINR, sum spectral efficiency and the receive MSE.
//! - [`harness`]: seeded Monte-Carlo sweeps and CSV/JSON reports.

pub mod baselines;
pub mod channel;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod solver;

pub use model::{
    AnalogStructure, ChannelSet, ConfigError, IterationRecord, IterationTrace, LinkBudget, PrecoderSolution,
    SystemConfig,
};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
