//! Configuration and the domain types shared by every other module.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{CMat, CVec};

/// Analog front-end wiring at the base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum AnalogStructure {
    /// Every RF chain drives every antenna through a phase shifter.
    #[default]
    FullyConnected,
    /// RF chain `n` drives only its own block of `M / N_RF` antennas.
    PartiallyConnected,
}

/// Scalar parameters of one simulated link.
///
/// Field names in config files match the serialized names (`M`, `N_RF`, `K`,
/// `R`, `L_B`, `L_I`, `P`, `snr_db`, ...). Missing keys fall back to
/// [`SystemConfig::default`], which is the `M = 48`, `N_RF = K = 6`,
/// `R = 100` setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Base-station antenna count.
    #[serde(rename = "M")]
    pub m: usize,
    /// RF chains at the base station.
    #[serde(rename = "N_RF")]
    pub n_rf: usize,
    /// Single-antenna users.
    #[serde(rename = "K")]
    pub k: usize,
    /// RIS reflecting elements; must be a perfect square.
    #[serde(rename = "R")]
    pub r: usize,
    /// Propagation paths on the BS-RIS link.
    #[serde(rename = "L_B")]
    pub l_b: usize,
    /// Propagation paths on each RIS-UE link (also used for the direct link).
    #[serde(rename = "L_I")]
    pub l_i: usize,
    /// Total transmit power, linear.
    #[serde(rename = "P")]
    pub p: f64,
    /// SNR in dB; the noise variance is derived from it.
    pub snr_db: f64,
    /// Element spacing in wavelengths.
    pub d_over_lambda: f64,
    pub analog_structure: AnalogStructure,
    pub seed: u64,
    pub max_iters: usize,
    /// Relative change in the modified MSE below which iteration stops.
    pub tol: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            m: 48,
            n_rf: 6,
            k: 6,
            r: 100,
            l_b: 5,
            l_i: 5,
            p: 1.0,
            snr_db: -10.0,
            d_over_lambda: 0.5,
            analog_structure: AnalogStructure::FullyConnected,
            seed: 0,
            max_iters: 200,
            tol: 1e-5,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("K ≤ N_RF violated: K = {k}, N_RF = {n_rf}")]
    UsersExceedRfChains { k: usize, n_rf: usize },
    #[error("N_RF ≤ M violated: N_RF = {n_rf}, M = {m}")]
    RfChainsExceedAntennas { n_rf: usize, m: usize },
    #[error("{name} must be at least 1")]
    ZeroCount { name: &'static str },
    #[error("R not a perfect square: R = {0}")]
    RisNotSquare(usize),
    #[error("partially-connected structure requires N_RF to divide M: M = {m}, N_RF = {n_rf}")]
    BlocksDoNotDivide { m: usize, n_rf: usize },
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be finite, got {value}")]
    NotFinite { name: &'static str, value: f64 },
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
}

fn positive(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::NotPositive { name, value })
    }
}

/// Returns `Some(√n)` when `n` is a perfect square.
pub fn exact_sqrt(n: usize) -> Option<usize> {
    let root = n.isqrt();
    (root * root == n).then_some(root)
}

/// Checks every invariant of `cfg` and hands it back unchanged.
pub fn validate_config(cfg: SystemConfig) -> Result<SystemConfig, ConfigError> {
    for (name, value) in [
        ("M", cfg.m),
        ("N_RF", cfg.n_rf),
        ("K", cfg.k),
        ("R", cfg.r),
        ("L_B", cfg.l_b),
        ("L_I", cfg.l_i),
        ("max_iters", cfg.max_iters),
    ] {
        if value == 0 {
            return Err(ConfigError::ZeroCount { name });
        }
    }
    if cfg.k > cfg.n_rf {
        return Err(ConfigError::UsersExceedRfChains { k: cfg.k, n_rf: cfg.n_rf });
    }
    if cfg.n_rf > cfg.m {
        return Err(ConfigError::RfChainsExceedAntennas { n_rf: cfg.n_rf, m: cfg.m });
    }
    if exact_sqrt(cfg.r).is_none() {
        return Err(ConfigError::RisNotSquare(cfg.r));
    }
    if cfg.analog_structure == AnalogStructure::PartiallyConnected && cfg.m % cfg.n_rf != 0 {
        return Err(ConfigError::BlocksDoNotDivide { m: cfg.m, n_rf: cfg.n_rf });
    }
    positive("P", cfg.p)?;
    positive("d_over_lambda", cfg.d_over_lambda)?;
    positive("tol", cfg.tol)?;
    if !cfg.snr_db.is_finite() {
        return Err(ConfigError::NotFinite { name: "snr_db", value: cfg.snr_db });
    }
    Ok(cfg)
}

/// Noise variance for an SNR defined as `10 log10(1 / (K σ²))`.
pub fn noise_variance(snr_db: f64, k: usize) -> f64 {
    assert!(k >= 1, "noise_variance needs at least one user");
    10f64.powf(-snr_db / 10.0) / k as f64
}

impl SystemConfig {
    pub fn noise_variance(&self) -> f64 {
        noise_variance(self.snr_db, self.k)
    }

    pub fn budget(&self) -> LinkBudget {
        LinkBudget { power: self.p, users: self.k, noise_var: self.noise_variance() }
    }

    /// Parses a flat `key = value` config; absent keys keep their defaults.
    pub fn from_kv_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_kv_str(&text)
    }
}

/// Power, user count and noise variance: the scalars every objective needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub power: f64,
    pub users: usize,
    pub noise_var: f64,
}

impl LinkBudget {
    pub fn new(power: f64, users: usize, noise_var: f64) -> Self {
        Self { power, users, noise_var }
    }

    /// `P / K`, the per-stream power.
    pub fn stream_power(&self) -> f64 {
        self.power / self.users as f64
    }

    /// `K σ² / P`, the diagonal loading of the regularized Gram matrix.
    pub fn loading(&self) -> f64 {
        self.users as f64 * self.noise_var / self.power
    }
}

/// One channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// RIS-BS channel, `R x M`.
    pub h_b: CMat,
    /// RIS-UE channels, `K x R`; row `k` is `h_{I_k}^H`.
    pub h_i: CMat,
    /// Direct BS-UE channel, `K x M`. Only the no-RIS baseline reads it.
    pub h_d: Option<CMat>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelShapeError {
    #[error("H_I has {cols} columns but H_B has {rows} rows")]
    RisMismatch { rows: usize, cols: usize },
    #[error("H_D is {rows}x{cols}, expected {k}x{m}")]
    DirectMismatch { rows: usize, cols: usize, k: usize, m: usize },
    #[error("{0} contains a non-finite entry")]
    NonFinite(&'static str),
}

impl ChannelSet {
    pub fn new(h_b: CMat, h_i: CMat, h_d: Option<CMat>) -> Result<Self, ChannelShapeError> {
        if h_i.ncols() != h_b.nrows() {
            return Err(ChannelShapeError::RisMismatch { rows: h_b.nrows(), cols: h_i.ncols() });
        }
        if let Some(d) = &h_d {
            if d.nrows() != h_i.nrows() || d.ncols() != h_b.ncols() {
                return Err(ChannelShapeError::DirectMismatch {
                    rows: d.nrows(),
                    cols: d.ncols(),
                    k: h_i.nrows(),
                    m: h_b.ncols(),
                });
            }
        }
        let finite = |m: &CMat| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite(&h_b) {
            return Err(ChannelShapeError::NonFinite("H_B"));
        }
        if !finite(&h_i) {
            return Err(ChannelShapeError::NonFinite("H_I"));
        }
        if h_d.as_ref().is_some_and(|d| !finite(d)) {
            return Err(ChannelShapeError::NonFinite("H_D"));
        }
        Ok(Self { h_b, h_i, h_d })
    }

    pub fn antennas(&self) -> usize {
        self.h_b.ncols()
    }

    pub fn elements(&self) -> usize {
        self.h_b.nrows()
    }

    pub fn users(&self) -> usize {
        self.h_i.nrows()
    }

    /// `H_I · diag(psi) · H_B`.
    pub fn cascade(&self, psi: &CVec) -> CMat {
        cascade(&self.h_i, psi, &self.h_b)
    }

    /// Hash of every entry's bit pattern; equal realizations hash equally.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        for m in [Some(&self.h_b), Some(&self.h_i), self.h_d.as_ref()].into_iter().flatten() {
            (m.nrows(), m.ncols()).hash(&mut hasher);
            for z in m.iter() {
                z.re.to_bits().hash(&mut hasher);
                z.im.to_bits().hash(&mut hasher);
            }
        }
        hasher.finish()
    }
}

/// `H_I · diag(psi) · H_B` without forming the diagonal matrix.
pub fn cascade(h_i: &CMat, psi: &CVec, h_b: &CMat) -> CMat {
    let mut scaled = h_i.clone();
    for (mut col, p) in scaled.column_iter_mut().zip(psi.iter()) {
        col *= *p;
    }
    scaled * h_b
}

/// Output of the alternating design after the final normalization.
///
/// For fully-digital schemes `f_rf` is the `M x M` identity and `f_bb` holds
/// the whole `M x K` precoder. `psi` is `None` when no RIS is in the link.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSolution {
    pub f_rf: CMat,
    pub f_bb: CMat,
    /// Digital precoder before dividing out `zeta`.
    pub f_bb_bar: CMat,
    pub psi: Option<CVec>,
    pub zeta: f64,
}

impl PrecoderSolution {
    /// The overall transmit precoder `F_RF · F_BB`.
    pub fn precoder(&self) -> CMat {
        &self.f_rf * &self.f_bb
    }

    /// `F_RF · F̄_BB`, the precoder the modified MSE is evaluated at.
    pub fn scaled_precoder(&self) -> CMat {
        &self.f_rf * &self.f_bb_bar
    }

    /// Channel seen by the precoder: the cascade through the RIS, or the
    /// direct link when no RIS is present.
    pub fn effective_channel(&self, channels: &ChannelSet) -> Option<CMat> {
        match &self.psi {
            Some(psi) => Some(channels.cascade(psi)),
            None => channels.h_d.clone(),
        }
    }
}

/// Objective values and step sizes recorded for one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub mse_after_digital: f64,
    pub mse_after_analog: f64,
    pub mse_after_ris: f64,
    /// `None` when the analog step was skipped.
    pub alpha_analog: Option<f64>,
    /// `None` when the RIS step was skipped.
    pub alpha_ris: Option<f64>,
    /// Largest constraint violation across the analog precoder and RIS.
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_mse(&self) -> Option<f64> {
        self.records.last().map(|r| r.mse_after_ris)
    }

    /// Every modified-MSE value in evaluation order: digital, analog and RIS
    /// for each iteration.
    pub fn mse_sequence(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().flat_map(|r| [r.mse_after_digital, r.mse_after_analog, r.mse_after_ris])
    }

    /// Largest increase between consecutive entries of [`Self::mse_sequence`].
    /// Non-positive for a monotone trace.
    pub fn max_increase(&self) -> f64 {
        let values: Vec<f64> = self.mse_sequence().collect();
        values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Writes one JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for record in &self.records {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let records =
            text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { records, converged: false })
    }

    /// Appends `other`, renumbering its iterations to follow this trace.
    pub fn extend(&mut self, other: IterationTrace) {
        let offset = self.records.len();
        self.records.extend(other.records.into_iter().map(|mut r| {
            r.iter += offset;
            r
        }));
        self.converged = other.converged;
    }
}
