//! Monte-Carlo sweeps over the RIS size or the SNR.
//!
//! Trial `t` draws one channel realization from its own stream and every
//! requested scheme runs on that same realization (paired comparison). Each
//! scheme initializes from a separate stream of the trial, so the scheme set
//! does not influence any individual scheme's result. Trials run in
//! parallel; results are collected in trial order before aggregation, so
//! reports are byte-stable for a fixed spec and config.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{run_baseline, BaselineKind, SchemeRun};
use crate::channel::{synthesize, ChannelError};
use crate::metrics::link_metrics;
use crate::model::{validate_config, AnalogStructure, ChannelSet, ConfigError, SystemConfig};
use crate::rng::{trial_stream, Purpose};
use crate::solver::{mse_bar, run_algorithm1, SolverError};

pub const ARTIFACT_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub const CSV_HEADER: &str = "sweep_var,sweep_value,scheme,mean_se,stderr_se,mean_mse,mean_iters,trials";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ProposedFull,
    ProposedPcs,
    UpBound,
    FdBsOptRis,
    HpBsRndRis,
    HpBsNoRis,
}

impl Scheme {
    pub const ALL: [Scheme; 6] =
        [Self::ProposedFull, Self::ProposedPcs, Self::UpBound, Self::FdBsOptRis, Self::HpBsRndRis, Self::HpBsNoRis];

    pub fn name(self) -> &'static str {
        match self {
            Self::ProposedFull => "proposed-full",
            Self::ProposedPcs => "proposed-pcs",
            Self::UpBound => "up-bound",
            Self::FdBsOptRis => "fd-bs-opt-ris",
            Self::HpBsRndRis => "hp-bs-rnd-ris",
            Self::HpBsNoRis => "hp-bs-no-ris",
        }
    }

    /// Fixed stream slot; independent of which other schemes run.
    fn slot(self) -> u8 {
        self as u8
    }

    fn baseline(self) -> Option<BaselineKind> {
        match self {
            Self::UpBound => Some(BaselineKind::UpBound),
            Self::FdBsOptRis => Some(BaselineKind::FdBsOptRis),
            Self::HpBsRndRis => Some(BaselineKind::HpBsRndRis),
            Self::HpBsNoRis => Some(BaselineKind::HpBsNoRis),
            Self::ProposedFull | Self::ProposedPcs => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|scheme| scheme.name() == s).ok_or_else(|| format!("unknown scheme '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    R,
    #[serde(rename = "SNR")]
    Snr,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            Self::R => "R",
            Self::Snr => "SNR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub var: SweepVar,
    pub values: Vec<f64>,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
}

impl SweepSpec {
    /// RIS sizes from 16 to 100 (perfect squares only) at the config's SNR.
    pub fn default_r(trials: usize, seed: u64) -> Self {
        Self {
            var: SweepVar::R,
            values: vec![16.0, 25.0, 36.0, 49.0, 64.0, 81.0, 100.0],
            trials,
            schemes: Scheme::ALL.to_vec(),
            seed,
        }
    }

    /// SNR from −30 dB to 0 dB in 5 dB steps.
    pub fn default_snr(trials: usize, seed: u64) -> Self {
        Self {
            var: SweepVar::Snr,
            values: (0..=6).map(|i| -30.0 + 5.0 * i as f64).collect(),
            trials,
            schemes: Scheme::ALL.to_vec(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::InvalidSpec("trial count must be at least 1".into()));
        }
        if self.values.is_empty() {
            return Err(HarnessError::InvalidSpec("no sweep values".into()));
        }
        if self.schemes.is_empty() {
            return Err(HarnessError::InvalidSpec("no schemes selected".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) || self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HarnessError::InvalidSpec("sweep values must be finite and strictly increasing".into()));
        }
        if self.var == SweepVar::R && self.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(HarnessError::InvalidSpec("RIS sizes must be positive integers".into()));
        }
        Ok(())
    }

    /// Config for one sweep point.
    pub fn point_config(&self, cfg: &SystemConfig, value: f64) -> SystemConfig {
        let mut point = cfg.clone();
        match self.var {
            SweepVar::R => point.r = value as usize,
            SweepVar::Snr => point.snr_db = value,
        }
        point.seed = self.seed;
        point
    }
}

/// One scheme on one trial at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_value: f64,
    pub trial: usize,
    pub scheme: Scheme,
    pub channel_fingerprint: u64,
    /// `None` when the scheme failed on this trial.
    pub outcome: Option<TrialOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub se: f64,
    pub mse_bar: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub mean_se: Option<f64>,
    pub stderr_se: Option<f64>,
    pub mean_mse: Option<f64>,
    pub mean_iters: Option<f64>,
    /// Trials that completed and entered the averages.
    pub trials: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub trials: usize,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub config: SystemConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub sweep_var: SweepVar,
    pub points: Vec<PointSummary>,
    pub provenance: Provenance,
}

impl SweepReport {
    pub fn point(&self, value: f64, scheme: Scheme) -> Option<&PointSummary> {
        self.points.iter().find(|p| p.sweep_value == value && p.scheme == scheme)
    }
}

/// Runs `scheme` on one realization.
pub fn run_scheme<R: rand::Rng + ?Sized>(
    scheme: Scheme,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<SchemeRun, SolverError> {
    let with_structure = |structure| SystemConfig { analog_structure: structure, ..cfg.clone() };
    match scheme {
        Scheme::ProposedFull => run_algorithm1(channels, &with_structure(AnalogStructure::FullyConnected), rng),
        Scheme::ProposedPcs => run_algorithm1(channels, &with_structure(AnalogStructure::PartiallyConnected), rng),
        other => run_baseline(other.baseline().expect("non-proposed schemes are baselines"), channels, cfg, rng),
    }
}

fn evaluate(
    scheme: Scheme,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    trial: usize,
) -> Result<TrialOutcome, SolverError> {
    let mut rng = trial_stream(cfg.seed, trial as u64, Purpose::Scheme(scheme.slot()));
    let (solution, trace) = run_scheme(scheme, channels, cfg, &mut rng)?;
    let h = solution.effective_channel(channels).ok_or(SolverError::MissingDirectChannel)?;
    let budget = cfg.budget();
    let metrics = link_metrics(&h, &solution.precoder(), solution.zeta, budget);
    Ok(TrialOutcome {
        se: metrics.sum_se,
        mse_bar: mse_bar(&h, &solution.scaled_precoder(), budget),
        iterations: trace.iterations(),
    })
}

fn run_point(spec: &SweepSpec, cfg: &SystemConfig, value: f64) -> Result<Vec<TrialRecord>, HarnessError> {
    let with_direct = spec.schemes.contains(&Scheme::HpBsNoRis);
    let per_trial: Vec<Result<Vec<TrialRecord>, HarnessError>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let mut stream = trial_stream(spec.seed, trial as u64, Purpose::Channel);
            let channels = synthesize(cfg, &mut stream, with_direct)?;
            let fingerprint = channels.fingerprint();
            Ok(spec
                .schemes
                .iter()
                .map(|&scheme| {
                    let outcome = match evaluate(scheme, &channels, cfg, trial) {
                        Ok(o) => Some(o),
                        Err(e) => {
                            log::warn!("trial {trial} at {value}: {scheme} failed: {e}");
                            None
                        }
                    };
                    TrialRecord { sweep_value: value, trial, scheme, channel_fingerprint: fingerprint, outcome }
                })
                .collect())
        })
        .collect();
    let mut records = Vec::with_capacity(spec.trials * spec.schemes.len());
    for trial in per_trial {
        records.extend(trial?);
    }
    Ok(records)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Standard error of the mean; zero for a single sample.
pub fn standard_error(xs: &[f64]) -> Option<f64> {
    let mu = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    Some((var / xs.len() as f64).sqrt())
}

fn summarize(value: f64, scheme: Scheme, records: &[TrialRecord]) -> PointSummary {
    let done: Vec<&TrialOutcome> = records
        .iter()
        .filter(|r| r.scheme == scheme && r.sweep_value == value)
        .filter_map(|r| r.outcome.as_ref())
        .collect();
    let attempted = records.iter().filter(|r| r.scheme == scheme && r.sweep_value == value).count();
    let se: Vec<f64> = done.iter().map(|o| o.se).collect();
    let mse: Vec<f64> = done.iter().map(|o| o.mse_bar).collect();
    let iters: Vec<f64> = done.iter().map(|o| o.iterations as f64).collect();
    PointSummary {
        sweep_value: value,
        scheme,
        mean_se: mean(&se),
        stderr_se: standard_error(&se),
        mean_mse: mean(&mse),
        mean_iters: mean(&iters),
        trials: done.len(),
        failed: attempted - done.len(),
    }
}

/// Runs the sweep and returns the aggregate report together with every
/// per-trial record.
pub fn run_sweep_detailed(
    spec: &SweepSpec,
    cfg: &SystemConfig,
) -> Result<(SweepReport, Vec<TrialRecord>), HarnessError> {
    spec.validate()?;
    let mut records = Vec::new();
    for &value in &spec.values {
        let point = validate_config(spec.point_config(cfg, value))?;
        if spec.schemes.contains(&Scheme::ProposedPcs) {
            validate_config(SystemConfig { analog_structure: AnalogStructure::PartiallyConnected, ..point.clone() })?;
        }
        records.extend(run_point(spec, &point, value)?);
    }
    let points = spec
        .values
        .iter()
        .flat_map(|&v| spec.schemes.iter().map(move |&s| (v, s)))
        .map(|(v, s)| summarize(v, s, &records))
        .collect();
    let report = SweepReport {
        sweep_var: spec.var,
        points,
        provenance: Provenance {
            version: ARTIFACT_VERSION.to_string(),
            seed: spec.seed,
            trials: spec.trials,
            values: spec.values.clone(),
            schemes: spec.schemes.clone(),
            config: SystemConfig { seed: spec.seed, ..cfg.clone() },
        },
    };
    Ok((report, records))
}

pub fn run_sweep(spec: &SweepSpec, cfg: &SystemConfig) -> Result<SweepReport, HarnessError> {
    run_sweep_detailed(spec, cfg).map(|(report, _)| report)
}

#[derive(Serialize)]
struct CsvRow<'a> {
    sweep_var: &'a str,
    sweep_value: f64,
    scheme: &'a str,
    mean_se: Option<f64>,
    stderr_se: Option<f64>,
    mean_mse: Option<f64>,
    mean_iters: Option<f64>,
    trials: usize,
}

pub fn to_csv(report: &SweepReport) -> Result<String, csv::Error> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for p in &report.points {
        writer.serialize(CsvRow {
            sweep_var: report.sweep_var.name(),
            sweep_value: p.sweep_value,
            scheme: p.scheme.name(),
            mean_se: p.mean_se,
            stderr_se: p.stderr_se,
            mean_mse: p.mean_mse,
            mean_iters: p.mean_iters,
            trials: p.trials,
        })?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

pub fn emit_csv(report: &SweepReport, path: &Path) -> Result<(), HarnessError> {
    let text = to_csv(report)
        .map_err(|e| HarnessError::Format { path: path.display().to_string(), message: e.to_string() })?;
    fs::write(path, text).map_err(io_err(path))
}

pub fn to_json(report: &SweepReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

pub fn emit_json(report: &SweepReport, path: &Path) -> Result<(), HarnessError> {
    fs::write(path, to_json(report)).map_err(io_err(path))
}

pub fn load_json(path: &Path) -> Result<SweepReport, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text)
        .map_err(|e| HarnessError::Format { path: path.display().to_string(), message: e.to_string() })
}
