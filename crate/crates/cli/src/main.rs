//! `rishp`: runs a seeded Monte-Carlo sweep and writes CSV and/or JSON
//! reports.
//!
//! Failures print one JSON object on stderr, e.g.
//! `{"error":"config","message":"..."}`, and exit with status 1 (2 for
//! usage errors).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use rishp::harness::{emit_csv, emit_json, run_sweep, Scheme, SweepSpec, SweepVar};
use rishp::model::validate_config;
use rishp::{AnalogStructure, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepArg {
    R,
    Snr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StructureArg {
    Full,
    Pcs,
}

#[derive(Debug, Parser)]
#[command(name = "rishp", version, about = "Spectral-efficiency sweeps for RIS-aided hybrid precoding")]
struct Cli {
    /// Key-value config file; unspecified keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Swept quantity.
    #[arg(long, value_enum)]
    sweep: SweepArg,
    /// Sweep points, comma separated and strictly increasing.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    /// Channel realizations per sweep point.
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Schemes to run, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    /// Master seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Emit::Both)]
    emit: Emit,
    /// Analog structure for the hybrid baselines; overrides the config file.
    #[arg(long, value_enum)]
    structure: Option<StructureArg>,
}

struct Failure {
    kind: &'static str,
    error: anyhow::Error,
}

fn fail(kind: &'static str) -> impl FnOnce(anyhow::Error) -> Failure {
    move |error| Failure { kind, error }
}

fn load_config(cli: &Cli) -> anyhow::Result<SystemConfig> {
    let mut cfg = match &cli.config {
        Some(path) => SystemConfig::load(path)?,
        None => SystemConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(s) = cli.structure {
        cfg.analog_structure = match s {
            StructureArg::Full => AnalogStructure::FullyConnected,
            StructureArg::Pcs => AnalogStructure::PartiallyConnected,
        };
    }
    Ok(validate_config(cfg)?)
}

fn build_spec(cli: &Cli, cfg: &SystemConfig) -> SweepSpec {
    let mut spec = match cli.sweep {
        SweepArg::R => SweepSpec::default_r(cli.trials, cfg.seed),
        SweepArg::Snr => SweepSpec::default_snr(cli.trials, cfg.seed),
    };
    if let Some(values) = &cli.values {
        spec.values = values.clone();
    }
    if let Some(schemes) = &cli.schemes {
        spec.schemes = schemes.clone();
    }
    spec
}

fn stem(var: SweepVar) -> &'static str {
    match var {
        SweepVar::R => "sweep_r",
        SweepVar::Snr => "sweep_snr",
    }
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, Failure> {
    let cfg = load_config(cli).map_err(fail("config"))?;
    let spec = build_spec(cli, &cfg);
    let report = run_sweep(&spec, &cfg).context("sweep failed").map_err(fail("sweep"))?;

    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("cannot create {}", cli.out.display()))
        .map_err(fail("io"))?;
    let path = |ext: &str| -> PathBuf { Path::new(&cli.out).join(format!("{}.{ext}", stem(spec.var))) };
    let mut written = Vec::new();
    if matches!(cli.emit, Emit::Csv | Emit::Both) {
        let p = path("csv");
        emit_csv(&report, &p).map_err(|e| fail("io")(e.into()))?;
        written.push(p);
    }
    if matches!(cli.emit, Emit::Json | Emit::Both) {
        let p = path("json");
        emit_json(&report, &p).map_err(|e| fail("io")(e.into()))?;
        written.push(p);
    }
    Ok(written)
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(Failure { kind, error }) => {
            report_error(kind, &format!("{error:#}"));
            ExitCode::FAILURE
        }
    }
}
