//! Comparison schemes.
//!
//! All of them reuse the alternating driver in [`crate::solver`] with some
//! blocks frozen or relaxed, so they emit the same solution and trace types
//! as the joint design.
//!
//! "Fully-digital RIS" in the upper bound is read as relaxing the per-element
//! constant-modulus constraint to the ball `Σ|ψ_r|² ≤ 1`, which has the same
//! total reflected power as the constrained set. The upper bound is
//! warm-started from the fully-digital/optimized-RIS solution, so on every
//! realization its objective is no worse than that scheme's.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ChannelSet, IterationTrace, LinkBudget, PrecoderSolution, SystemConfig};
use crate::solver::{
    alternate, check_inputs, finalize, random_analog, random_ris, regularized_gram, AnalogStep, RisStep, Schedule,
    SolverError, SolverState,
};
use crate::{CMat, CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    /// Fully-digital BS with a relaxed (norm-ball) RIS.
    UpBound,
    /// Fully-digital BS with optimized constant-modulus RIS phases.
    FdBsOptRis,
    /// Hybrid BS with random RIS phases.
    HpBsRndRis,
    /// Hybrid BS over the direct link only.
    HpBsNoRis,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [Self::UpBound, Self::FdBsOptRis, Self::HpBsRndRis, Self::HpBsNoRis];
}

pub type SchemeRun = (PrecoderSolution, IterationTrace);

/// Fully-digital MMSE precoder `(HᴴH + (Kσ²/P) I)⁻¹ Hᴴ`, `M x K`.
pub fn fd_precoder(h: &CMat, budget: LinkBudget) -> Result<CMat, SolverError> {
    let xi = regularized_gram(h, budget);
    let chol = xi.cholesky().ok_or(SolverError::SingularSystem)?;
    Ok(chol.solve(&h.adjoint()))
}

fn identity_analog(m: usize) -> CMat {
    CMat::identity(m, m)
}

fn fd_state(channels: &ChannelSet, cfg: &SystemConfig, psi: CVec) -> SolverState {
    SolverState::cascaded(channels, cfg.budget(), identity_analog(cfg.m), psi)
}

/// Fully-digital precoding with constant-modulus RIS phases optimized from
/// `psi`.
pub fn run_fd_opt_ris_from(channels: &ChannelSet, cfg: &SystemConfig, psi: CVec) -> Result<SchemeRun, SolverError> {
    check_inputs(channels, cfg)?;
    let mut state = fd_state(channels, cfg, psi);
    let schedule = Schedule::from_config(cfg, AnalogStep::FullyDigital, RisStep::ConstantModulus);
    let trace = alternate(&mut state, &schedule)?;
    Ok((finalize(&state)?, trace))
}

pub fn run_fd_opt_ris<R: Rng + ?Sized>(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<SchemeRun, SolverError> {
    let psi = random_ris(cfg.r, rng);
    run_fd_opt_ris_from(channels, cfg, psi)
}

/// Fully-digital precoding with the RIS relaxed to `‖ψ‖₂ ≤ 1`, started at
/// `psi`.
pub fn run_upper_bound_from(channels: &ChannelSet, cfg: &SystemConfig, psi: CVec) -> Result<SchemeRun, SolverError> {
    check_inputs(channels, cfg)?;
    let mut state = fd_state(channels, cfg, psi);
    let schedule = Schedule::from_config(cfg, AnalogStep::FullyDigital, RisStep::NormBall);
    let trace = alternate(&mut state, &schedule)?;
    Ok((finalize(&state)?, trace))
}

/// Upper bound: optimize constant-modulus phases first, then continue on
/// the relaxed set. The returned trace covers both phases.
pub fn run_upper_bound<R: Rng + ?Sized>(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<SchemeRun, SolverError> {
    let (warm, mut trace) = run_fd_opt_ris(channels, cfg, rng)?;
    let psi = warm.psi.expect("RIS schemes always return phases");
    let (solution, relaxed) = run_upper_bound_from(channels, cfg, psi)?;
    trace.extend(relaxed);
    Ok((solution, trace))
}

/// Hybrid precoding with RIS phases held at `psi`.
pub fn run_rnd_ris_from(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    f_rf: CMat,
    psi: CVec,
) -> Result<SchemeRun, SolverError> {
    check_inputs(channels, cfg)?;
    let mut state = SolverState::cascaded(channels, cfg.budget(), f_rf, psi);
    let schedule = Schedule::from_config(cfg, cfg.analog_structure.into(), RisStep::Frozen);
    let trace = alternate(&mut state, &schedule)?;
    Ok((finalize(&state)?, trace))
}

/// Hybrid precoding with random RIS phases. The phases are drawn before the
/// analog start point.
pub fn run_rnd_ris<R: Rng + ?Sized>(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<SchemeRun, SolverError> {
    let psi = random_ris(cfg.r, rng);
    let f_rf = random_analog(cfg.m, cfg.n_rf, cfg.analog_structure, rng);
    run_rnd_ris_from(channels, cfg, f_rf, psi)
}

/// Hybrid precoding over the direct channel `H_D`.
pub fn run_no_ris<R: Rng + ?Sized>(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<SchemeRun, SolverError> {
    let h_d = channels.h_d.clone().ok_or(SolverError::MissingDirectChannel)?;
    if h_d.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Err(SolverError::DegenerateChannel);
    }
    let sigma2 = cfg.noise_variance();
    if !(sigma2 > 0.0) {
        return Err(SolverError::NonPositiveNoise(sigma2));
    }
    let f_rf = random_analog(cfg.m, cfg.n_rf, cfg.analog_structure, rng);
    let mut state = SolverState::direct(h_d, cfg.budget(), f_rf);
    let schedule = Schedule::from_config(cfg, cfg.analog_structure.into(), RisStep::Frozen);
    let trace = alternate(&mut state, &schedule)?;
    Ok((finalize(&state)?, trace))
}

/// Dispatches on `kind`.
pub fn run_baseline<R: Rng + ?Sized>(
    kind: BaselineKind,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<SchemeRun, SolverError> {
    match kind {
        BaselineKind::UpBound => run_upper_bound(channels, cfg, rng),
        BaselineKind::FdBsOptRis => run_fd_opt_ris(channels, cfg, rng),
        BaselineKind::HpBsRndRis => run_rnd_ris(channels, cfg, rng),
        BaselineKind::HpBsNoRis => run_no_ris(channels, cfg, rng),
    }
}
