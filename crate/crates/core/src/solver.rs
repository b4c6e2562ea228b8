//! Alternating minimization of the modified MSE.
//!
//! With `F̄ = F_RF F̄_BB` and `H = H_I diag(ψ) H_B`, the objective is
//!
//! ```text
//! mse_bar = P − (2P/K) Re Tr{F̄ᴴ Hᴴ} + (P/K) ‖H F̄‖²_F + σ² ‖F̄‖²_F
//! ```
//!
//! One outer iteration runs three blocks in order:
//!
//! 1. digital: the closed-form minimizer `[F_RFᴴ Ξ F_RF]⁻¹ (H F_RF)ᴴ` with
//!    `Ξ = HᴴH + (Kσ²/P) I`;
//! 2. analog: a projected gradient step on `F_RF` with step `1/τ`,
//!    `τ = ((P/K)‖H‖²_F + σ²) ‖F̄_BB‖²_F`;
//! 3. RIS: a projected gradient step on `ψ` with step `1/ς`,
//!    `ς = (P/K) ‖Γ̄‖²_F ‖H_I‖²_F`, `Γ̄ = H_B F_RF F̄_BB`.
//!
//! Both step sizes are Lipschitz constants of the respective gradients, so
//! the projected step minimizes a quadratic majorizer over the feasible set
//! and the objective never increases.
//!
//! Gradients are taken with respect to conjugate coordinates: for a real
//! objective `f` and direction `Δ`, `d/dε f(X + εΔ) = 2 Re Tr{∇ᴴ Δ}`.

use rand::Rng;
use thiserror::Error;

use crate::baselines::fd_precoder;
use crate::model::{
    AnalogStructure, ChannelSet, IterationRecord, IterationTrace, LinkBudget, PrecoderSolution, SystemConfig,
};
use crate::rng::uniform_phase;
use crate::{CMat, CVec, C64};

/// Largest objective increase tolerated per sub-step before the driver
/// reports a descent violation (debug builds only).
pub const DESCENT_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("normal equations are not Hermitian positive definite")]
    SingularSystem,
    #[error("analog step undefined: digital precoder is zero")]
    ZeroDigitalPrecoder,
    #[error("RIS step undefined: step bound is {0}")]
    DegenerateRisStep(f64),
    #[error("channel is identically zero")]
    DegenerateChannel,
    #[error("noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),
    #[error("N_RF = {n_rf} does not divide M = {m}")]
    BlocksDoNotDivide { m: usize, n_rf: usize },
    #[error("RIS update requested on a link without a RIS")]
    NoRis,
    #[error("scheme needs the direct BS-UE channel, which was not synthesized")]
    MissingDirectChannel,
    #[error("{step} step raised the modified MSE from {before:.17e} to {after:.17e}")]
    DescentViolation { step: &'static str, before: f64, after: f64 },
    #[error("final precoder carries no power")]
    ZeroPower,
}

/// Modified MSE for a scaled precoder `f_bar` (`M x K`).
pub fn mse_bar(h: &CMat, f_bar: &CMat, budget: LinkBudget) -> f64 {
    let hf = h * f_bar;
    let trace_re = hf.trace().re;
    let a = budget.stream_power();
    budget.power - 2.0 * a * trace_re + a * hf.norm_squared() + budget.noise_var * f_bar.norm_squared()
}

/// `Ξ = HᴴH + (Kσ²/P) I`.
pub fn regularized_gram(h: &CMat, budget: LinkBudget) -> CMat {
    let mut xi = h.adjoint() * h;
    let loading = budget.loading();
    for i in 0..xi.nrows() {
        xi[(i, i)] += loading;
    }
    xi
}

/// Closed-form digital precoder for fixed `F_RF` and channel.
///
/// Solves `[F_RFᴴ Ξ F_RF] F̄_BB = (H F_RF)ᴴ` with a Cholesky factorization.
pub fn update_digital(h: &CMat, f_rf: &CMat, budget: LinkBudget) -> Result<CMat, SolverError> {
    let xi = regularized_gram(h, budget);
    solve_digital(&xi, h, f_rf)
}

fn solve_digital(xi: &CMat, h: &CMat, f_rf: &CMat) -> Result<CMat, SolverError> {
    let gram = f_rf.adjoint() * xi * f_rf;
    let rhs = (h * f_rf).adjoint();
    let chol = gram.cholesky().ok_or(SolverError::SingularSystem)?;
    Ok(chol.solve(&rhs))
}

/// `(P/K) [Ξ F_RF F̄_BB − Hᴴ] F̄_BBᴴ`.
pub fn analog_gradient(xi: &CMat, h: &CMat, f_rf: &CMat, f_bb_bar: &CMat, budget: LinkBudget) -> CMat {
    let residual = xi * f_rf * f_bb_bar - h.adjoint();
    residual * f_bb_bar.adjoint() * C64::from(budget.stream_power())
}

/// Lipschitz constant `τ` of the analog gradient.
pub fn step_bound_analog(h: &CMat, f_bb_bar: &CMat, budget: LinkBudget) -> Result<f64, SolverError> {
    let digital = f_bb_bar.norm_squared();
    let tau = (budget.stream_power() * h.norm_squared() + budget.noise_var) * digital;
    if digital == 0.0 || !(tau > 0.0) || !tau.is_finite() {
        return Err(SolverError::ZeroDigitalPrecoder);
    }
    Ok(tau)
}

/// Maps every entry to `modulus · e^{j∠z}`. Entries that are exactly zero
/// keep the phase of the matching entry of `previous`.
pub fn project_constant_modulus(z: &CMat, modulus: f64, previous: &CMat) -> CMat {
    assert_eq!(z.shape(), previous.shape(), "projection operands differ in shape");
    z.zip_map(previous, |v, p| unit_phase(v, p) * modulus)
}

fn unit_phase(v: C64, previous: C64) -> C64 {
    let source = if v == C64::new(0.0, 0.0) { previous } else { v };
    C64::from_polar(1.0, source.arg())
}

/// Diagonal of `(P/K) H_Iᴴ (H_I diag(ψ) Γ̄ − I_K) Γ̄ᴴ`, the RIS gradient.
pub fn grad_ris(h_i: &CMat, psi: &CVec, gamma_bar: &CMat, budget: LinkBudget) -> CVec {
    let k = h_i.nrows();
    let mut residual = crate::model::cascade(h_i, psi, gamma_bar);
    for i in 0..k {
        residual[(i, i)] -= C64::from(1.0);
    }
    let g = residual * gamma_bar.adjoint();
    let scale = budget.stream_power();
    CVec::from_iterator(
        h_i.ncols(),
        h_i.column_iter()
            .zip(g.column_iter())
            .map(|(hc, gc)| hc.iter().zip(gc.iter()).map(|(a, b)| a.conj() * b).sum::<C64>() * scale),
    )
}

/// Lipschitz constant `ς` of the RIS gradient.
pub fn step_bound_ris(gamma_bar: &CMat, h_i: &CMat, budget: LinkBudget) -> Result<f64, SolverError> {
    let sigma = budget.stream_power() * gamma_bar.norm_squared() * h_i.norm_squared();
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(SolverError::DegenerateRisStep(sigma));
    }
    Ok(sigma)
}

/// Largest deviation of `|z|` from `modulus` over `values`.
pub fn modulus_residual<'a>(values: impl IntoIterator<Item = &'a C64>, modulus: f64) -> f64 {
    values.into_iter().map(|z| (z.norm() - modulus).abs()).fold(0.0, f64::max)
}

/// Row block served by RF chain `n` in a partially-connected array.
pub fn pcs_block(n: usize, m: usize, n_rf: usize) -> std::ops::Range<usize> {
    let width = m / n_rf;
    n * width..(n + 1) * width
}

/// Residual of the block-diagonal constraint: modulus error on the blocks
/// and magnitude of anything off them.
pub fn pcs_residual(f_rf: &CMat) -> f64 {
    let (m, n_rf) = f_rf.shape();
    let modulus = (n_rf as f64 / m as f64).sqrt();
    let mut worst: f64 = 0.0;
    for n in 0..n_rf {
        let block = pcs_block(n, m, n_rf);
        for row in 0..m {
            let z = f_rf[(row, n)];
            let err = if block.contains(&row) { (z.norm() - modulus).abs() } else { z.norm() };
            worst = worst.max(err);
        }
    }
    worst
}

#[derive(Debug, Clone)]
enum Link {
    Cascaded { h_i: CMat, h_b: CMat },
    Direct,
}

/// Iterate and cached quantities for one alternating run.
///
/// `h` and `xi` always agree with the current `psi`.
#[derive(Debug, Clone)]
pub struct SolverState {
    budget: LinkBudget,
    link: Link,
    f_rf: CMat,
    f_bb_bar: CMat,
    psi: Option<CVec>,
    h: CMat,
    xi: CMat,
}

impl SolverState {
    /// State for a link through the RIS. The digital precoder starts at zero.
    pub fn cascaded(channels: &ChannelSet, budget: LinkBudget, f_rf: CMat, psi: CVec) -> Self {
        assert_eq!(f_rf.nrows(), channels.antennas());
        assert_eq!(psi.len(), channels.elements());
        let h = channels.cascade(&psi);
        let xi = regularized_gram(&h, budget);
        let f_bb_bar = CMat::zeros(f_rf.ncols(), channels.users());
        Self {
            budget,
            link: Link::Cascaded { h_i: channels.h_i.clone(), h_b: channels.h_b.clone() },
            f_rf,
            f_bb_bar,
            psi: Some(psi),
            h,
            xi,
        }
    }

    /// State for a fixed channel `h` (`K x M`) with no RIS to optimize.
    pub fn direct(h: CMat, budget: LinkBudget, f_rf: CMat) -> Self {
        assert_eq!(f_rf.nrows(), h.ncols());
        let xi = regularized_gram(&h, budget);
        let f_bb_bar = CMat::zeros(f_rf.ncols(), h.nrows());
        Self { budget, link: Link::Direct, f_rf, f_bb_bar, psi: None, h, xi }
    }

    pub fn with_digital(mut self, f_bb_bar: CMat) -> Self {
        assert_eq!(f_bb_bar.shape(), self.f_bb_bar.shape());
        self.f_bb_bar = f_bb_bar;
        self
    }

    pub fn budget(&self) -> LinkBudget {
        self.budget
    }

    pub fn f_rf(&self) -> &CMat {
        &self.f_rf
    }

    pub fn f_bb_bar(&self) -> &CMat {
        &self.f_bb_bar
    }

    pub fn psi(&self) -> Option<&CVec> {
        self.psi.as_ref()
    }

    /// Effective channel `H_I diag(ψ) H_B` (or the fixed channel).
    pub fn h(&self) -> &CMat {
        &self.h
    }

    pub fn xi(&self) -> &CMat {
        &self.xi
    }

    pub fn h_i(&self) -> Option<&CMat> {
        match &self.link {
            Link::Cascaded { h_i, .. } => Some(h_i),
            Link::Direct => None,
        }
    }

    pub fn scaled_precoder(&self) -> CMat {
        &self.f_rf * &self.f_bb_bar
    }

    pub fn mse_bar(&self) -> f64 {
        mse_bar(&self.h, &self.scaled_precoder(), self.budget)
    }

    /// `Γ̄ = H_B F_RF F̄_BB`; `None` without a RIS.
    pub fn gamma_bar(&self) -> Option<CMat> {
        match &self.link {
            Link::Cascaded { h_b, .. } => Some(h_b * self.scaled_precoder()),
            Link::Direct => None,
        }
    }

    fn set_psi(&mut self, psi: CVec) {
        if let Link::Cascaded { h_i, h_b } = &self.link {
            self.h = crate::model::cascade(h_i, &psi, h_b);
            self.xi = regularized_gram(&self.h, self.budget);
        }
        self.psi = Some(psi);
    }

    /// Replaces `F̄_BB` by the closed-form minimizer.
    pub fn update_digital(&mut self) -> Result<(), SolverError> {
        self.f_bb_bar = solve_digital(&self.xi, &self.h, &self.f_rf)?;
        Ok(())
    }

    /// Replaces `F̄_BB` by the fully-digital precoder; `F_RF` must be `I_M`.
    fn update_fully_digital(&mut self) -> Result<(), SolverError> {
        self.f_bb_bar = fd_precoder(&self.h, self.budget)?;
        Ok(())
    }

    pub fn step_bound_analog(&self) -> Result<f64, SolverError> {
        step_bound_analog(&self.h, &self.f_bb_bar, self.budget)
    }

    pub fn step_bound_ris(&self) -> Result<f64, SolverError> {
        let (Some(gamma), Some(h_i)) = (self.gamma_bar(), self.h_i()) else {
            return Err(SolverError::NoRis);
        };
        step_bound_ris(&gamma, h_i, self.budget)
    }
}

/// Analog-precoder gradient at the current state.
pub fn grad_analog(state: &SolverState) -> CMat {
    analog_gradient(&state.xi, &state.h, &state.f_rf, &state.f_bb_bar, state.budget)
}

/// RIS gradient at the current state.
pub fn grad_ris_at(state: &SolverState) -> Result<CVec, SolverError> {
    let (Some(gamma), Some(h_i), Some(psi)) = (state.gamma_bar(), state.h_i(), state.psi()) else {
        return Err(SolverError::NoRis);
    };
    Ok(grad_ris(h_i, psi, &gamma, state.budget))
}

/// Fully-connected gradient-projection step on `F_RF` with step `alpha`.
/// Descent is guaranteed for `alpha ≤ 1/τ`.
pub fn update_analog(state: &mut SolverState, alpha: f64) -> &CMat {
    let grad = grad_analog(state);
    let moved = &state.f_rf - grad * C64::from(alpha);
    let modulus = (1.0 / state.f_rf.nrows() as f64).sqrt();
    state.f_rf = project_constant_modulus(&moved, modulus, &state.f_rf);
    &state.f_rf
}

/// Partially-connected step: the same gradient, used only on the diagonal
/// blocks, which are projected to modulus `√(N_RF/M)`. Off-block entries
/// are set to exactly zero.
pub fn update_analog_pcs(state: &mut SolverState, alpha: f64) -> Result<&CMat, SolverError> {
    let (m, n_rf) = state.f_rf.shape();
    if m % n_rf != 0 {
        return Err(SolverError::BlocksDoNotDivide { m, n_rf });
    }
    let grad = grad_analog(state);
    let modulus = (n_rf as f64 / m as f64).sqrt();
    let mut next = CMat::zeros(m, n_rf);
    for n in 0..n_rf {
        for row in pcs_block(n, m, n_rf) {
            let prev = state.f_rf[(row, n)];
            let moved = prev - grad[(row, n)] * alpha;
            next[(row, n)] = unit_phase(moved, prev) * modulus;
        }
    }
    state.f_rf = next;
    Ok(&state.f_rf)
}

/// Gradient-projection step on the RIS phases with step `alpha`; moduli are
/// reset to `√(1/R)`. Descent is guaranteed for `alpha ≤ 1/ς`.
pub fn update_ris(state: &mut SolverState, alpha: f64) -> Result<&CVec, SolverError> {
    let grad = grad_ris_at(state)?;
    let psi = state.psi.as_ref().ok_or(SolverError::NoRis)?;
    let modulus = (1.0 / psi.len() as f64).sqrt();
    let next = psi.zip_map(&grad, |p, g| p - g * alpha);
    let next = CVec::from_iterator(psi.len(), next.iter().zip(psi.iter()).map(|(z, p)| unit_phase(*z, *p) * modulus));
    state.set_psi(next);
    Ok(state.psi.as_ref().expect("psi set above"))
}

/// RIS step with the constant-modulus set relaxed to the ball `‖ψ‖₂ ≤ 1`.
pub fn update_ris_relaxed(state: &mut SolverState, alpha: f64) -> Result<&CVec, SolverError> {
    let grad = grad_ris_at(state)?;
    let psi = state.psi.as_ref().ok_or(SolverError::NoRis)?;
    let mut next = psi - grad * C64::from(alpha);
    let norm = next.norm();
    if norm > 1.0 {
        next /= C64::from(norm);
    }
    state.set_psi(next);
    Ok(state.psi.as_ref().expect("psi set above"))
}

/// How the analog block is updated in [`alternate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalogStep {
    FullyConnected,
    PartiallyConnected,
    /// `F_RF = I_M`; the digital step is the fully-digital precoder.
    FullyDigital,
}

impl From<AnalogStructure> for AnalogStep {
    fn from(s: AnalogStructure) -> Self {
        match s {
            AnalogStructure::FullyConnected => Self::FullyConnected,
            AnalogStructure::PartiallyConnected => Self::PartiallyConnected,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RisStep {
    ConstantModulus,
    /// Total-power ball `‖ψ‖₂ ≤ 1`.
    NormBall,
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub analog: AnalogStep,
    pub ris: RisStep,
    pub max_iters: usize,
    pub tol: f64,
}

impl Schedule {
    pub fn from_config(cfg: &SystemConfig, analog: AnalogStep, ris: RisStep) -> Self {
        Self { analog, ris, max_iters: cfg.max_iters, tol: cfg.tol }
    }
}

fn check_descent(step: &'static str, before: f64, after: f64) -> Result<(), SolverError> {
    if cfg!(debug_assertions) && after > before + DESCENT_SLACK {
        return Err(SolverError::DescentViolation { step, before, after });
    }
    Ok(())
}

fn residual(state: &SolverState, schedule: &Schedule) -> f64 {
    let analog = match schedule.analog {
        AnalogStep::FullyConnected => modulus_residual(state.f_rf.iter(), (1.0 / state.f_rf.nrows() as f64).sqrt()),
        AnalogStep::PartiallyConnected => pcs_residual(&state.f_rf),
        AnalogStep::FullyDigital => 0.0,
    };
    let ris = match (schedule.ris, state.psi()) {
        (RisStep::ConstantModulus, Some(psi)) => modulus_residual(psi.iter(), (1.0 / psi.len() as f64).sqrt()),
        (RisStep::NormBall, Some(psi)) => (psi.norm() - 1.0).max(0.0),
        _ => 0.0,
    };
    analog.max(ris)
}

/// Runs digital → analog → RIS iterations until the relative change of the
/// modified MSE drops below `schedule.tol` or `schedule.max_iters` is hit.
///
/// Steps are taken at the Lipschitz bounds. A block whose bound is undefined
/// (zero digital precoder, zero `Γ̄`) is skipped for that iteration.
pub fn alternate(state: &mut SolverState, schedule: &Schedule) -> Result<IterationTrace, SolverError> {
    if schedule.ris != RisStep::Frozen && state.h_i().is_none() {
        return Err(SolverError::NoRis);
    }
    let mut trace = IterationTrace::default();
    let mut previous: Option<f64> = None;
    for iter in 1..=schedule.max_iters {
        match schedule.analog {
            AnalogStep::FullyDigital => state.update_fully_digital()?,
            _ => state.update_digital()?,
        }
        let mse_after_digital = state.mse_bar();
        if let Some(before) = previous {
            check_descent("digital", before, mse_after_digital)?;
        }

        let alpha_analog = match schedule.analog {
            AnalogStep::FullyDigital => None,
            step => match state.step_bound_analog() {
                Ok(tau) => {
                    let alpha = 1.0 / tau;
                    if step == AnalogStep::PartiallyConnected {
                        update_analog_pcs(state, alpha)?;
                    } else {
                        update_analog(state, alpha);
                    }
                    Some(alpha)
                }
                Err(SolverError::ZeroDigitalPrecoder) => None,
                Err(e) => return Err(e),
            },
        };
        let mse_after_analog = state.mse_bar();
        check_descent("analog", mse_after_digital, mse_after_analog)?;

        let alpha_ris = match schedule.ris {
            RisStep::Frozen => None,
            step => match state.step_bound_ris() {
                Ok(sigma) => {
                    let alpha = 1.0 / sigma;
                    if step == RisStep::NormBall {
                        update_ris_relaxed(state, alpha)?;
                    } else {
                        update_ris(state, alpha)?;
                    }
                    Some(alpha)
                }
                Err(SolverError::DegenerateRisStep(_)) => None,
                Err(e) => return Err(e),
            },
        };
        let mse_after_ris = state.mse_bar();
        check_descent("RIS", mse_after_analog, mse_after_ris)?;

        trace.records.push(IterationRecord {
            iter,
            mse_after_digital,
            mse_after_analog,
            mse_after_ris,
            alpha_analog,
            alpha_ris,
            max_residual: residual(state, schedule),
        });

        if let Some(before) = previous {
            if (before - mse_after_ris).abs() / before.max(1e-12) < schedule.tol {
                trace.converged = true;
                break;
            }
        }
        previous = Some(mse_after_ris);
    }
    Ok(trace)
}

/// Divides the gain `ζ = ‖F_RF F̄_BB‖_F / √K` out of the digital precoder so
/// that `‖F_RF F_BB‖²_F = K`.
pub fn finalize(state: &SolverState) -> Result<PrecoderSolution, SolverError> {
    let users = state.f_bb_bar.ncols();
    let zeta = state.scaled_precoder().norm() / (users as f64).sqrt();
    if !(zeta > 0.0) || !zeta.is_finite() {
        return Err(SolverError::ZeroPower);
    }
    Ok(PrecoderSolution {
        f_rf: state.f_rf.clone(),
        f_bb: &state.f_bb_bar / C64::from(zeta),
        f_bb_bar: state.f_bb_bar.clone(),
        psi: state.psi.clone(),
        zeta,
    })
}

/// Random-phase analog precoder honoring `structure`.
pub fn random_analog<R: Rng + ?Sized>(m: usize, n_rf: usize, structure: AnalogStructure, rng: &mut R) -> CMat {
    match structure {
        AnalogStructure::FullyConnected => {
            let modulus = (1.0 / m as f64).sqrt();
            CMat::from_fn(m, n_rf, |_, _| C64::from_polar(modulus, uniform_phase(rng)))
        }
        AnalogStructure::PartiallyConnected => {
            let modulus = (n_rf as f64 / m as f64).sqrt();
            let mut f = CMat::zeros(m, n_rf);
            for n in 0..n_rf {
                for row in pcs_block(n, m, n_rf) {
                    f[(row, n)] = C64::from_polar(modulus, uniform_phase(rng));
                }
            }
            f
        }
    }
}

/// Random RIS phases with modulus `√(1/R)`.
pub fn random_ris<R: Rng + ?Sized>(r: usize, rng: &mut R) -> CVec {
    let modulus = (1.0 / r as f64).sqrt();
    CVec::from_fn(r, |_, _| C64::from_polar(modulus, uniform_phase(rng)))
}

pub(crate) fn check_inputs(channels: &ChannelSet, cfg: &SystemConfig) -> Result<(), SolverError> {
    let sigma2 = cfg.noise_variance();
    if !(sigma2 > 0.0) {
        return Err(SolverError::NonPositiveNoise(sigma2));
    }
    let zero = |m: &CMat| m.iter().all(|z| *z == C64::new(0.0, 0.0));
    if zero(&channels.h_b) || zero(&channels.h_i) {
        return Err(SolverError::DegenerateChannel);
    }
    Ok(())
}

/// Joint design from a given starting point.
pub fn run_algorithm1_from(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    f_rf: CMat,
    psi: CVec,
) -> Result<(PrecoderSolution, IterationTrace), SolverError> {
    check_inputs(channels, cfg)?;
    let mut state = SolverState::cascaded(channels, cfg.budget(), f_rf, psi);
    let schedule = Schedule::from_config(cfg, cfg.analog_structure.into(), RisStep::ConstantModulus);
    let trace = alternate(&mut state, &schedule)?;
    Ok((finalize(&state)?, trace))
}

/// Joint hybrid-precoder and RIS design from a random start.
///
/// The analog phases are drawn from `rng` first, then the RIS phases.
pub fn run_algorithm1<R: Rng + ?Sized>(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<(PrecoderSolution, IterationTrace), SolverError> {
    let f_rf = random_analog(cfg.m, cfg.n_rf, cfg.analog_structure, rng);
    let psi = random_ris(cfg.r, rng);
    run_algorithm1_from(channels, cfg, f_rf, psi)
}
