//! Reference computations for checking the precoding solver.
//!
//! Nothing here calls into the solver. The objective is evaluated in its
//! completed-square form
//!
//! ```text
//! (P/K) ‖H F̄ − I_K‖²_F + σ² ‖F̄‖²_F
//! ```
//!
//! which expands to the same value as the solver's expression, and the
//! digital precoder is recovered from a real-valued stacked least-squares
//! problem solved by SVD.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type CMat = DMatrix<Complex64>;

/// Default finite-difference step.
pub const DEFAULT_EPS: f64 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("grid search over {points}^{elements} phases exceeds the 10^6 evaluation budget")]
    BudgetExceeded { points: usize, elements: usize },
    #[error("exhaustive search supports at most 3 RIS elements, got {0}")]
    TooManyElements(usize),
    #[error("least-squares reference failed: {0}")]
    LeastSquares(&'static str),
}

/// Central difference `(f(X + εΔ) − f(X − εΔ)) / 2ε`.
pub fn fd_directional<F>(f: F, x: &CMat, delta: &CMat, eps: f64) -> f64
where
    F: Fn(&CMat) -> f64,
{
    assert!(eps > 0.0, "finite-difference step must be positive");
    let step = delta * Complex64::from(eps);
    (f(&(x + &step)) - f(&(x - &step))) / (2.0 * eps)
}

/// `2 Re Tr{Gᴴ Δ}`, the directional derivative implied by a conjugate
/// gradient `G`.
pub fn wirtinger_directional(grad: &CMat, delta: &CMat) -> f64 {
    2.0 * grad.iter().zip(delta.iter()).map(|(g, d)| (g.conj() * d).re).sum::<f64>()
}

/// Objective in completed-square form.
pub fn objective(h: &CMat, f_bar: &CMat, power: f64, users: usize, noise_var: f64) -> f64 {
    let mut residual = h * f_bar;
    for k in 0..residual.nrows().min(residual.ncols()) {
        residual[(k, k)] -= Complex64::from(1.0);
    }
    power / users as f64 * residual.norm_squared() + noise_var * f_bar.norm_squared()
}

fn realify(a: &CMat) -> DMatrix<f64> {
    let (r, c) = a.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let z = a[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Minimizes the objective over `F̄_BB` for fixed `H` and `F_RF` by solving
///
/// ```text
/// min ‖ [√(P/K) H F_RF; σ F_RF] X − [√(P/K) I_K; 0] ‖²_F
/// ```
///
/// column by column in real coordinates.
pub fn ls_reference(h: &CMat, f_rf: &CMat, power: f64, users: usize, noise_var: f64) -> Result<CMat, OracleError> {
    let k = h.nrows();
    let m = f_rf.nrows();
    let n = f_rf.ncols();
    let a = (power / users as f64).sqrt();
    let s = noise_var.sqrt();

    let top = h * f_rf * Complex64::from(a);
    let bottom = f_rf * Complex64::from(s);
    let mut stacked = CMat::zeros(k + m, n);
    stacked.rows_mut(0, k).copy_from(&top);
    stacked.rows_mut(k, m).copy_from(&bottom);
    let real = realify(&stacked);
    let svd = real.svd(true, true);

    let rows = k + m;
    let mut out = CMat::zeros(n, k);
    for col in 0..k {
        let mut rhs = DVector::<f64>::zeros(2 * rows);
        rhs[col] = a;
        let x = svd.solve(&rhs, 1e-14).map_err(OracleError::LeastSquares)?;
        for i in 0..n {
            out[(i, col)] = Complex64::new(x[i], x[n + i]);
        }
    }
    Ok(out)
}

/// Best RIS phase vector on a uniform grid of `grid_points` phases per
/// element, with `F̄` held fixed. Returns the phases and the objective.
pub fn grid_search_ris(
    h_i: &CMat,
    h_b: &CMat,
    f_bar: &CMat,
    power: f64,
    users: usize,
    noise_var: f64,
    grid_points: usize,
) -> Result<(Vec<Complex64>, f64), OracleError> {
    let elements = h_b.nrows();
    if elements > 3 {
        return Err(OracleError::TooManyElements(elements));
    }
    let total = (grid_points as u128).pow(elements as u32);
    if total > 1_000_000 {
        return Err(OracleError::BudgetExceeded { points: grid_points, elements });
    }
    let modulus = (1.0 / elements as f64).sqrt();
    let phase = |i: usize| Complex64::from_polar(modulus, std::f64::consts::TAU * i as f64 / grid_points as f64);

    let gamma = h_b * f_bar;
    let mut best = (vec![Complex64::from(0.0); elements], f64::INFINITY);
    let mut index = vec![0usize; elements];
    for _ in 0..total {
        let psi: Vec<Complex64> = index.iter().map(|&i| phase(i)).collect();
        let mut scaled = h_i.clone();
        for (r, p) in psi.iter().enumerate() {
            let mut col = scaled.column_mut(r);
            col *= *p;
        }
        // Objective through H F̄ = H_I diag(ψ) Γ̄ with Γ̄ = H_B F̄.
        let hf = &scaled * &gamma;
        let mut residual = hf;
        for k in 0..residual.nrows().min(residual.ncols()) {
            residual[(k, k)] -= Complex64::from(1.0);
        }
        let value = power / users as f64 * residual.norm_squared() + noise_var * f_bar.norm_squared();
        if value < best.1 {
            best = (psi, value);
        }
        for slot in index.iter_mut() {
            *slot += 1;
            if *slot < grid_points {
                break;
            }
            *slot = 0;
        }
    }
    Ok(best)
}
