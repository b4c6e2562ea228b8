//! Link quality of a finished design.
//!
//! Each stream carries power `P/K`. The receive gain `ζ` scales signal and
//! noise alike, so it does not enter the SINR.

use serde::{Deserialize, Serialize};

use crate::model::LinkBudget;
use crate::{CMat, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub sinr: Vec<f64>,
    /// Sum spectral efficiency, bits/s/Hz.
    pub sum_se: f64,
    pub mse: f64,
    pub zeta: f64,
}

/// `SINR_k = (P/K)|h_k f_k|² / (Σ_{j≠k} (P/K)|h_k f_j|² + σ²)` for
/// `h` (`K x M`) and precoder `f` (`M x K`).
pub fn sinr_per_user(h: &CMat, f: &CMat, budget: LinkBudget) -> Vec<f64> {
    let gains = h * f;
    let a = budget.stream_power();
    (0..gains.nrows())
        .map(|k| {
            let row = gains.row(k);
            let total: f64 = row.iter().map(|g| g.norm_sqr()).sum();
            let signal = row[k].norm_sqr();
            a * signal / (a * (total - signal) + budget.noise_var)
        })
        .collect()
}

pub fn spectral_efficiency(sinr: &[f64]) -> f64 {
    sinr.iter().map(|s| (1.0 + s).log2()).sum()
}

/// `P − (2P/K) ζ Re Tr{Fᴴ Hᴴ} + (Pζ²/K) ‖HF‖²_F + σ² ζ² K`.
pub fn mse_actual(h: &CMat, f: &CMat, zeta: f64, budget: LinkBudget) -> f64 {
    let hf = h * f;
    let a = budget.stream_power();
    budget.power - 2.0 * a * zeta * hf.trace().re
        + a * zeta * zeta * hf.norm_squared()
        + budget.noise_var * zeta * zeta * budget.users as f64
}

pub fn link_metrics(h: &CMat, f: &CMat, zeta: f64, budget: LinkBudget) -> LinkMetrics {
    let sinr = sinr_per_user(h, f, budget);
    LinkMetrics { sum_se: spectral_efficiency(&sinr), mse: mse_actual(h, f, zeta, budget), sinr, zeta }
}

/// Multiplies column `k` of `f` by `e^{jθ_k}`.
pub fn rotate_columns(f: &CMat, phases: &[f64]) -> CMat {
    let mut out = f.clone();
    for (mut col, &theta) in out.column_iter_mut().zip(phases) {
        col *= C64::from_polar(1.0, theta);
    }
    out
}
