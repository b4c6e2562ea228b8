//! Geometric mmWave channels.
//!
//! The base station carries a ULA of `M` elements and the RIS a `√R x √R`
//! UPA. A link with `L` paths is the scaled sum of `L` rank-one steering
//! outer products with i.i.d. unit-variance complex gains. All angles are
//! drawn uniformly from `[-π/2, π/2]`.
//!
//! Draw order within one stream is fixed: BS-RIS gains, BS-RIS angles, the
//! per-path RIS departure elevations shared by all users, then each user's
//! gains and azimuths, and finally the direct link if requested.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::model::{exact_sqrt, ChannelSet, ChannelShapeError, SystemConfig};
use crate::rng::complex_gaussian;
use crate::{CMat, CVec, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("UPA size {0} is not a perfect square")]
    NotPerfectSquare(usize),
    #[error(transparent)]
    Shape(#[from] ChannelShapeError),
    #[error("channel text line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// ULA response: entry `n` is `exp(j 2π d n sin ψ) / √N`.
pub fn ula_response(n: usize, d_over_lambda: f64, azimuth: f64) -> CVec {
    let scale = 1.0 / (n as f64).sqrt();
    let step = TAU * d_over_lambda * azimuth.sin();
    CVec::from_iterator(n, (0..n).map(|i| C64::from_polar(scale, step * i as f64)))
}

/// UPA response with p-major flat index `i = p √N + q`; entry `i` is
/// `exp(j 2π d (p sin θ sin φ + q cos φ)) / √N`.
pub fn upa_response(n: usize, d_over_lambda: f64, theta: f64, phi: f64) -> Result<CVec, ChannelError> {
    let side = exact_sqrt(n).ok_or(ChannelError::NotPerfectSquare(n))?;
    let scale = 1.0 / (n as f64).sqrt();
    let kp = TAU * d_over_lambda * theta.sin() * phi.sin();
    let kq = TAU * d_over_lambda * phi.cos();
    Ok(CVec::from_iterator(
        n,
        (0..side).flat_map(|p| (0..side).map(move |q| C64::from_polar(scale, kp * p as f64 + kq * q as f64))),
    ))
}

/// One BS-RIS path: UPA arrival at the RIS, ULA departure at the BS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsRisPath {
    pub gain: C64,
    pub aoa_azimuth: f64,
    pub aoa_elevation: f64,
    pub aod_azimuth: f64,
}

/// One RIS-UE path, departing the RIS UPA at `(theta, phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisUePath {
    pub gain: C64,
    pub theta: f64,
    pub phi: f64,
}

/// One direct BS-UE path, departing the BS ULA at `azimuth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectPath {
    pub gain: C64,
    pub azimuth: f64,
}

/// `√(MR/L) Σ ξ_l α_P(arrival) α_L(departure)^H`, an `R x M` matrix.
pub fn bs_ris_from_paths(m: usize, r: usize, d_over_lambda: f64, paths: &[BsRisPath]) -> Result<CMat, ChannelError> {
    let scale = ((m * r) as f64 / paths.len() as f64).sqrt();
    let mut h = CMat::zeros(r, m);
    for path in paths {
        let arrival = upa_response(r, d_over_lambda, path.aoa_azimuth, path.aoa_elevation)?;
        let departure = ula_response(m, d_over_lambda, path.aod_azimuth);
        h += arrival * departure.adjoint() * path.gain;
    }
    Ok(h * C64::from(scale))
}

/// `√(R/L) Σ γ_l α_P(θ_l, φ_l)`, the length-`R` channel of one user.
pub fn ris_ue_from_paths(r: usize, d_over_lambda: f64, paths: &[RisUePath]) -> Result<CVec, ChannelError> {
    let scale = (r as f64 / paths.len() as f64).sqrt();
    let mut h = CVec::zeros(r);
    for path in paths {
        h += upa_response(r, d_over_lambda, path.theta, path.phi)? * path.gain;
    }
    Ok(h * C64::from(scale))
}

/// `√(M/L) Σ γ_l α_L(ψ_l)`, the length-`M` direct channel of one user.
pub fn direct_from_paths(m: usize, d_over_lambda: f64, paths: &[DirectPath]) -> CVec {
    let scale = (m as f64 / paths.len() as f64).sqrt();
    let mut h = CVec::zeros(m);
    for path in paths {
        h += ula_response(m, d_over_lambda, path.azimuth) * path.gain;
    }
    h * C64::from(scale)
}

fn angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>() * PI - FRAC_PI_2
}

/// Stacks per-user channel vectors as the rows `h_k^H` of a `K x N` matrix.
fn rows_from_users(users: &[CVec]) -> CMat {
    let n = users.first().map_or(0, |u| u.len());
    CMat::from_fn(users.len(), n, |k, i| users[k][i].conj())
}

pub fn draw_bs_ris_paths<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Vec<BsRisPath> {
    let gains: Vec<C64> = (0..cfg.l_b).map(|_| complex_gaussian(rng)).collect();
    gains
        .into_iter()
        .map(|gain| BsRisPath { gain, aoa_azimuth: angle(rng), aoa_elevation: angle(rng), aod_azimuth: angle(rng) })
        .collect()
}

/// Per-user RIS-UE paths. The departure elevation of path `l` is shared by
/// all users; azimuths and gains are per user.
pub fn draw_ris_ue_paths<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Vec<Vec<RisUePath>> {
    let elevations: Vec<f64> = (0..cfg.l_i).map(|_| angle(rng)).collect();
    (0..cfg.k)
        .map(|_| {
            let gains: Vec<C64> = (0..cfg.l_i).map(|_| complex_gaussian(rng)).collect();
            gains.into_iter().zip(&elevations).map(|(gain, &phi)| RisUePath { gain, theta: angle(rng), phi }).collect()
        })
        .collect()
}

pub fn draw_direct_paths<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Vec<Vec<DirectPath>> {
    (0..cfg.k)
        .map(|_| {
            let gains: Vec<C64> = (0..cfg.l_i).map(|_| complex_gaussian(rng)).collect();
            gains.into_iter().map(|gain| DirectPath { gain, azimuth: angle(rng) }).collect()
        })
        .collect()
}

/// Random `R x M` BS-RIS channel.
pub fn synth_bs_ris<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<CMat, ChannelError> {
    let paths = draw_bs_ris_paths(cfg, rng);
    bs_ris_from_paths(cfg.m, cfg.r, cfg.d_over_lambda, &paths)
}

/// Random `K x R` RIS-UE channel; row `k` is `h_{I_k}^H`.
pub fn synth_ris_ue<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<CMat, ChannelError> {
    let users = draw_ris_ue_paths(cfg, rng)
        .iter()
        .map(|paths| ris_ue_from_paths(cfg.r, cfg.d_over_lambda, paths))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(rows_from_users(&users))
}

/// Random `K x M` direct channel with `L_I` paths per user.
pub fn synth_direct<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> CMat {
    let users: Vec<CVec> =
        draw_direct_paths(cfg, rng).iter().map(|paths| direct_from_paths(cfg.m, cfg.d_over_lambda, paths)).collect();
    rows_from_users(&users)
}

/// Full realization in the documented draw order.
pub fn synthesize<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    rng: &mut R,
    with_direct: bool,
) -> Result<ChannelSet, ChannelError> {
    let h_b = synth_bs_ris(cfg, rng)?;
    let h_i = synth_ris_ue(cfg, rng)?;
    let h_d = with_direct.then(|| synth_direct(cfg, rng));
    Ok(ChannelSet::new(h_b, h_i, h_d)?)
}

fn write_rows(out: &mut String, m: &CMat) {
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|z| format!("{:.16e},{:.16e}", z.re, z.im)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
}

/// Text form of a realization.
///
/// The first line is `channelset R=<r> M=<m> K=<k> direct=<0|1>`. It is
/// followed by the `R` rows of `H_B`, the `K` rows of `H_I` and, when
/// present, the `K` rows of `H_D`. Each row is a space-separated list of
/// `re,im` pairs printed with 17 significant digits.
pub fn to_text(channels: &ChannelSet) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "channelset R={} M={} K={} direct={}",
        channels.elements(),
        channels.antennas(),
        channels.users(),
        u8::from(channels.h_d.is_some())
    );
    write_rows(&mut out, &channels.h_b);
    write_rows(&mut out, &channels.h_i);
    if let Some(h_d) = &channels.h_d {
        write_rows(&mut out, h_d);
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> ChannelError {
    ChannelError::Parse { line, message: message.into() }
}

pub fn from_text(text: &str) -> Result<ChannelSet, ChannelError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("channelset") {
        return Err(parse_err(1, "missing 'channelset' header"));
    }
    let mut dims = [0usize; 4];
    for (slot, key) in dims.iter_mut().zip(["R", "M", "K", "direct"]) {
        let field = fields.next().ok_or_else(|| parse_err(1, format!("missing {key}")))?;
        let value = field
            .strip_prefix(key)
            .and_then(|v| v.strip_prefix('='))
            .ok_or_else(|| parse_err(1, format!("expected {key}=<n>, got {field}")))?;
        *slot = value.parse().map_err(|_| parse_err(1, format!("bad {key} value {value}")))?;
    }
    let [r, m, k, direct] = dims;

    let mut read_matrix = |rows: usize, cols: usize| -> Result<CMat, ChannelError> {
        let mut out = CMat::zeros(rows, cols);
        for i in 0..rows {
            let (ln, line) = lines.next().ok_or_else(|| parse_err(0, "unexpected end of input"))?;
            let cells: Vec<&str> = line.split_whitespace().collect();
            if cells.len() != cols {
                return Err(parse_err(ln, format!("expected {cols} entries, found {}", cells.len())));
            }
            for (j, cell) in cells.iter().enumerate() {
                let (re, im) = cell.split_once(',').ok_or_else(|| parse_err(ln, format!("bad entry {cell}")))?;
                let parse = |s: &str| s.parse::<f64>().map_err(|_| parse_err(ln, format!("bad number {s}")));
                out[(i, j)] = C64::new(parse(re)?, parse(im)?);
            }
        }
        Ok(out)
    };
    let h_b = read_matrix(r, m)?;
    let h_i = read_matrix(k, r)?;
    let h_d = if direct != 0 { Some(read_matrix(k, m)?) } else { None };
    Ok(ChannelSet::new(h_b, h_i, h_d)?)
}
