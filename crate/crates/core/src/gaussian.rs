//! Gaussian bosonic channels: thermal-state entropy, single-mode and photon
//! channels, multimode water-filling, waveform and broadband capacities, and
//! the closed-form pure-state exponents.
//!
//! Energies are measured in units of `hbar * omega * quanta`; `hbar`
//! defaults to 1. Single-mode capacities are in nats per use, waveform
//! capacities in nats per second.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::numeric;
use crate::qstate::{DensityMatrix, Ensemble, Letter, PureState, DEFAULT_MAX_DIM};
use crate::reliability::{ExponentCurve, Regime};

fn check_nonneg(name: &str, x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("{name} = {x} must be a finite nonnegative real")));
    }
    Ok(())
}

fn check_pos(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("{name} = {x} must be a finite positive real")));
    }
    Ok(())
}

/// `(N+1) log(N+1) - N log N` without the domain check.
fn g_raw(n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    if n.is_infinite() {
        return f64::INFINITY;
    }
    (n + 1.0) * n.ln_1p() - n * n.ln()
}

/// Entropy of the thermal state with mean quanta `n`.
pub fn g(n: f64) -> Result<f64> {
    check_nonneg("N", n)?;
    Ok(g_raw(n))
}

/// `g'(N) = log(1 + 1/N)`; infinite at `N = 0`.
pub fn g_prime(n: f64) -> Result<f64> {
    check_nonneg("N", n)?;
    Ok(if n == 0.0 { f64::INFINITY } else { (1.0 / n).ln_1p() })
}

/// `g(N + E) - g(N)`.
pub fn single_mode_capacity(n: f64, e: f64) -> Result<f64> {
    check_nonneg("N", n)?;
    check_nonneg("E", e)?;
    Ok((g_raw(n + e) - g_raw(n)).max(0.0))
}

/// Optimal input distribution of the photon channel, truncated where the
/// remaining mass drops below the tail tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonDistribution {
    pub probs: Vec<f64>,
    /// Mass beyond the last listed `m`.
    pub tail_mass: f64,
    /// `sum_m m pi_m` over the listed terms.
    pub mean: f64,
    /// Set when `N + E = 0`; the distribution is then the point mass at 0.
    pub degenerate: bool,
}

pub fn photon_distribution(n: f64, e: f64, tail: f64) -> Result<PhotonDistribution> {
    check_nonneg("N", n)?;
    check_nonneg("E", e)?;
    check_pos("tail", tail)?;
    let k = n + e;
    if k == 0.0 || e == 0.0 {
        return Ok(PhotonDistribution { probs: vec![1.0], tail_mass: 0.0, mean: 0.0, degenerate: k == 0.0 });
    }
    let ratio = k / (k + 1.0);
    let head = 1.0 / (k + 1.0);
    let w = e / k;
    let mut probs = Vec::new();
    let mut term = head;
    let mut tail_mass = w;
    let mut m = 0usize;
    while tail_mass > tail || m == 0 {
        let mut p = w * term;
        if m == 0 {
            p += n / k;
        }
        probs.push(p);
        tail_mass -= w * term;
        term *= ratio;
        m += 1;
        if m > 100_000_000 {
            return Err(Error::Domain("photon distribution tail does not decay".into()));
        }
    }
    // closed form of the remaining geometric mass, immune to cancellation
    let tail_mass = w * ratio.powi(m as i32);
    let mean = probs.iter().enumerate().map(|(m, p)| m as f64 * p).sum();
    Ok(PhotonDistribution { probs, tail_mass, mean, degenerate: false })
}

/// Truncated thermal state and the probability mass cut off.
#[derive(Debug, Clone)]
pub struct ThermalState {
    pub state: DensityMatrix,
    pub truncation_mass: f64,
}

/// Smallest Fock dimension with `(N/(N+1))^d <= tail`.
pub fn fock_dim_for_tail(n: f64, tail: f64) -> Result<usize> {
    check_nonneg("N", n)?;
    check_pos("tail", tail)?;
    if n == 0.0 || tail >= 1.0 {
        return Ok(1);
    }
    let ratio = n / (n + 1.0);
    let d = (tail.ln() / ratio.ln()).ceil().max(1.0);
    let mut d = d as usize;
    while ratio.powi(d as i32) > tail {
        d += 1;
    }
    Ok(d)
}

fn thermal_diagonal(n: f64, d: usize) -> (Vec<f64>, f64) {
    let ratio = n / (n + 1.0);
    let mut diag = Vec::with_capacity(d);
    let mut x = 1.0 / (n + 1.0);
    for _ in 0..d {
        diag.push(x);
        x *= ratio;
    }
    (diag, if n == 0.0 { 0.0 } else { ratio.powi(d as i32) })
}

/// `(1/(N+1)) sum_n (N/(N+1))^n |n><n|` on the first `fock_dim` levels,
/// renormalized.
pub fn thermal_state(n: f64, fock_dim: usize) -> Result<ThermalState> {
    check_nonneg("N", n)?;
    if fock_dim == 0 {
        return Err(Error::Domain("fock_dim must be at least 1".into()));
    }
    if fock_dim > DEFAULT_MAX_DIM {
        return Err(Error::DimOverflow { dim: fock_dim, max_dim: DEFAULT_MAX_DIM });
    }
    let (mut diag, cut) = thermal_diagonal(n, fock_dim);
    let total: f64 = diag.iter().sum();
    for x in diag.iter_mut() {
        *x /= total;
    }
    Ok(ThermalState { state: DensityMatrix::from_diagonal(&diag)?, truncation_mass: cut })
}

/// `|<z|w>|^2 = exp(-|z - w|^2)`.
pub fn coherent_overlap(z: Complex64, w: Complex64) -> f64 {
    (-(z - w).norm_sqr()).exp()
}

/// Coherent state `|z>` on the first `fock_dim` levels, renormalized.
/// Returns the state and the Fock mass that was cut off.
pub fn coherent_state(z: Complex64, fock_dim: usize) -> Result<(PureState, f64)> {
    if fock_dim == 0 {
        return Err(Error::Domain("fock_dim must be at least 1".into()));
    }
    let mut amps = Vec::with_capacity(fock_dim);
    let mut a = Complex64::new((-z.norm_sqr() / 2.0).exp(), 0.0);
    for k in 0..fock_dim {
        amps.push(a);
        a = a * z / ((k + 1) as f64).sqrt();
    }
    let v = CVector::from_vec(amps);
    let kept: f64 = v.norm_squared();
    Ok((PureState::normalized(v)?, (1.0 - kept).max(0.0)))
}

/// Photon-channel ensemble: shifted thermal states `S_m` weighted by the
/// optimal photon distribution, both truncated at `tail`.
pub fn photon_channel_ensemble(n: f64, e: f64, tail: f64) -> Result<Ensemble> {
    let dist = photon_distribution(n, e, tail)?;
    let d0 = fock_dim_for_tail(n, tail)?;
    let dim = dist.probs.len() - 1 + d0;
    if dim > DEFAULT_MAX_DIM {
        return Err(Error::DimOverflow { dim, max_dim: DEFAULT_MAX_DIM });
    }
    let (base, _) = thermal_diagonal(n, d0);
    let base_total: f64 = base.iter().sum();
    let total: f64 = dist.probs.iter().sum();
    let letters = dist
        .probs
        .iter()
        .enumerate()
        .map(|(m, &p)| {
            let mut diag = vec![0.0; dim];
            for (k, x) in base.iter().enumerate() {
                diag[m + k] = x / base_total;
            }
            Ok(Letter { prob: p / total, state: DensityMatrix::from_diagonal(&diag)?, cost: Some(m as f64) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(letters)
}

/// Planck law `1 / (e^{theta hbar omega} - 1)`.
pub fn planck(theta: f64, hbar: f64, omega: f64) -> f64 {
    if theta.is_infinite() {
        return 0.0;
    }
    1.0 / (theta * hbar * omega).exp_m1()
}

/// One oscillator mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub omega: f64,
    /// Mean number of noise quanta.
    pub n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterFillingResult {
    /// Inverse-temperature water level; `inf` when the budget is zero.
    pub theta: f64,
    /// Signal quanta per mode, or per node for waveform results.
    pub allocations: Vec<f64>,
    /// Frequencies of the allocation entries.
    pub nodes: Vec<f64>,
    pub capacity: f64,
    /// `spent - E`.
    pub budget_residual: f64,
}

fn bracket_theta(budget_at: &dyn Fn(f64) -> Result<f64>, e: f64, scale: f64) -> Result<(f64, f64)> {
    let mut lo = 1e-12 / scale;
    let mut hi = 1e6 / scale;
    let mut tries = 0;
    while budget_at(lo)? < e {
        lo *= 1e-3;
        tries += 1;
        if tries > 60 || lo == 0.0 {
            return Err(Error::NoBracket(format!("budget {e} not reached even at theta = {lo:e}")));
        }
    }
    tries = 0;
    while budget_at(hi)? > e {
        hi *= 1e3;
        tries += 1;
        if tries > 60 || hi.is_infinite() {
            return Err(Error::NoBracket(format!("budget {e} still exceeded at theta = {hi:e}")));
        }
    }
    Ok((lo, hi))
}

/// Bisection in `log theta` on the decreasing map `theta -> spent(theta)`.
fn solve_theta(budget_at: &dyn Fn(f64) -> Result<f64>, e: f64, scale: f64) -> Result<f64> {
    let (mut lo, mut hi) = bracket_theta(budget_at, e, scale)?;
    for _ in 0..400 {
        let mid = (lo.ln() + 0.5 * (hi.ln() - lo.ln())).exp();
        if mid <= lo || mid >= hi {
            break;
        }
        let b = budget_at(mid)?;
        if (b - e).abs() <= 1e-12 * e {
            return Ok(mid);
        }
        if b > e {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the budget side is continuous; pick the closer end
    let (blo, bhi) = (budget_at(lo)?, budget_at(hi)?);
    Ok(if (blo - e).abs() <= (bhi - e).abs() { lo } else { hi })
}

/// Capacity of independent modes under the total energy constraint
/// `sum_j hbar omega_j m_j <= E`.
pub fn multimode_capacity(modes: &[ModeSpec], e: f64, hbar: f64) -> Result<WaterFillingResult> {
    if modes.is_empty() {
        return Err(Error::Empty("mode list"));
    }
    check_nonneg("E", e)?;
    check_pos("hbar", hbar)?;
    for m in modes {
        check_pos("omega", m.omega)?;
        check_nonneg("N", m.n)?;
    }
    let nodes: Vec<f64> = modes.iter().map(|m| m.omega).collect();
    if e == 0.0 {
        return Ok(WaterFillingResult {
            theta: f64::INFINITY,
            allocations: vec![0.0; modes.len()],
            nodes,
            capacity: 0.0,
            budget_residual: 0.0,
        });
    }
    let alloc = |theta: f64| -> Vec<f64> { modes.iter().map(|m| (planck(theta, hbar, m.omega) - m.n).max(0.0)).collect() };
    let spent = |a: &[f64]| -> f64 { a.iter().zip(modes).map(|(x, m)| hbar * m.omega * x).sum() };
    let budget_at = |theta: f64| -> Result<f64> { Ok(spent(&alloc(theta))) };
    let mean_omega = nodes.iter().sum::<f64>() / nodes.len() as f64;
    let theta = solve_theta(&budget_at, e, hbar * mean_omega)?;
    let allocations = alloc(theta);
    let capacity = allocations
        .iter()
        .zip(modes)
        .map(|(a, m)| if *a > 0.0 { (g_raw(m.n + a) - g_raw(m.n)).max(0.0) } else { 0.0 })
        .sum();
    let budget_residual = spent(&allocations) - e;
    Ok(WaterFillingResult { theta, allocations, nodes, capacity, budget_residual })
}

/// Noise spectrum `N(omega)` on a band.
#[derive(Clone)]
pub enum NoiseSpectrum {
    Flat(f64),
    /// Equilibrium noise at inverse temperature `theta`.
    Planck(f64),
    /// `(omega, N)` pairs sorted by frequency, linearly interpolated.
    Tabulated(Vec<(f64, f64)>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for NoiseSpectrum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseSpectrum::Flat(n) => write!(f, "Flat({n})"),
            NoiseSpectrum::Planck(t) => write!(f, "Planck({t})"),
            NoiseSpectrum::Tabulated(t) => write!(f, "Tabulated({} points)", t.len()),
            NoiseSpectrum::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl NoiseSpectrum {
    pub fn at(&self, omega: f64, hbar: f64) -> f64 {
        match self {
            NoiseSpectrum::Flat(n) => *n,
            NoiseSpectrum::Planck(theta) => planck(*theta, hbar, omega),
            NoiseSpectrum::Tabulated(t) => interpolate(t, omega),
            NoiseSpectrum::Custom(f) => f(omega),
        }
    }

    fn validate(&self, band: (f64, f64)) -> Result<()> {
        match self {
            NoiseSpectrum::Flat(n) => check_nonneg("N", *n),
            NoiseSpectrum::Planck(theta) => check_pos("theta", *theta),
            NoiseSpectrum::Tabulated(t) => {
                if t.len() < 2 {
                    return Err(Error::Domain("tabulated spectrum needs at least two points".into()));
                }
                if t.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::Domain("tabulated frequencies must be strictly increasing".into()));
                }
                if let Some((_, n)) = t.iter().find(|(_, n)| !(*n >= 0.0)) {
                    return Err(Error::Domain(format!("tabulated noise {n} is negative")));
                }
                if band.0 < t[0].0 || band.1 > t[t.len() - 1].0 {
                    return Err(Error::Domain("band extends beyond the tabulated spectrum".into()));
                }
                Ok(())
            }
            NoiseSpectrum::Custom(_) => Ok(()),
        }
    }
}

fn interpolate(t: &[(f64, f64)], x: f64) -> f64 {
    let k = t.partition_point(|(w, _)| *w <= x);
    if k == 0 {
        return t[0].1;
    }
    if k >= t.len() {
        return t[t.len() - 1].1;
    }
    let (x0, y0) = t[k - 1];
    let (x1, y1) = t[k];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

const KINK_SAMPLES: usize = 512;
const MAX_DEPTH: u32 = 60;

/// Sampling grid for kink detection; logarithmic on wide positive bands.
fn sample_grid(lo: f64, hi: f64) -> Vec<f64> {
    let n = KINK_SAMPLES;
    if lo > 0.0 && hi / lo > 50.0 {
        let (a, b) = (lo.ln(), hi.ln());
        (0..=n).map(|k| if k == n { hi } else { (a + (b - a) * k as f64 / n as f64).exp() }).collect()
    } else {
        (0..=n).map(|k| if k == n { hi } else { lo + (hi - lo) * k as f64 / n as f64 }).collect()
    }
}

/// Subintervals of the band where `N_theta(omega) > N(omega)`.
fn active_pieces(gap: &dyn Fn(f64) -> f64, grid: &[f64]) -> Vec<(f64, f64)> {
    let mut pieces = Vec::new();
    let mut start: Option<f64> = if gap(grid[0]) > 0.0 { Some(grid[0]) } else { None };
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ga, gb) = (gap(a), gap(b));
        if (ga > 0.0) != (gb > 0.0) {
            let kink = numeric::bisect(gap, a, b, 1e-14 * b.abs().max(1e-300), 200).unwrap_or(0.5 * (a + b));
            if gb > 0.0 {
                start = Some(kink);
            } else if let Some(s) = start.take() {
                if kink > s {
                    pieces.push((s, kink));
                }
            }
        }
    }
    if let Some(s) = start {
        let end = grid[grid.len() - 1];
        if end > s {
            pieces.push((s, end));
        }
    }
    pieces
}

fn integrate_pieces(f: &dyn Fn(f64) -> f64, pieces: &[(f64, f64)], tol: f64) -> Result<f64> {
    let total_len: f64 = pieces.iter().map(|(a, b)| b - a).sum();
    let mut acc = 0.0;
    for &(a, b) in pieces {
        let share = if total_len > 0.0 { tol * (b - a) / total_len } else { tol };
        let (v, _) = numeric::adaptive_simpson(&f, a, b, share.max(1e-300), MAX_DEPTH)?;
        acc += v;
    }
    Ok(acc)
}

/// Capacity of the waveform channel with noise spectrum `noise` on
/// `band = (omega_low, omega_high)`, in nats per second.
pub fn waveform_capacity(noise: &NoiseSpectrum, band: (f64, f64), e: f64, hbar: f64) -> Result<WaterFillingResult> {
    let (lo, hi) = band;
    check_pos("omega_low", lo).or_else(|_| check_nonneg("omega_low", lo))?;
    if !(hi > lo) || !hi.is_finite() {
        return Err(Error::Domain(format!("band ({lo}, {hi}) must be ordered and finite")));
    }
    check_nonneg("E", e)?;
    check_pos("hbar", hbar)?;
    noise.validate(band)?;
    let grid = sample_grid(lo, hi);
    if e == 0.0 {
        return Ok(WaterFillingResult {
            theta: f64::INFINITY,
            allocations: vec![0.0; grid.len()],
            nodes: grid,
            capacity: 0.0,
            budget_residual: 0.0,
        });
    }
    let tol = 1e-10 * e.max(1.0);
    let n_at = |w: f64| noise.at(w, hbar);
    let budget_at = |theta: f64| -> Result<f64> {
        let gap = |w: f64| planck(theta, hbar, w) - n_at(w);
        let pieces = active_pieces(&gap, &grid);
        let integrand = |w: f64| hbar * w * gap(w).max(0.0);
        Ok(integrate_pieces(&integrand, &pieces, tol * 2.0 * PI)? / (2.0 * PI))
    };
    let theta = solve_theta(&budget_at, e, hbar * 0.5 * (lo + hi))?;
    let gap = |w: f64| planck(theta, hbar, w) - n_at(w);
    let pieces = active_pieces(&gap, &grid);
    let cap = |w: f64| {
        let nt = planck(theta, hbar, w);
        let n = n_at(w);
        if nt > n {
            (g_raw(nt) - g_raw(n)).max(0.0)
        } else {
            0.0
        }
    };
    let capacity = integrate_pieces(&cap, &pieces, tol * 2.0 * PI)? / (2.0 * PI);
    let spent = budget_at(theta)?;
    let allocations = grid.iter().map(|&w| gap(w).max(0.0)).collect();
    Ok(WaterFillingResult { theta, allocations, nodes: grid, capacity, budget_residual: spent - e })
}

/// Closed-form broadband quantities at equilibrium noise power `P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Broadband {
    /// Inverse temperature of the background; `inf` at `P = 0`.
    pub theta_p: f64,
    /// `sqrt(pi P / 3 hbar)`.
    pub s_p: f64,
    /// `sqrt(pi (P + E) / 3 hbar) - sqrt(pi P / 3 hbar)`.
    pub c: f64,
}

pub fn broadband(p: f64, e: f64, hbar: f64) -> Result<Broadband> {
    check_nonneg("P", p)?;
    check_pos("E", e)?;
    check_pos("hbar", hbar)?;
    let theta_p = if p == 0.0 { f64::INFINITY } else { (PI / (12.0 * hbar * p)).sqrt() };
    let s_p = (PI * p / (3.0 * hbar)).sqrt();
    let c = (PI * (p + e) / (3.0 * hbar)).sqrt() - s_p;
    Ok(Broadband { theta_p, s_p, c })
}

/// `mu(s, p) = (1+s) p E + log[(1 + E - pE)^{1+s} - E^{1+s}]`.
pub fn gaussian_mu(e: f64, s: f64, p: f64) -> Result<f64> {
    check_gaussian_args(e, s, p, 0.0)?;
    Ok(gmu(e, s, p))
}

/// `mu~(s, p) = s {2pE + log[1 + p^2 E^2 - 2pE + 2E(1 - pE)/s]}`, any `s > 0`.
pub fn gaussian_mu_ex(e: f64, s: f64, p: f64) -> Result<f64> {
    check_gaussian_args(e, s, p, f64::MIN_POSITIVE)?;
    Ok(gmu_ex(e, s, p))
}

fn check_gaussian_args(e: f64, s: f64, p: f64, s_min: f64) -> Result<()> {
    check_nonneg("E", e)?;
    if !(s >= s_min) || !s.is_finite() {
        return Err(Error::Domain(format!("s = {s} out of range")));
    }
    check_nonneg("p", p)?;
    if p * e >= 1.0 {
        return Err(Error::Domain(format!("p = {p} must be below 1/E = {}", 1.0 / e)));
    }
    Ok(())
}

fn gmu(e: f64, s: f64, p: f64) -> f64 {
    (1.0 + s) * p * e + ((1.0 + e - p * e).powf(1.0 + s) - e.powf(1.0 + s)).ln()
}

fn gmu_ex(e: f64, s: f64, p: f64) -> f64 {
    s * (2.0 * p * e + (1.0 + p * p * e * e - 2.0 * p * e + 2.0 * e * (1.0 - p * e) / s).ln())
}

/// Analytic `d mu / d s`.
pub fn gaussian_mu_ds(e: f64, s: f64, p: f64) -> Result<f64> {
    check_gaussian_args(e, s, p, 0.0)?;
    let a = 1.0 + e - p * e;
    let (ap, ep) = (a.powf(1.0 + s), e.powf(1.0 + s));
    let elog = if e == 0.0 { 0.0 } else { ep * e.ln() };
    Ok(p * e + (ap * a.ln() - elog) / (ap - ep))
}

/// `q(E) = (1 + sqrt(4E^2 + 1)) / 2`.
pub fn q_of(e: f64) -> f64 {
    (1.0 + (4.0 * e * e + 1.0).sqrt()) / 2.0
}

/// Root in `[0, min(1, 1/E))` of `(1 + E - pE)^s (1 - p) = E^s`.
pub fn stationary_p(e: f64, s: f64) -> Result<f64> {
    check_pos("E", e)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    let upper = if e > 1.0 { 1.0 / e } else { 1.0 };
    let f = |p: f64| s * (1.0 + e - p * e).ln() + (1.0 - p).ln() - s * e.ln();
    numeric::bisect(f, 0.0, upper, 1e-16, 400)
}

/// `p(s, E) = 1/s + 1/(2E) - sqrt(1/s^2 + 1/(4E^2))`, the smaller root of
/// the expurgated stationarity quadratic.
pub fn expurgated_p(e: f64, s: f64) -> f64 {
    let a = 1.0 / s;
    let b = 1.0 / (2.0 * e);
    // rationalized form of a + b - sqrt(a^2 + b^2)
    2.0 * a * b / (a + b + (a * a + b * b).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianReliability {
    pub curve: ExponentCurve,
    pub q: f64,
    /// `p(1, E)`.
    pub p1: f64,
    /// End of the expurgated regime, `log q(E)`.
    pub knot_ex: f64,
    /// Start of the random-coding regime.
    pub knot_r: f64,
    /// `mu(1, p(1, E))`.
    pub mu1: f64,
    pub capacity: f64,
}

/// Knots and closed-form pieces of the pure-state Gaussian exponent.
pub fn gaussian_knots(e: f64) -> Result<(f64, f64, f64, f64)> {
    check_pos("E", e)?;
    let q = q_of(e);
    let p1 = 1.0 + 1.0 / e - q / e;
    let mu1 = 2.0 * (e + 1.0 - q) + q.ln();
    let knot_r = e + 1.0 - q + (q * q * q.ln() - e * e * e.ln()) / (q * q - e * e);
    Ok((q, p1, mu1, knot_r))
}

/// `E_ex(R) = 2E(1 - sqrt(1 - e^{-R}))`, valid for `R < log q(E)`.
pub fn gaussian_eex_closed(e: f64, r: f64) -> f64 {
    2.0 * e * (1.0 - (-(-r).exp_m1()).sqrt())
}

/// Random-coding and expurgated exponents of the pure-state Gaussian channel.
pub fn gaussian_reliability(e: f64, rates: &[f64]) -> Result<GaussianReliability> {
    check_pos("E", e)?;
    let capacity = g_raw(e);
    if let Some(r) = rates.iter().find(|r| !(**r > 0.0 && **r < capacity)) {
        return Err(Error::Domain(format!("rate {r} outside (0, C) with C = {capacity}")));
    }
    let (q, p1, mu1, knot_r) = gaussian_knots(e)?;
    let knot_ex = q.ln();
    let tol = 1e-10;
    let f_r = |s: f64| -> f64 {
        match stationary_p(e, s) {
            Ok(p) => gmu(e, s, p),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let f_ex = |s: f64| gmu_ex(e, s, expurgated_p(e, s));

    let mut curve = ExponentCurve {
        rates: rates.to_vec(),
        er: Vec::new(),
        eex: Vec::new(),
        e: Vec::new(),
        regime: Vec::new(),
        s_opt: Vec::new(),
        p_opt: Vec::new(),
    };
    for &r in rates {
        let (s_r, er) = numeric::grid_golden_max(|s| f_r(s) - s * r, 0.0, 1.0, 21, tol);
        let ex = numeric::golden_max_unbounded(|s| f_ex(s) - s * r, 1.0, tol, crate::reliability::S_MAX);
        let (s_ex, eex) = ex.unwrap_or((f64::INFINITY, f64::INFINITY));
        let regime = if r < knot_ex {
            Regime::Expurgated
        } else if r <= knot_r {
            Regime::Linear
        } else {
            Regime::RandomCoding
        };
        let (val, s, p) = match regime {
            Regime::Expurgated => (eex.max(er), s_ex, expurgated_p(e, s_ex)),
            Regime::Linear => (er.max(eex), 1.0, p1),
            Regime::RandomCoding => (er.max(eex), s_r, stationary_p(e, s_r)?),
        };
        curve.er.push(er.max(0.0));
        curve.eex.push(eex.max(0.0));
        curve.e.push(val.max(0.0));
        curve.regime.push(regime);
        curve.s_opt.push(s);
        curve.p_opt.push(p);
    }
    Ok(GaussianReliability { curve, q, p1, knot_ex, knot_r, mu1, capacity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::entropy;

    #[test]
    fn g_examples() {
        assert_eq!(g(0.0).unwrap(), 0.0);
        assert!((g(1.0).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((g(0.5).unwrap() - (1.5 * 1.5f64.ln() - 0.5 * 0.5f64.ln())).abs() < 1e-15);
        assert!(g(-1.0).is_err());
        assert!(g(1e-300).unwrap() > 0.0);
        assert!((g_prime(1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn single_mode_examples() {
        assert_eq!(single_mode_capacity(0.7, 0.0).unwrap(), 0.0);
        assert_eq!(single_mode_capacity(0.0, 2.5).unwrap(), g(2.5).unwrap());
        let c = single_mode_capacity(1.0, 2.0).unwrap();
        let oracle = (4.0 * 4f64.ln() - 3.0 * 3f64.ln()) - 2.0 * 2f64.ln();
        assert!((c - oracle).abs() < 1e-14);
    }

    #[test]
    fn photon_distribution_examples() {
        let d = photon_distribution(0.3, 0.0, 1e-9).unwrap();
        assert_eq!(d.probs, vec![1.0]);
        let d = photon_distribution(0.0, 0.0, 1e-9).unwrap();
        assert!(d.degenerate && d.probs == vec![1.0]);
        let d = photon_distribution(1.0, 1.0, 1e-12).unwrap();
        assert!((d.probs[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.mean - 1.0).abs() < 1e-9);
        assert!(d.tail_mass <= 1e-12);
        let d = photon_distribution(0.0, 2.0, 1e-12).unwrap();
        assert!((d.probs[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.probs[1] / d.probs[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.mean - 2.0).abs() < 1e-9);
    }

    #[test]
    fn thermal_examples() {
        let t = thermal_state(0.0, 5).unwrap();
        assert_eq!(t.state.matrix()[(0, 0)].re, 1.0);
        let t = thermal_state(1.0, 40).unwrap();
        assert!((entropy(&t.state) - g(1.0).unwrap()).abs() < 1e-6);
        assert!((t.truncation_mass - 0.5f64.powi(40)).abs() < 1e-25);
        let t = thermal_state(2.0, 6).unwrap();
        let m = t.state.matrix();
        for k in 0..5 {
            assert!((m[(k + 1, k + 1)].re / m[(k, k)].re - 2.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(fock_dim_for_tail(1.0, 1e-9).unwrap(), 30);
    }

    #[test]
    fn coherent_examples() {
        let z = Complex64::new(0.3, -0.4);
        assert_eq!(coherent_overlap(z, z), 1.0);
        assert!((coherent_overlap(z, z + Complex64::new(0.6, 0.8)) - (-1f64).exp()).abs() < 1e-15);
        let w = Complex64::new(-0.5, 0.2);
        let (a, ta) = coherent_state(z, 30).unwrap();
        let (b, tb) = coherent_state(w, 30).unwrap();
        assert!(ta < 1e-20 && tb < 1e-20);
        assert!((a.inner(&b).norm_sqr() - coherent_overlap(z, w)).abs() < 1e-12);
    }

    #[test]
    fn multimode_single_mode_reduces() {
        let r = multimode_capacity(&[ModeSpec { omega: 1.0, n: 0.4 }], 1.7, 1.0).unwrap();
        assert!((r.allocations[0] - 1.7).abs() < 1e-9);
        assert!((r.capacity - single_mode_capacity(0.4, 1.7).unwrap()).abs() < 1e-9);
        assert!(r.budget_residual.abs() <= 1e-8 * 1.7);
    }

    #[test]
    fn multimode_two_identical_modes_split_equally() {
        let (omega, n, e) = (2.0, 0.3, 3.0);
        let modes = [ModeSpec { omega, n }, ModeSpec { omega, n }];
        let r = multimode_capacity(&modes, e, 1.0).unwrap();
        assert!((r.allocations[0] - r.allocations[1]).abs() < 1e-9);
        let want = 2.0 * single_mode_capacity(n, e / (2.0 * omega)).unwrap();
        assert!((r.capacity - want).abs() < 1e-9);
        // grid oracle over the split
        let mut best = 0.0_f64;
        for k in 0..=10_000 {
            let x = e * k as f64 / 10_000.0;
            let c = single_mode_capacity(n, x / omega).unwrap() + single_mode_capacity(n, (e - x) / omega).unwrap();
            best = best.max(c);
        }
        assert!((r.capacity - best).abs() < 1e-6);
    }

    #[test]
    fn multimode_noisy_mode_gets_nothing() {
        let modes = [ModeSpec { omega: 1.0, n: 0.1 }, ModeSpec { omega: 1.0, n: 1e6 }];
        let r = multimode_capacity(&modes, 1.0, 1.0).unwrap();
        assert_eq!(r.allocations[1], 0.0);
        let z = multimode_capacity(&modes, 0.0, 1.0).unwrap();
        assert!(z.theta.is_infinite() && z.capacity == 0.0);
    }

    #[test]
    fn waveform_flat_narrow_band_matches_single_mode() {
        let (n0, e, w0, dw) = (0.5, 0.02, 10.0, 0.01);
        let r = waveform_capacity(&NoiseSpectrum::Flat(n0), (w0 - dw / 2.0, w0 + dw / 2.0), e, 1.0).unwrap();
        let oracle = dw / (2.0 * PI) * single_mode_capacity(n0, 2.0 * PI * e / (w0 * dw)).unwrap();
        assert!(((r.capacity - oracle) / oracle).abs() < 1e-4, "{} vs {oracle}", r.capacity);
        assert!(r.budget_residual.abs() <= 1e-8 * e);
        let z = waveform_capacity(&NoiseSpectrum::Flat(n0), (1.0, 2.0), 0.0, 1.0).unwrap();
        assert!(z.theta.is_infinite() && z.capacity == 0.0);
    }

    #[test]
    fn waveform_kinked_spectrum() {
        // noise ramps up across the band, so the water level crosses it
        let noise = NoiseSpectrum::Tabulated(vec![(1.0, 0.0), (3.0, 2.0)]);
        let r = waveform_capacity(&noise, (1.0, 3.0), 0.05, 1.0).unwrap();
        assert!(r.budget_residual.abs() <= 1e-8 * 0.05);
        assert!(r.allocations.first().unwrap() > &0.0);
        assert_eq!(*r.allocations.last().unwrap(), 0.0);
    }

    #[test]
    fn broadband_examples() {
        let b = broadband(0.0, 3.0 / PI, 1.0).unwrap();
        assert!((b.c - 1.0).abs() < 1e-15);
        let b = broadband(0.0, 1.0, 1.0).unwrap();
        assert!((b.c - (PI / 3.0).sqrt()).abs() < 1e-15);
        assert!(b.theta_p.is_infinite());
        let b = broadband(1.0, 1.0, 1.0).unwrap();
        assert!((b.theta_p - (PI / 12.0).sqrt()).abs() < 1e-15);
        assert!(broadband(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_mu_examples() {
        assert!(gaussian_mu(1.3, 0.0, 0.0).unwrap().abs() < 1e-15);
        let e: f64 = 0.8;
        let c = (e + 1.0) * (e + 1.0).ln() - e * e.ln();
        assert!((gaussian_mu_ds(e, 0.0, 0.0).unwrap() - c).abs() < 1e-14);
        assert!(gaussian_mu(2.0, 0.5, 0.5).is_err());
        for s in [1.0, 2.0, 5.0] {
            let p = expurgated_p(e, s);
            let resid = p * p - 2.0 * p * (1.0 / s + 1.0 / (2.0 * e)) + 1.0 / (s * e);
            assert!(resid.abs() < 1e-10);
            let alt = 1.0 / s + 1.0 / e - q_of(e / s) / e;
            assert!((p - alt).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_p_at_s_one_matches_closed_form() {
        for e in [0.5, 1.0, 3.0] {
            let (_, p1, mu1, _) = gaussian_knots(e).unwrap();
            assert!((stationary_p(e, 1.0).unwrap() - p1).abs() < 1e-12);
            assert!((gaussian_mu(e, 1.0, p1).unwrap() - mu1).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_knots_at_e_one() {
        let (q, p1, _, _) = gaussian_knots(1.0).unwrap();
        assert!((q - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((p1 - (2.0 - q)).abs() < 1e-15);
        assert!((q_of(0.0) - 1.0).abs() < 1e-15);
    }
    #[test]
    fn gaussian_exponents_match_closed_forms() {
        let e = 1.0;
        let (q, p1, mu1, knot_r) = gaussian_knots(e).unwrap();
        let c = g(e).unwrap();
        let rates: Vec<f64> = (1..60).map(|k| c * k as f64 / 60.0).collect();
        let rel = gaussian_reliability(e, &rates).unwrap();
        assert!((rel.knot_ex - q.ln()).abs() < 1e-15);
        for (k, &r) in rates.iter().enumerate() {
            match rel.curve.regime[k] {
                Regime::Expurgated => {
                    let want = gaussian_eex_closed(e, r);
                    assert!((rel.curve.e[k] - want).abs() < 1e-7, "R={r}: {} vs {want}", rel.curve.e[k]);
                }
                Regime::Linear => {
                    assert!((rel.curve.e[k] - (mu1 - r)).abs() < 1e-7);
                    assert_eq!(rel.curve.p_opt[k], p1);
                }
                Regime::RandomCoding => {
                    assert!(r > knot_r);
                    assert!(rel.curve.s_opt[k] < 1.0);
                }
            }
        }
        // both boundaries are continuous
        let at_ex = mu1 - q.ln();
        assert!((gaussian_eex_closed(e, q.ln()) - at_ex).abs() < 1e-12);
        let lin = gaussian_reliability(e, &[knot_r + 1e-7]).unwrap();
        assert!((lin.curve.e[0] - (mu1 - knot_r)).abs() < 1e-6);
        assert!(gaussian_reliability(e, &[c]).is_err());
    }
}
