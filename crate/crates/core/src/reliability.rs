//! Random-coding and expurgated exponents for pure-state c-q channels.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{self, ChannelCq};
use crate::linalg::{self, CMatrix};
use crate::numeric;
use crate::qstate::Tolerances;

/// Largest `s` tried by the expurgated optimizer before declaring the
/// exponent infinite.
pub const S_MAX: f64 = 1e6;

fn check_s(s: f64, min: f64) -> Result<()> {
    if !(s >= min) || !s.is_finite() {
        return Err(Error::Domain(format!("s = {s} must be a finite real >= {min}")));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p = {p} must be a finite real >= 0")));
    }
    Ok(())
}

/// `sum_i w_i S_i` for arbitrary nonnegative weights.
fn weighted_states(ch: &ChannelCq, w: &[f64]) -> CMatrix {
    let d = ch.dim();
    let mut acc = CMatrix::zeros(d, d);
    for (wi, s) in w.iter().zip(ch.states()) {
        if *wi != 0.0 {
            acc += s.matrix() * Complex64::new(*wi, 0.0);
        }
    }
    acc
}

/// Positive spectrum of `A`, using the usual relative floor.
fn positive_spectrum(a: &CMatrix) -> Vec<f64> {
    let spec = linalg::eigh(a);
    let cut = spec.cutoff(Tolerances::default().eig_floor);
    spec.values.into_iter().filter(|&l| l > cut && l > 0.0).collect()
}

fn trace_power(a: &CMatrix, s: f64) -> f64 {
    positive_spectrum(a).iter().map(|l| l.powf(1.0 + s)).sum()
}

/// `-log Tr (sum_i w_i S_i)^{1+s}`; both `mu` and `mu_constrained` go through here.
fn mu_weighted(ch: &ChannelCq, w: &[f64], s: f64) -> f64 {
    -trace_power(&weighted_states(ch, w), s).ln()
}

/// `mu(pi, s) = -log Tr S_pi^{1+s}`. Defined for any `s >= 0`.
pub fn mu(ch: &ChannelCq, pi: &[f64], s: f64) -> Result<f64> {
    ch.check_probs(pi)?;
    check_s(s, 0.0)?;
    Ok(mu_weighted(ch, pi, s))
}

/// `d mu / d s = -sum lambda^{1+s} log lambda / sum lambda^{1+s}`.
pub fn mu_prime(ch: &ChannelCq, pi: &[f64], s: f64) -> Result<f64> {
    ch.check_probs(pi)?;
    check_s(s, 0.0)?;
    let spec = positive_spectrum(&weighted_states(ch, pi));
    let num: f64 = spec.iter().map(|l| l.powf(1.0 + s) * l.ln()).sum();
    let den: f64 = spec.iter().map(|l| l.powf(1.0 + s)).sum();
    Ok(-num / den)
}

/// Squared overlaps `|<psi_i|psi_k>|^2`.
fn squared_overlaps(ch: &ChannelCq) -> Result<Vec<Vec<f64>>> {
    let vs = ch.pure_states().ok_or(Error::MixedStates)?;
    Ok(vs.iter().map(|a| vs.iter().map(|b| a.inner(b).norm_sqr()).collect()).collect())
}

/// `-s log sum_{ik} w_i w_k |<psi_i|psi_k>|^{2/s}`, any `s > 0`.
fn mu_ex_weighted(overlaps: &[Vec<f64>], w: &[f64], s: f64) -> f64 {
    let mut acc = 0.0;
    for (i, row) in overlaps.iter().enumerate() {
        if w[i] == 0.0 {
            continue;
        }
        for (k, g) in row.iter().enumerate() {
            if w[k] != 0.0 && *g > 0.0 {
                acc += w[i] * w[k] * g.powf(1.0 / s);
            }
        }
    }
    -s * acc.ln()
}

/// Expurgated function `mu~(pi, s)` for `s >= 1`.
pub fn mu_ex(ch: &ChannelCq, pi: &[f64], s: f64) -> Result<f64> {
    ch.check_probs(pi)?;
    check_s(s, 1.0)?;
    Ok(mu_ex_weighted(&squared_overlaps(ch)?, pi, s))
}

fn tilted(pi: &[f64], cost: &[f64], p: f64, budget: f64) -> Vec<f64> {
    pi.iter().zip(cost).map(|(q, f)| q * (p * (f - budget)).exp()).collect()
}

/// `-log Tr {sum_i pi_i e^{p[f(i) - E]} S_i}^{1+s}`.
pub fn mu_constrained(ch: &ChannelCq, pi: &[f64], s: f64, p: f64, budget: f64) -> Result<f64> {
    ch.check_probs(pi)?;
    check_s(s, 0.0)?;
    check_p(p)?;
    let cost = ch.cost().ok_or(Error::NoCost)?;
    Ok(mu_weighted(ch, &tilted(pi, cost, p, budget), s))
}

/// `-s log sum_{ik} pi_i pi_k e^{p[f(i) + f(k) - 2E]} |<psi_i|psi_k>|^{2/s}`.
pub fn mu_ex_constrained(ch: &ChannelCq, pi: &[f64], s: f64, p: f64, budget: f64) -> Result<f64> {
    ch.check_probs(pi)?;
    check_s(s, 1.0)?;
    check_p(p)?;
    let cost = ch.cost().ok_or(Error::NoCost)?;
    Ok(mu_ex_weighted(&squared_overlaps(ch)?, &tilted(pi, cost, p, budget), s))
}

/// Which bound attains `E(R)` at a rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Expurgated,
    Linear,
    RandomCoding,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Expurgated => "expurgated",
            Regime::Linear => "linear",
            Regime::RandomCoding => "random_coding",
        }
    }
}

/// Exponent lower bounds on a grid of rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentCurve {
    pub rates: Vec<f64>,
    pub er: Vec<f64>,
    pub eex: Vec<f64>,
    pub e: Vec<f64>,
    pub regime: Vec<Regime>,
    pub s_opt: Vec<f64>,
    pub p_opt: Vec<f64>,
}

impl ExponentCurve {
    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    /// CSV with columns `R,Er,Eex,E,regime,s_opt,p_opt`, 17 significant digits.
    /// `R`, `Er`, `Eex` and `E` are multiplied by `scale`.
    pub fn to_csv(&self, scale: f64) -> String {
        let mut out = String::from("R,Er,Eex,E,regime,s_opt,p_opt\n");
        for k in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt17(self.rates[k] * scale),
                fmt17(self.er[k] * scale),
                fmt17(self.eex[k] * scale),
                fmt17(self.e[k] * scale),
                self.regime[k].as_str(),
                fmt17(self.s_opt[k]),
                fmt17(self.p_opt[k]),
            );
        }
        out
    }
}

/// Round-trip-safe float formatting.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentOptions {
    /// Fix the input distribution instead of optimizing over it.
    pub pinned_prior: Option<Vec<f64>>,
    /// Upper end of the `p` search; `None` means `50 / E`.
    pub p_max: Option<f64>,
    /// Argument tolerance of the outer golden-section searches.
    pub tol: f64,
}

impl Default for ExponentOptions {
    fn default() -> Self {
        ExponentOptions { pinned_prior: None, p_max: None, tol: 1e-8 }
    }
}

/// Inner problem: the best value of `mu` or `mu~` over `pi` (and `p`) at fixed `s`.
struct Inner<'a> {
    ch: &'a ChannelCq,
    overlaps: Vec<Vec<f64>>,
    vertices: Vec<Vec<f64>>,
    pinned: Option<Vec<f64>>,
    cost: Option<(&'a [f64], f64)>,
    p_max: f64,
}

const INNER_TOL: f64 = 1e-12;

impl Inner<'_> {
    fn weights(&self, pi: &[f64], p: f64) -> Vec<f64> {
        match self.cost {
            Some((cost, budget)) => tilted(pi, cost, p, budget),
            None => pi.to_vec(),
        }
    }

    fn tilt(&self, p: f64) -> Vec<f64> {
        match self.cost {
            Some((cost, budget)) => cost.iter().map(|f| (p * (f - budget)).exp()).collect(),
            None => vec![1.0; self.ch.alphabet_size()],
        }
    }

    /// `sup_pi mu(pi, s, p)`.
    fn best_mu_at(&self, s: f64, p: f64) -> Result<f64> {
        if let Some(pi) = &self.pinned {
            return Ok(mu_weighted(self.ch, &self.weights(pi, p), s));
        }
        let t = self.tilt(p);
        let value = |pi: &[f64]| {
            let w: Vec<f64> = pi.iter().zip(&t).map(|(a, b)| a * b).collect();
            -trace_power(&weighted_states(self.ch, &w), s)
        };
        let eval = |pi: &[f64]| {
            let w: Vec<f64> = pi.iter().zip(&t).map(|(a, b)| a * b).collect();
            let a = weighted_states(self.ch, &w);
            let spec = linalg::eigh(&a);
            let cut = spec.cutoff(Tolerances::default().eig_floor);
            let a_s = spec.map(|l| if l > cut && l > 0.0 { l.powf(s) } else { 0.0 });
            let tr: f64 = spec.values.iter().filter(|&&l| l > cut && l > 0.0).map(|l| l.powf(1.0 + s)).sum();
            let grad = self
                .ch
                .states()
                .iter()
                .zip(&t)
                .map(|(st, ti)| -(1.0 + s) * ti * linalg::trace_product(&a_s, st.matrix()).re)
                .collect();
            (-tr, grad)
        };
        let out = numeric::maximize_over_polytope(&self.vertices, eval, value, INNER_TOL, info::DEFAULT_MAX_ITER);
        if !out.converged && out.gap > 1e-8 {
            return Err(Error::NoConvergenceScalar(format!("inner maximization at s = {s}, p = {p}: gap {:e}", out.gap)));
        }
        Ok(-(-out.value).ln())
    }

    /// `sup_pi mu~(pi, s, p)`.
    fn best_mu_ex_at(&self, s: f64, p: f64) -> Result<f64> {
        if let Some(pi) = &self.pinned {
            return Ok(mu_ex_weighted(&self.overlaps, &self.weights(pi, p), s));
        }
        let t = self.tilt(p);
        let b: Vec<Vec<f64>> = self
            .overlaps
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(k, g)| if *g > 0.0 { t[i] * t[k] * g.powf(1.0 / s) } else { 0.0 }).collect())
            .collect();
        let quad = |pi: &[f64]| -> f64 {
            b.iter().enumerate().map(|(i, row)| pi[i] * row.iter().zip(pi).map(|(x, y)| x * y).sum::<f64>()).sum()
        };
        let eval = |pi: &[f64]| {
            let grad = b.iter().map(|row| -2.0 * row.iter().zip(pi).map(|(x, y)| x * y).sum::<f64>()).collect();
            (-quad(pi), grad)
        };
        let out = numeric::maximize_over_polytope(&self.vertices, eval, |pi| -quad(pi), INNER_TOL, info::DEFAULT_MAX_ITER);
        if !out.converged && out.gap > 1e-8 {
            return Err(Error::NoConvergenceScalar(format!("inner maximization at s = {s}, p = {p}: gap {:e}", out.gap)));
        }
        Ok(-s * (-out.value).ln())
    }

    /// Best over `p` in `[0, p_max]` (just `p = 0` without a cost). Returns `(value, p)`.
    fn over_p(&self, f: impl Fn(f64) -> Result<f64>, tol: f64) -> Result<(f64, f64)> {
        if self.cost.is_none() {
            return Ok((f(0.0)?, 0.0));
        }
        let failed = std::cell::Cell::new(None);
        let g = |p: f64| match f(p) {
            Ok(v) => v,
            Err(e) => {
                failed.set(Some(e.to_string()));
                f64::NEG_INFINITY
            }
        };
        let (p, v) = numeric::grid_golden_max(g, 0.0, self.p_max, 11, tol);
        if let Some(msg) = failed.take() {
            return Err(Error::NoConvergenceScalar(msg));
        }
        Ok((v, p))
    }

    fn big_f(&self, s: f64, tol: f64) -> Result<(f64, f64)> {
        self.over_p(|p| self.best_mu_at(s, p), tol)
    }

    fn big_g(&self, s: f64, tol: f64) -> Result<(f64, f64)> {
        self.over_p(|p| self.best_mu_ex_at(s, p), tol)
    }
}

/// One rate of an exponent curve.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    er: f64,
    s_r: f64,
    p_r: f64,
    eex: f64,
    s_ex: f64,
    p_ex: f64,
}

fn maximize_catching(f: impl Fn(f64) -> Result<f64>, run: impl FnOnce(&dyn Fn(f64) -> f64) -> Option<(f64, f64)>) -> Result<Option<(f64, f64)>> {
    let failed = std::cell::Cell::new(None);
    let g = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            failed.set(Some(e.to_string()));
            f64::NEG_INFINITY
        }
    };
    let out = run(&g);
    if let Some(msg) = failed.take() {
        return Err(Error::NoConvergenceScalar(msg));
    }
    Ok(out)
}

fn point(inner: &Inner, rate: f64, tol: f64) -> Result<Point> {
    let inner_tol = tol;
    // E_r: sup over s in [0, 1].
    let best_p_r = std::cell::Cell::new(0.0);
    let er_fn = |s: f64| -> Result<f64> {
        let (v, _) = inner.big_f(s, inner_tol)?;
        Ok(v - s * rate)
    };
    let (s_r, er) = maximize_catching(er_fn, |g| Some(numeric::grid_golden_max(g, 0.0, 1.0, 11, tol)))?.expect("bounded search");
    if inner.cost.is_some() {
        best_p_r.set(inner.big_f(s_r, inner_tol)?.1);
    }
    // E_ex: sup over s >= 1.
    let ex_fn = |s: f64| -> Result<f64> {
        let (v, _) = inner.big_g(s, inner_tol)?;
        Ok(v - s * rate)
    };
    let ex = maximize_catching(ex_fn, |g| numeric::golden_max_unbounded(g, 1.0, tol, S_MAX))?;
    let (s_ex, eex, p_ex) = match ex {
        Some((s, v)) => {
            let p = if inner.cost.is_some() { inner.big_g(s, inner_tol)?.1 } else { 0.0 };
            (s, v, p)
        }
        None => (f64::INFINITY, f64::INFINITY, 0.0),
    };
    Ok(Point { er: er.max(0.0), s_r, p_r: best_p_r.get(), eex: eex.max(0.0), s_ex, p_ex })
}

/// Lower bounds `E_r(R)`, `E_ex(R)` and `E(R) = max` on a grid of rates.
///
/// With `budget`, the channel cost enters through the tilt `e^{p[f(i) - E]}`
/// and `pi` ranges over distributions with mean cost at most `E`.
pub fn exponents(ch: &ChannelCq, rates: &[f64], budget: Option<f64>, opts: &ExponentOptions) -> Result<ExponentCurve> {
    if !ch.is_pure() {
        return Err(Error::MixedStates);
    }
    if let Some(r) = rates.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(Error::Domain(format!("rate {r} must be positive and finite")));
    }
    let vertices = info::feasible_vertices(ch, budget)?;
    let cost = match budget {
        Some(e) => Some((ch.cost().ok_or(Error::NoCost)?, e)),
        None => None,
    };
    if let Some(pi) = &opts.pinned_prior {
        ch.check_probs(pi)?;
        if let Some((c, e)) = cost {
            let spent: f64 = pi.iter().zip(c).map(|(a, b)| a * b).sum();
            if spent > e + Tolerances::default().prob {
                return Err(Error::Infeasible(format!("pinned prior spends {spent} > budget {e}")));
            }
        }
    }
    let p_max = opts.p_max.unwrap_or_else(|| match budget {
        Some(e) if e > 0.0 => 50.0 / e,
        _ => 50.0,
    });
    let inner = Inner {
        ch,
        overlaps: squared_overlaps(ch)?,
        vertices,
        pinned: opts.pinned_prior.clone(),
        cost,
        p_max,
    };
    let points = rates.par_iter().map(|&r| point(&inner, r, opts.tol)).collect::<Result<Vec<_>>>()?;

    let mut curve = ExponentCurve {
        rates: rates.to_vec(),
        er: Vec::new(),
        eex: Vec::new(),
        e: Vec::new(),
        regime: Vec::new(),
        s_opt: Vec::new(),
        p_opt: Vec::new(),
    };
    for pt in points {
        let tie = 1e-9 * (1.0 + pt.er.abs());
        let (e, regime, s, p) = if pt.eex > pt.er + tie && pt.s_ex > 1.0 + 1e-6 {
            (pt.eex, Regime::Expurgated, pt.s_ex, pt.p_ex)
        } else if pt.s_r >= 1.0 - 1e-6 {
            (pt.er.max(pt.eex), Regime::Linear, 1.0, pt.p_r)
        } else {
            (pt.er.max(pt.eex), Regime::RandomCoding, pt.s_r, pt.p_r)
        };
        curve.er.push(pt.er);
        curve.eex.push(pt.eex);
        curve.e.push(e);
        curve.regime.push(regime);
        curve.s_opt.push(s);
        curve.p_opt.push(p);
    }
    Ok(curve)
}
