//! Entropy-bound quantities and capacity optimization for c-q channels.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::numeric;
use crate::qstate::{self, DecisionRule, DensityMatrix, Ensemble, Letter, PureState, Tolerances};

pub const DEFAULT_OPT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Classical-quantum channel `i -> S_i` with an optional letter cost.
#[derive(Debug, Clone)]
pub struct ChannelCq {
    states: Vec<DensityMatrix>,
    pure: Option<Vec<PureState>>,
    cost: Option<Vec<f64>>,
    entropies: Vec<f64>,
}

impl ChannelCq {
    pub fn new(states: Vec<DensityMatrix>, cost: Option<Vec<f64>>) -> Result<Self> {
        let first = states.first().ok_or(Error::Empty("channel alphabet"))?;
        let dim = first.dim();
        for s in &states {
            if s.dim() != dim {
                return Err(Error::DimMismatch { expected: dim, found: s.dim() });
            }
        }
        if let Some(c) = &cost {
            check_cost(c, states.len())?;
        }
        let tol = Tolerances::default();
        let pure = if states.iter().all(|s| s.is_pure(tol.norm)) {
            Some(states.iter().map(|s| PureState::normalized(s.principal_vector())).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        let entropies = states.iter().map(qstate::entropy).collect();
        Ok(ChannelCq { states, pure, cost, entropies })
    }

    /// Channel whose letters are the given pure states. The amplitude
    /// vectors are kept exactly as given.
    pub fn from_pure(vectors: Vec<PureState>, cost: Option<Vec<f64>>) -> Result<Self> {
        let first = vectors.first().ok_or(Error::Empty("channel alphabet"))?;
        let dim = first.dim();
        for v in &vectors {
            if v.dim() != dim {
                return Err(Error::DimMismatch { expected: dim, found: v.dim() });
            }
        }
        if let Some(c) = &cost {
            check_cost(c, vectors.len())?;
        }
        let states = vectors.iter().map(PureState::to_density).collect::<Vec<_>>();
        let entropies = vec![0.0; states.len()];
        Ok(ChannelCq { states, pure: Some(vectors), cost, entropies })
    }

    /// Binary pure-state channel with real overlap `epsilon`.
    pub fn binary(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Domain(format!("overlap {epsilon} outside [0, 1]")));
        }
        let second = if epsilon == 0.0 {
            PureState::basis(2, 1)
        } else {
            let t = epsilon.acos();
            PureState::from_real(&[t.cos(), t.sin()])?
        };
        Self::from_pure(vec![PureState::basis(2, 0), second], None)
    }

    pub fn with_cost(mut self, cost: Vec<f64>) -> Result<Self> {
        check_cost(&cost, self.states.len())?;
        self.cost = Some(cost);
        Ok(self)
    }

    pub fn alphabet_size(&self) -> usize {
        self.states.len()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &DensityMatrix {
        &self.states[i]
    }

    /// Pure-state vectors when every letter is pure.
    pub fn pure_states(&self) -> Option<&[PureState]> {
        self.pure.as_deref()
    }

    pub fn is_pure(&self) -> bool {
        self.pure.is_some()
    }

    pub fn cost(&self) -> Option<&[f64]> {
        self.cost.as_deref()
    }

    /// `H(S_i)` for every letter.
    pub fn entropies(&self) -> &[f64] {
        &self.entropies
    }

    pub fn ensemble(&self, probs: &[f64]) -> Result<Ensemble> {
        self.check_probs(probs)?;
        Ensemble::new(
            probs
                .iter()
                .zip(&self.states)
                .enumerate()
                .map(|(i, (&prob, s))| Letter { prob, state: s.clone(), cost: self.cost.as_ref().map(|c| c[i]) })
                .collect(),
        )
    }

    /// `S_pi = sum_i pi_i S_i`.
    pub fn average(&self, probs: &[f64]) -> DensityMatrix {
        let states: Vec<&DensityMatrix> = self.states.iter().collect();
        DensityMatrix::from_trusted(qstate::weighted_sum(probs, &states))
    }

    pub(crate) fn check_probs(&self, probs: &[f64]) -> Result<()> {
        if probs.len() != self.states.len() {
            return Err(Error::DimMismatch { expected: self.states.len(), found: probs.len() });
        }
        check_simplex(probs)
    }
}

fn check_cost(cost: &[f64], k: usize) -> Result<()> {
    if cost.len() != k {
        return Err(Error::DimMismatch { expected: k, found: cost.len() });
    }
    if let Some(c) = cost.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
        return Err(Error::Domain(format!("letter cost {c} must be a nonnegative real")));
    }
    Ok(())
}

pub(crate) fn check_simplex(probs: &[f64]) -> Result<()> {
    let tol = Tolerances::default().prob;
    if let Some(p) = probs.iter().find(|p| !(**p >= -tol && **p <= 1.0 + tol)) {
        return Err(Error::BadProbabilities(format!("probability {p} outside [0, 1]")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::BadProbabilities(format!("probabilities sum to {total}")));
    }
    Ok(())
}

/// Optimal value and maximizer of a capacity-type problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub value: f64,
    pub optimizer: Vec<f64>,
    pub iterations: usize,
    pub gap: f64,
}

/// `H(S_pi) - sum_i pi_i H(S_i)`.
pub fn holevo_chi(ens: &Ensemble) -> f64 {
    let avg = qstate::average_state(ens);
    let h_bar = qstate::entropy(&avg);
    let mean: f64 = ens.letters().iter().map(|l| l.prob * qstate::entropy(&l.state)).sum();
    let chi = (h_bar - mean).max(0.0);
    #[cfg(debug_assertions)]
    {
        let letters = ens.letters();
        if letters.len() <= 16 && letters.iter().all(|l| l.prob == 0.0 || l.prob > 1e-6) {
            let alt: f64 = letters
                .iter()
                .filter(|l| l.prob > 0.0)
                .map(|l| l.prob * qstate::relative_entropy(&l.state, &avg).unwrap_or(f64::INFINITY))
                .sum();
            debug_assert!((alt - chi).abs() <= 1e-8 * (1.0 + chi), "chi {chi} vs divergence form {alt}");
        }
    }
    chi
}

/// Classical mutual information between input letters and the outcomes of
/// `rule`, with the inconclusive outcome appended as an extra column.
pub fn accessible_info(ens: &Ensemble, rule: &DecisionRule) -> Result<f64> {
    if rule.dim() != ens.dim() {
        return Err(Error::DimMismatch { expected: ens.dim(), found: rule.dim() });
    }
    let x0 = rule.inconclusive();
    let rows: Vec<Vec<f64>> = ens
        .letters()
        .iter()
        .map(|l| {
            let mut row = rule.probabilities(&l.state);
            row.push(linalg::trace_product(l.state.matrix(), &x0).re.max(0.0));
            row
        })
        .collect();
    let probs = ens.probs();
    Ok(mutual_information(&probs, &rows))
}

/// `sum_i pi_i sum_j P(j|i) log(P(j|i) / Q(j))` with `0 log 0 = 0`.
pub fn mutual_information(probs: &[f64], rows: &[Vec<f64>]) -> f64 {
    let cols = rows.first().map_or(0, Vec::len);
    let mut q = vec![0.0; cols];
    for (p, row) in probs.iter().zip(rows) {
        for (qj, pj) in q.iter_mut().zip(row) {
            *qj += p * pj;
        }
    }
    let mut total = 0.0;
    for (p, row) in probs.iter().zip(rows) {
        if *p <= 0.0 {
            continue;
        }
        for (pj, qj) in row.iter().zip(&q) {
            if *pj > 0.0 && *qj > 0.0 {
                total += p * pj * (pj / qj).ln();
            }
        }
    }
    total.max(0.0)
}

/// Value of `Delta H(pi)` and the divergences `H(S_i; S_pi)` for every letter.
fn chi_and_gradient(ch: &ChannelCq, probs: &[f64]) -> (f64, Vec<f64>) {
    let avg = ch.average(probs);
    let h_bar = qstate::entropy(&avg);
    let mean: f64 = probs.iter().zip(ch.entropies()).map(|(p, h)| p * h).sum();
    let chi = h_bar - mean;
    // -Tr S_i log S_pi, with +inf when S_i leaves the support of S_pi.
    let spec = avg.spectrum();
    let cut = spec.cutoff(Tolerances::default().eig_floor);
    let support_tol = Tolerances::default().support;
    let grad = ch
        .states()
        .iter()
        .zip(ch.entropies())
        .map(|(s, h)| {
            let mut cross = 0.0;
            let mut outside = 0.0;
            for (k, &lam) in spec.values.iter().enumerate() {
                let v = spec.vectors.column(k);
                let w = (v.adjoint() * s.matrix() * v)[(0, 0)].re;
                if lam > cut && lam > 0.0 {
                    cross -= w * lam.ln();
                } else {
                    outside += w;
                }
            }
            if outside > support_tol {
                f64::INFINITY
            } else {
                (cross - h).max(0.0)
            }
        })
        .collect();
    (chi, grad)
}

fn chi_value(ch: &ChannelCq, probs: &[f64]) -> f64 {
    let avg = ch.average(probs);
    let mean: f64 = probs.iter().zip(ch.entropies()).map(|(p, h)| p * h).sum();
    qstate::entropy(&avg) - mean
}

/// Options for [`optimize_chi_with`].
#[derive(Debug, Clone, Copy)]
pub struct OptimizeOptions {
    pub opt_tol: f64,
    pub max_iter: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { opt_tol: DEFAULT_OPT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

/// Maximizes `Delta H(pi)` over input distributions, optionally subject to
/// `sum_i pi_i f(i) <= budget`.
pub fn optimize_chi(ch: &ChannelCq, budget: Option<f64>) -> Result<CapacityResult> {
    optimize_chi_with(ch, budget, OptimizeOptions::default())
}

pub fn optimize_chi_with(ch: &ChannelCq, budget: Option<f64>, opts: OptimizeOptions) -> Result<CapacityResult> {
    let vertices = feasible_vertices(ch, budget)?;
    let out = numeric::maximize_over_polytope(
        &vertices,
        |p| chi_and_gradient(ch, p),
        |p| chi_value(ch, p),
        opts.opt_tol,
        opts.max_iter,
    );
    let result = CapacityResult {
        value: out.value.max(0.0),
        optimizer: normalize(out.point),
        iterations: out.iterations,
        gap: out.gap,
    };
    if out.converged {
        Ok(result)
    } else {
        Err(Error::NoConvergence { best: Box::new(result) })
    }
}

pub(crate) fn feasible_vertices(ch: &ChannelCq, budget: Option<f64>) -> Result<Vec<Vec<f64>>> {
    let k = ch.alphabet_size();
    match budget {
        None => Ok(simplex_vertices(k)),
        Some(e) => {
            let cost = ch.cost().ok_or(Error::NoCost)?;
            if !e.is_finite() {
                return Ok(simplex_vertices(k));
            }
            let min = cost.iter().copied().fold(f64::INFINITY, f64::min);
            if min > e {
                return Err(Error::Infeasible(format!("cheapest letter costs {min}, budget is {e}")));
            }
            Ok(numeric::budget_polytope_vertices(cost, e))
        }
    }
}

pub(crate) fn simplex_vertices(k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| {
            let mut v = vec![0.0; k];
            v[i] = 1.0;
            v
        })
        .collect()
}

fn normalize(mut p: Vec<f64>) -> Vec<f64> {
    for x in p.iter_mut() {
        *x = x.max(0.0);
    }
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        for x in p.iter_mut() {
            *x /= total;
        }
    }
    p
}

/// `Gamma_ij = Tr S_i S_j`.
pub fn overlap_matrix(ch: &ChannelCq) -> Vec<Vec<f64>> {
    let k = ch.alphabet_size();
    let mut g = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = linalg::trace_product(ch.state(i).matrix(), ch.state(j).matrix()).re;
            g[i][j] = v;
            g[j][i] = v;
        }
    }
    g
}

/// `-log min_pi Tr S_pi^2` and the minimizer.
pub fn cutoff_rate(ch: &ChannelCq) -> Result<(f64, Vec<f64>)> {
    let gamma = overlap_matrix(ch);
    let quad = |p: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (i, row) in gamma.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                acc += p[i] * p[j] * g;
            }
        }
        acc
    };
    let vertices = simplex_vertices(ch.alphabet_size());
    let out = numeric::maximize_over_polytope(
        &vertices,
        |p| {
            let grad = gamma.iter().map(|row| -2.0 * row.iter().zip(p).map(|(g, q)| g * q).sum::<f64>()).collect();
            (-quad(p), grad)
        },
        |p| -quad(p),
        1e-12,
        DEFAULT_MAX_ITER,
    );
    let min = -out.value;
    if !out.converged && out.gap > 1e-9 {
        let best = CapacityResult {
            value: -min.ln(),
            optimizer: normalize(out.point),
            iterations: out.iterations,
            gap: out.gap,
        };
        return Err(Error::NoConvergence { best: Box::new(best) });
    }
    Ok((-min.ln(), normalize(out.point)))
}

/// Closed-form quantities of the binary pure-state channel with overlap `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryChannel {
    pub epsilon: f64,
    /// Holevo capacity.
    pub c: f64,
    /// Capacity with the optimal single-letter measurement.
    pub c1: f64,
    /// Cutoff rate.
    pub c_tilde: f64,
    pub mu_prime_1: f64,
    pub mutilde_prime_1: f64,
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

pub fn binary_channel(epsilon: f64) -> Result<BinaryChannel> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("overlap {epsilon} outside [0, 1]")));
    }
    let e = epsilon;
    let c = -xlogx((1.0 - e) / 2.0) - xlogx((1.0 + e) / 2.0);
    let r = (1.0 - e * e).sqrt();
    let c1 = 0.5 * (xlogx(1.0 + r) + xlogx(1.0 - r));
    let e2 = e * e;
    let c_tilde = -((1.0 + e2) / 2.0).ln();
    let mutilde_prime_1 = c_tilde + xlogx(e2) / (1.0 + e2);
    let a = (1.0 - e) / 2.0;
    let b = (1.0 + e) / 2.0;
    let log_term = |w: f64, x: f64| if w == 0.0 { 0.0 } else { w * x.ln() };
    let mu_prime_1 = -(log_term((1.0 - e).powi(2), a) + log_term((1.0 + e).powi(2), b)) / (2.0 * (1.0 + e2));
    Ok(BinaryChannel { epsilon, c: c.max(0.0), c1: c1.max(0.0), c_tilde, mu_prime_1, mutilde_prime_1 })
}

/// Lower bound `1 - (C_n + 1) / log M` on the error probability of any code
/// of size `m`, clamped to `[0, 1]`.
pub fn fano_bound(m: u64, c_n: f64) -> f64 {
    if m <= 1 {
        return 0.0;
    }
    fano_bound_log((m as f64).ln(), c_n)
}

/// [`fano_bound`] with `log M` given directly.
pub fn fano_bound_log(log_m: f64, c_n: f64) -> f64 {
    if log_m <= 0.0 {
        return 0.0;
    }
    (1.0 - (c_n + 1.0) / log_m).clamp(0.0, 1.0)
}

/// Rule measuring in the computational basis: `X_j = |j><j|`.
pub fn basis_measurement(dim: usize) -> DecisionRule {
    let elements = (0..dim)
        .map(|j| {
            let mut m = CMatrix::zeros(dim, dim);
            m[(j, j)] = Complex64::new(1.0, 0.0);
            m
        })
        .collect();
    DecisionRule::new(elements).expect("basis projectors form a resolution of identity")
}
