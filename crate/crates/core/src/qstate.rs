//! Finite-dimensional states, ensembles and decision rules.
//!
//! All entropies are in nats. A [`DensityMatrix`] caches its
//! eigendecomposition on first use, so repeated entropy and matrix-function
//! calls on the same state cost one diagonalization.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, Spectrum};

/// Default cap on the dimension of tensor products.
pub const DEFAULT_MAX_DIM: usize = 4096;

/// Numerical tolerances for validation and spectral cutoffs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub herm: f64,
    pub psd: f64,
    pub trace: f64,
    pub prob: f64,
    pub norm: f64,
    pub povm: f64,
    /// Eigenvalues at or below `eig_floor * lambda_max` count as zero.
    pub eig_floor: f64,
    /// Squared norm outside a support above which supports are disjoint.
    pub support: f64,
    pub max_dim: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm: 1e-9,
            psd: 1e-9,
            trace: 1e-9,
            prob: 1e-9,
            norm: 1e-9,
            povm: 1e-9,
            eig_floor: 1e-12,
            support: 1e-9,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: CMatrix,
    spectrum: OnceLock<Spectrum>,
}

impl PartialEq for DensityMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

/// Validates a square complex array as a density matrix with default tolerances.
pub fn make_density(entries: CMatrix) -> Result<DensityMatrix> {
    DensityMatrix::new(entries)
}

impl DensityMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        Self::with_tolerances(entries, &Tolerances::default())
    }

    /// Validates `entries`. Slightly negative eigenvalues (within `tol.psd`)
    /// are clipped to zero and the result renormalized; otherwise the
    /// entries are stored untouched.
    pub fn with_tolerances(entries: CMatrix, tol: &Tolerances) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::Empty("density matrix of dimension 0"));
        }
        let deviation = linalg::hermitian_deviation(&entries);
        if deviation > tol.herm || entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NotHermitian { deviation });
        }
        let tr = linalg::trace(&entries).re;
        if (tr - 1.0).abs() > tol.trace {
            return Err(Error::BadTrace { trace: tr });
        }
        let spec = linalg::eigh(&entries);
        let min = spec.min();
        if min < -tol.psd {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        if min < 0.0 {
            let clipped = spec.map(|l| l.max(0.0));
            let ctr = linalg::trace(&clipped).re;
            if (ctr - 1.0).abs() > tol.trace {
                return Err(Error::BadTrace { trace: ctr });
            }
            let mat = clipped / Complex64::new(ctr, 0.0);
            return Ok(DensityMatrix { mat, spectrum: OnceLock::new() });
        }
        let cell = OnceLock::new();
        let _ = cell.set(spec);
        Ok(DensityMatrix { mat: entries, spectrum: cell })
    }

    /// Trusted constructor for results of operations that preserve validity.
    pub(crate) fn from_trusted(mat: CMatrix) -> Self {
        DensityMatrix { mat, spectrum: OnceLock::new() }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(linalg::real_diag(diag))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_trusted(linalg::identity(dim) / Complex64::new(dim as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| linalg::eigh(&self.mat))
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum().values
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.mat, &self.mat).re
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        (1.0 - self.purity()).abs() <= tol
    }

    /// Dominant eigenvector; the state itself when pure.
    pub fn principal_vector(&self) -> CVector {
        let spec = self.spectrum();
        spec.vectors.column(spec.dim() - 1).into_owned()
    }

    /// `f` applied to the spectrum, zero on eigenvalues under the floor.
    pub fn map_spectrum(&self, eig_floor: f64, f: impl Fn(f64) -> f64) -> CMatrix {
        let spec = self.spectrum();
        let cut = spec.cutoff(eig_floor);
        spec.map(|l| if l > cut { f(l) } else { 0.0 })
    }

    /// `Tr S^a` over the positive spectrum.
    pub fn trace_power(&self, a: f64) -> f64 {
        positive_eigenvalues(self.spectrum(), Tolerances::default().eig_floor)
            .map(|l| l.powf(a))
            .sum()
    }
}

fn positive_eigenvalues(spec: &Spectrum, eig_floor: f64) -> impl Iterator<Item = f64> + '_ {
    let cut = spec.cutoff(eig_floor);
    spec.values.iter().copied().filter(move |&l| l > cut && l > 0.0)
}

/// Unit vector in a finite-dimensional Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: CVector,
}

impl PureState {
    pub fn new(amps: CVector) -> Result<Self> {
        Self::with_tolerance(amps, Tolerances::default().norm)
    }

    pub fn with_tolerance(amps: CVector, tol_norm: f64) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Empty("state vector"));
        }
        let norm = amps.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > tol_norm {
            return Err(Error::NotNormalized { norm });
        }
        Ok(PureState { amps })
    }

    /// Scales `amps` to unit norm.
    pub fn normalized(amps: CVector) -> Result<Self> {
        let norm = amps.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Ok(PureState { amps: amps / Complex64::new(norm, 0.0) })
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut amps = CVector::zeros(dim);
        amps[k] = linalg::ONE;
        PureState { amps }
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(CVector::from_iterator(amps.len(), amps.iter().map(|&x| Complex64::new(x, 0.0))))
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amps.dotc(&other.amps)
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        PureState { amps: linalg::kron_vec(&self.amps, &other.amps) }
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_trusted(linalg::outer(&self.amps))
    }
}

/// One letter of an ensemble.
#[derive(Debug, Clone)]
pub struct Letter {
    pub prob: f64,
    pub state: DensityMatrix,
    pub cost: Option<f64>,
}

/// Finite list of weighted states sharing one dimension.
#[derive(Debug, Clone)]
pub struct Ensemble {
    letters: Vec<Letter>,
}

impl Ensemble {
    pub fn new(letters: Vec<Letter>) -> Result<Self> {
        Self::with_tolerances(letters, &Tolerances::default())
    }

    pub fn with_tolerances(letters: Vec<Letter>, tol: &Tolerances) -> Result<Self> {
        let first = letters.first().ok_or(Error::Empty("ensemble"))?;
        let dim = first.state.dim();
        let mut total = 0.0;
        for l in &letters {
            if l.state.dim() != dim {
                return Err(Error::DimMismatch { expected: dim, found: l.state.dim() });
            }
            if !(l.prob >= -tol.prob && l.prob <= 1.0 + tol.prob) {
                return Err(Error::BadProbabilities(format!("probability {} outside [0, 1]", l.prob)));
            }
            if let Some(c) = l.cost {
                if !(c >= 0.0) || !c.is_finite() {
                    return Err(Error::Domain(format!("letter cost {c} must be a nonnegative real")));
                }
            }
            total += l.prob;
        }
        if (total - 1.0).abs() > tol.prob {
            return Err(Error::BadProbabilities(format!("probabilities sum to {total}")));
        }
        Ok(Ensemble { letters })
    }

    /// Ensemble from parallel slices of probabilities and states.
    pub fn from_parts(probs: &[f64], states: &[DensityMatrix]) -> Result<Self> {
        if probs.len() != states.len() {
            return Err(Error::DimMismatch { expected: states.len(), found: probs.len() });
        }
        Self::new(
            probs
                .iter()
                .zip(states)
                .map(|(&prob, s)| Letter { prob, state: s.clone(), cost: None })
                .collect(),
        )
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.letters[0].state.dim()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.letters.iter().map(|l| l.prob).collect()
    }
}

/// Family of PSD operators with `sum X_j <= I`. The inconclusive element
/// `X_0 = I - sum X_j` is implicit.
#[derive(Debug, Clone)]
pub struct DecisionRule {
    elements: Vec<CMatrix>,
}

impl DecisionRule {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        Self::with_tolerances(elements, &Tolerances::default())
    }

    pub fn with_tolerances(elements: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        let first = elements.first().ok_or(Error::Empty("decision rule"))?;
        let dim = first.nrows();
        let mut sum = CMatrix::zeros(dim, dim);
        for x in &elements {
            let (rows, cols) = x.shape();
            if rows != cols {
                return Err(Error::NotSquare { rows, cols });
            }
            if rows != dim {
                return Err(Error::DimMismatch { expected: dim, found: rows });
            }
            let deviation = linalg::hermitian_deviation(x);
            if deviation > tol.herm {
                return Err(Error::NotHermitian { deviation });
            }
            let min = linalg::eigh(x).min();
            if min < -tol.psd {
                return Err(Error::NotPsd { min_eigenvalue: min });
            }
            sum += x;
        }
        let rest = linalg::identity(dim) - sum;
        let min = linalg::eigh(&rest).min();
        if min < -tol.povm {
            return Err(Error::NotPovm { min_eigenvalue: min });
        }
        Ok(DecisionRule { elements })
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn total(&self) -> CMatrix {
        let d = self.dim();
        self.elements.iter().fold(CMatrix::zeros(d, d), |acc, x| acc + x)
    }

    /// `X_0 = I - sum_j X_j`.
    pub fn inconclusive(&self) -> CMatrix {
        linalg::identity(self.dim()) - self.total()
    }

    /// `P(j|S) = Tr S X_j` for every element, clipped at zero.
    pub fn probabilities(&self, state: &DensityMatrix) -> Vec<f64> {
        self.elements
            .iter()
            .map(|x| linalg::trace_product(state.matrix(), x).re.max(0.0))
            .collect()
    }
}

/// Von Neumann entropy `-Tr S log S` in nats.
pub fn entropy(s: &DensityMatrix) -> f64 {
    entropy_of_spectrum(s.spectrum(), Tolerances::default().eig_floor)
}

pub(crate) fn entropy_of_spectrum(spec: &Spectrum, eig_floor: f64) -> f64 {
    let h: f64 = positive_eigenvalues(spec, eig_floor).map(|l| -l * l.ln()).sum();
    h.max(0.0)
}

/// Quantum relative entropy `Tr S (log S - log T)`; `+inf` when the support
/// of `S` is not contained in the support of `T`.
pub fn relative_entropy(s: &DensityMatrix, t: &DensityMatrix) -> Result<f64> {
    relative_entropy_with(s, t, &Tolerances::default())
}

pub fn relative_entropy_with(s: &DensityMatrix, t: &DensityMatrix, tol: &Tolerances) -> Result<f64> {
    if s.dim() != t.dim() {
        return Err(Error::DimMismatch { expected: s.dim(), found: t.dim() });
    }
    let ss = s.spectrum();
    let ts = t.spectrum();
    let s_cut = ss.cutoff(tol.eig_floor);
    let t_cut = ts.cutoff(tol.eig_floor);
    let n = s.dim();
    let mut total = 0.0;
    for (a, &lam) in ss.values.iter().enumerate() {
        if lam <= s_cut || lam <= 0.0 {
            continue;
        }
        let u = ss.vectors.column(a);
        let mut outside = 0.0;
        let mut cross = 0.0;
        for (b, &mu) in ts.values.iter().enumerate() {
            let v = ts.vectors.column(b);
            let mut overlap = linalg::ZERO;
            for i in 0..n {
                overlap += v[i].conj() * u[i];
            }
            let w = overlap.norm_sqr();
            if mu > t_cut && mu > 0.0 {
                cross += w * mu.ln();
            } else {
                outside += w;
            }
        }
        if outside > tol.support {
            return Ok(f64::INFINITY);
        }
        total += lam * (lam.ln() - cross);
    }
    Ok(total.max(0.0))
}

/// Kronecker product `S (x) T`.
pub fn tensor(s: &DensityMatrix, t: &DensityMatrix) -> Result<DensityMatrix> {
    tensor_with_limit(s, t, DEFAULT_MAX_DIM)
}

pub fn tensor_with_limit(s: &DensityMatrix, t: &DensityMatrix, max_dim: usize) -> Result<DensityMatrix> {
    let dim = s.dim().saturating_mul(t.dim());
    if dim > max_dim {
        return Err(Error::DimOverflow { dim, max_dim });
    }
    Ok(DensityMatrix::from_trusted(linalg::kron(s.matrix(), t.matrix())))
}

/// Convex mixture `sum_i pi_i S_i`.
pub fn average_state(ens: &Ensemble) -> DensityMatrix {
    let weights: Vec<f64> = ens.letters.iter().map(|l| l.prob).collect();
    let states: Vec<&DensityMatrix> = ens.letters.iter().map(|l| &l.state).collect();
    DensityMatrix::from_trusted(weighted_sum(&weights, &states))
}

/// `sum_i w_i S_i`, accumulated in index order.
pub(crate) fn weighted_sum(weights: &[f64], states: &[&DensityMatrix]) -> CMatrix {
    let d = states[0].dim();
    let mut acc = CMatrix::zeros(d, d);
    for (&w, s) in weights.iter().zip(states) {
        if w != 0.0 {
            acc += s.matrix() * Complex64::new(w, 0.0);
        }
    }
    acc
}
