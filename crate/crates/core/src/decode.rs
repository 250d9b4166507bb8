//! Codebooks, square-root-measurement decoders, typical projectors and
//! random-coding experiments.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::ChannelCq;
use crate::linalg::{self, CMatrix, CVector, Spectrum};
use crate::numeric;
use crate::qstate::{DecisionRule, DensityMatrix, PureState, Tolerances, DEFAULT_MAX_DIM};

/// Relative threshold below which Gram and Gram-operator eigenvalues are
/// treated as zero by the generalized inverse.
pub const PINV_FLOOR: f64 = 1e-10;

/// Materialized state of one code word.
#[derive(Debug, Clone)]
pub enum WordState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl WordState {
    pub fn density(&self) -> DensityMatrix {
        match self {
            WordState::Pure(p) => p.to_density(),
            WordState::Mixed(s) => s.clone(),
        }
    }

    /// `Tr S_w X`.
    pub fn expectation(&self, x: &CMatrix) -> f64 {
        match self {
            WordState::Pure(p) => {
                let v = p.amplitudes();
                (v.adjoint() * x * v)[(0, 0)].re
            }
            WordState::Mixed(s) => linalg::trace_product(s.matrix(), x).re,
        }
    }
}

/// `M` words of length `n` over the channel alphabet, with their product states.
#[derive(Debug, Clone)]
pub struct Codebook<'a> {
    channel: &'a ChannelCq,
    n: usize,
    words: Vec<Vec<usize>>,
    states: Vec<WordState>,
}

impl<'a> Codebook<'a> {
    pub fn new(channel: &'a ChannelCq, words: Vec<Vec<usize>>) -> Result<Self> {
        Self::with_max_dim(channel, words, DEFAULT_MAX_DIM)
    }

    pub fn with_max_dim(channel: &'a ChannelCq, words: Vec<Vec<usize>>, max_dim: usize) -> Result<Self> {
        let n = words.first().ok_or(Error::Empty("codebook"))?.len();
        if n == 0 {
            return Err(Error::Empty("code word of length 0"));
        }
        let k = channel.alphabet_size();
        for w in &words {
            if w.len() != n {
                return Err(Error::DimMismatch { expected: n, found: w.len() });
            }
            if let Some(&bad) = w.iter().find(|&&i| i >= k) {
                return Err(Error::Domain(format!("letter {bad} outside alphabet of size {k}")));
            }
        }
        checked_pow(channel.dim(), n, max_dim)?;
        let states = words.iter().map(|w| word_state(channel, w)).collect();
        Ok(Codebook { channel, n, words, states })
    }

    pub fn channel(&self) -> &ChannelCq {
        self.channel
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[Vec<usize>] {
        &self.words
    }

    pub fn states(&self) -> &[WordState] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.channel.dim().pow(self.n as u32)
    }

    fn pure_vectors(&self) -> Result<Vec<&CVector>> {
        self.states
            .iter()
            .map(|s| match s {
                WordState::Pure(p) => Ok(p.amplitudes()),
                WordState::Mixed(_) => Err(Error::MixedStates),
            })
            .collect()
    }
}

fn checked_pow(d: usize, n: usize, max_dim: usize) -> Result<usize> {
    let mut dim: usize = 1;
    for _ in 0..n {
        dim = dim.saturating_mul(d);
        if dim > max_dim {
            return Err(Error::DimOverflow { dim, max_dim });
        }
    }
    Ok(dim)
}

fn word_state(ch: &ChannelCq, word: &[usize]) -> WordState {
    match ch.pure_states() {
        Some(vs) => {
            let mut v = vs[word[0]].amplitudes().clone();
            for &i in &word[1..] {
                v = linalg::kron_vec(&v, vs[i].amplitudes());
            }
            WordState::Pure(PureState::normalized(v).expect("product of unit vectors"))
        }
        None => {
            let mut m = ch.state(word[0]).matrix().clone();
            for &i in &word[1..] {
                m = linalg::kron(&m, ch.state(i).matrix());
            }
            WordState::Mixed(DensityMatrix::from_trusted(m))
        }
    }
}

/// Pairwise inner products `<psi_i|psi_j>` of pure code words.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: CMatrix,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn spectrum(&self) -> Spectrum {
        linalg::eigh(&self.entries)
    }
}

pub fn gram(cb: &Codebook) -> Result<GramMatrix> {
    let letters = cb.channel.pure_states().ok_or(Error::MixedStates)?;
    let k = letters.len();
    let mut overlap = CMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            overlap[(i, j)] = letters[i].inner(&letters[j]);
        }
    }
    let m = cb.len();
    let mut g = CMatrix::zeros(m, m);
    for r in 0..m {
        g[(r, r)] = linalg::ONE;
        for s in (r + 1)..m {
            let mut z = linalg::ONE;
            for (&a, &b) in cb.words[r].iter().zip(&cb.words[s]) {
                z *= overlap[(a, b)];
            }
            g[(r, s)] = z;
            g[(s, r)] = z.conj();
        }
    }
    Ok(GramMatrix { entries: g })
}

/// `Gamma^{1/2}` computed as `Gamma Gamma^{-1/2}` with the generalized inverse.
fn gram_sqrt(g: &GramMatrix) -> CMatrix {
    let spec = g.spectrum();
    let cut = spec.cutoff(PINV_FLOOR);
    spec.map(|l| if l > cut { l.sqrt() } else { 0.0 })
}

/// Square-root measurement `X_k = |psi^_k><psi^_k|`, `psi^ = Psi Gamma^{-1/2}`.
pub fn srm(cb: &Codebook) -> Result<DecisionRule> {
    let vs = cb.pure_vectors()?;
    let g = gram(cb)?;
    let inv = linalg::pinv_sqrt(&g.entries, PINV_FLOOR);
    let dim = cb.dim();
    let m = cb.len();
    let mut elements = Vec::with_capacity(m);
    for k in 0..m {
        let mut hat = CVector::zeros(dim);
        for (l, v) in vs.iter().enumerate() {
            let c = inv[(l, k)];
            if c != linalg::ZERO {
                hat.axpy(c, v, linalg::ONE);
            }
        }
        elements.push(linalg::outer(&hat));
    }
    DecisionRule::new(elements)
}

/// Error of the square-root measurement from the Gram matrix alone:
/// `1 - (1/M) sum_k |(Gamma^{1/2})_kk|^2`.
pub fn srm_error(g: &GramMatrix) -> f64 {
    let root = gram_sqrt(g);
    let m = g.size();
    let hit: f64 = (0..m).map(|k| root[(k, k)].norm_sqr()).sum();
    (1.0 - hit / m as f64).clamp(0.0, 1.0)
}

/// `(1/M) sum_k [1 - Tr S_{w^k} X_k]`.
pub fn average_error(cb: &Codebook, rule: &DecisionRule) -> Result<f64> {
    if rule.len() < cb.len() {
        return Err(Error::TooFewElements { needed: cb.len(), found: rule.len() });
    }
    if rule.dim() != cb.dim() {
        return Err(Error::DimMismatch { expected: cb.dim(), found: rule.dim() });
    }
    let m = cb.len();
    let hits: Vec<f64> = cb.states.iter().zip(rule.elements()).map(|(s, x)| s.expectation(x)).collect();
    Ok((1.0 - numeric::pairwise_sum(&hits) / m as f64).clamp(0.0, 1.0))
}

/// Upper bounds on the square-root-measurement error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrmBounds {
    /// `(2/M) Sp(E - Gamma^{1/2})`.
    pub tight: f64,
    /// `(1/M) sum_{r != s} |Gamma_rs|^2`.
    pub coarse: f64,
}

pub fn srm_bounds(cb: &Codebook) -> Result<SrmBounds> {
    let g = gram(cb)?;
    let m = g.size();
    let spec = g.spectrum();
    let tight: f64 = spec.values.iter().map(|&l| 1.0 - l.max(0.0).sqrt()).sum::<f64>() * 2.0 / m as f64;
    let mut coarse = 0.0;
    for r in 0..m {
        for s in 0..m {
            if r != s {
                coarse += g.entries[(r, s)].norm_sqr();
            }
        }
    }
    Ok(SrmBounds { tight: tight.max(0.0), coarse: coarse / m as f64 })
}

/// Spectral projector of an `n`-fold product state onto an eigenvalue window.
#[derive(Debug, Clone)]
pub struct TypicalProjector {
    pub projector: CMatrix,
    /// Open window `(lower, upper)` on product eigenvalues.
    pub lower: f64,
    pub upper: f64,
    /// `Tr S P`.
    pub capture: f64,
    /// `Tr S (I - P)`.
    pub outside: f64,
    /// `||S P||`, the largest kept eigenvalue.
    pub norm: f64,
    pub rank: usize,
}

impl TypicalProjector {
    /// Wraps an arbitrary projector; reported quantities refer to `state`.
    pub fn from_projector(projector: CMatrix, state: &CMatrix) -> Self {
        let capture = linalg::trace_product(state, &projector).re;
        let sandwiched = &projector * state * &projector;
        let norm = linalg::eigh(&sandwiched).max().max(0.0);
        let rank = linalg::trace(&projector).re.round().max(0.0) as usize;
        TypicalProjector {
            projector,
            lower: 0.0,
            upper: f64::INFINITY,
            capture,
            outside: 1.0 - capture,
            norm,
            rank,
        }
    }

    pub fn identity(dim: usize, state: &CMatrix) -> Self {
        Self::from_projector(linalg::identity(dim), state)
    }

    pub fn dim(&self) -> usize {
        self.projector.nrows()
    }
}

/// Projector onto product eigenvectors of `spectra[0] (x) ... (x) spectra[n-1]`
/// whose eigenvalue lies strictly inside `(lower, upper)` and above `floor`.
fn window_projector(spectra: &[&Spectrum], lower: f64, upper: f64, floor: f64, max_dim: usize) -> Result<TypicalProjector> {
    let mut dim: usize = 1;
    for s in spectra {
        dim = dim.saturating_mul(s.dim());
        if dim > max_dim {
            return Err(Error::DimOverflow { dim, max_dim });
        }
    }
    let mut projector = CMatrix::zeros(dim, dim);
    let mut capture = 0.0;
    let mut outside = 0.0;
    let mut norm = 0.0_f64;
    let mut rank = 0;
    let mut idx = vec![0usize; spectra.len()];
    loop {
        let lam: f64 = idx.iter().zip(spectra).map(|(&j, s)| s.values[j].max(0.0)).product();
        if lam > lower && lam < upper && lam > floor {
            let mut v = spectra[0].vectors.column(idx[0]).into_owned();
            for (t, s) in spectra.iter().enumerate().skip(1) {
                v = linalg::kron_vec(&v, &s.vectors.column(idx[t]).into_owned());
            }
            projector += linalg::outer(&v);
            capture += lam;
            norm = norm.max(lam);
            rank += 1;
        } else {
            outside += lam;
        }
        // odometer over the multi-index, last factor fastest
        let mut t = spectra.len();
        loop {
            if t == 0 {
                return Ok(TypicalProjector { projector, lower, upper, capture, outside, norm, rank });
            }
            t -= 1;
            idx[t] += 1;
            if idx[t] < spectra[t].dim() {
                break;
            }
            idx[t] = 0;
        }
    }
}

/// Projector onto the eigenvectors of `S^{(x)n}` with eigenvalue in
/// `(e^{-n(H(S)+delta)}, e^{-n(H(S)-delta)})`.
pub fn typical_projector(s_bar: &DensityMatrix, n: usize, delta: f64) -> Result<TypicalProjector> {
    typical_projector_with(s_bar, n, delta, DEFAULT_MAX_DIM)
}

pub fn typical_projector_with(s_bar: &DensityMatrix, n: usize, delta: f64, max_dim: usize) -> Result<TypicalProjector> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta = {delta} must be positive")));
    }
    if n == 0 {
        return Err(Error::Domain("block length must be positive".into()));
    }
    let h = crate::qstate::entropy(s_bar);
    let nf = n as f64;
    let lower = (-nf * (h + delta)).exp();
    let upper = (-nf * (h - delta)).exp();
    let spec = s_bar.spectrum();
    let spectra = vec![spec; n];
    window_projector(&spectra, lower, upper, 0.0, max_dim)
}

fn conditional_window(n: usize, mean_entropy: f64, delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta = {delta} must be positive")));
    }
    let nf = n as f64;
    Ok(((-nf * (mean_entropy + delta)).exp(), (-nf * (mean_entropy - delta)).exp()))
}

/// Spectral projector of the word state `s_w` (block length `n`) onto
/// eigenvalues in `(e^{-n(Hbar+delta)}, e^{-n(Hbar-delta)})`. Eigenvalues
/// under the zero floor are never kept, so `delta = inf` gives the support
/// projector.
pub fn conditional_typical_projector(s_w: &DensityMatrix, n: usize, mean_entropy: f64, delta: f64) -> Result<TypicalProjector> {
    let (lower, upper) = conditional_window(n, mean_entropy, delta)?;
    let spec = s_w.spectrum();
    let floor = spec.cutoff(Tolerances::default().eig_floor);
    let p = window_projector(&[spec], lower, upper, floor, usize::MAX)?;
    debug_assert!(dominated_by(&p.projector, s_w.matrix(), (n as f64 * (mean_entropy + delta)).exp()));
    Ok(p)
}

/// Same projector computed from the letter spectra of a product word.
fn conditional_projector_for_word(
    spectra: &[Spectrum],
    word: &[usize],
    mean_entropy: f64,
    delta: f64,
    max_dim: usize,
) -> Result<TypicalProjector> {
    let (lower, upper) = conditional_window(word.len(), mean_entropy, delta)?;
    let factors: Vec<&Spectrum> = word.iter().map(|&i| &spectra[i]).collect();
    let floor_rel = Tolerances::default().eig_floor;
    let top: f64 = factors.iter().map(|s| s.max()).product();
    window_projector(&factors, lower, upper, floor_rel * top, max_dim)
}

/// Checks `P <= c S` up to 1e-9.
fn dominated_by(p: &CMatrix, s: &CMatrix, c: f64) -> bool {
    if !c.is_finite() {
        return true;
    }
    let diff = s * Complex64::new(c, 0.0) - p;
    linalg::eigh(&diff).min() >= -1e-9 * c.max(1.0)
}

/// `X_k = Sigma^{-1/2} P P_k P Sigma^{-1/2}`, `Sigma = sum_l P P_l P`.
pub fn mixed_srm(cb: &Codebook, p: &TypicalProjector, pw: &[TypicalProjector]) -> Result<DecisionRule> {
    if pw.len() != cb.len() {
        return Err(Error::DimMismatch { expected: cb.len(), found: pw.len() });
    }
    let dim = cb.dim();
    if p.dim() != dim {
        return Err(Error::DimMismatch { expected: dim, found: p.dim() });
    }
    let blocks: Vec<CMatrix> = pw.iter().map(|q| &p.projector * &q.projector * &p.projector).collect();
    let mut sigma = CMatrix::zeros(dim, dim);
    for b in &blocks {
        sigma += b;
    }
    let inv = linalg::pinv_sqrt(&sigma, PINV_FLOOR);
    let elements = blocks.iter().map(|b| &inv * b * &inv).collect();
    DecisionRule::new(elements)
}

/// The three averaged terms of the basic bound for the mixed decoder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MixedBoundTerms {
    /// `(4/M) sum_w Tr S_w (I - P)`.
    pub typical: f64,
    /// `(4/M) sum_w Tr S_w (I - P_w)`.
    pub conditional: f64,
    /// `(1/M) sum_w sum_{w' != w} Tr P S_w P P_w'`.
    pub cross: f64,
    pub total: f64,
}

pub fn mixed_bound_terms(cb: &Codebook, p: &TypicalProjector, pw: &[TypicalProjector]) -> MixedBoundTerms {
    let m = cb.len() as f64;
    let mut typical = 0.0;
    let mut conditional = 0.0;
    let mut cross = 0.0;
    let mut sandwiched = Vec::with_capacity(cb.len());
    for (s, q) in cb.states.iter().zip(pw) {
        typical += 1.0 - s.expectation(&p.projector);
        conditional += 1.0 - s.expectation(&q.projector);
        let sm = s.density().into_matrix();
        sandwiched.push(&p.projector * sm * &p.projector);
    }
    for (w, psp) in sandwiched.iter().enumerate() {
        for (v, q) in pw.iter().enumerate() {
            if v != w {
                cross += linalg::trace_product(psp, &q.projector).re;
            }
        }
    }
    let typical = 4.0 * typical.max(0.0) / m;
    let conditional = 4.0 * conditional.max(0.0) / m;
    let cross = cross.max(0.0) / m;
    MixedBoundTerms { typical, conditional, cross, total: typical + conditional + cross }
}

/// `log Tr S^{1+s}` over the positive spectrum.
fn log_trace_power(spec: &Spectrum, s: f64) -> f64 {
    let cut = spec.cutoff(Tolerances::default().eig_floor);
    spec.values.iter().filter(|&&l| l > cut && l > 0.0).map(|&l| l.powf(1.0 + s)).sum::<f64>().ln()
}

/// Minimum over `s` in `[0, 1]` of `2 (M-1)^s (Tr S^{1+s})^n`: a 101-point
/// grid followed by golden-section refinement. Returns `(s_opt, value)`.
pub fn random_coding_bound(s_bar: &DensityMatrix, n: usize, m: usize) -> (f64, f64) {
    let spec = s_bar.spectrum();
    let log_bound = |s: f64| {
        let lm = if m <= 1 {
            if s == 0.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        } else {
            s * ((m - 1) as f64).ln()
        };
        2f64.ln() + lm + n as f64 * log_trace_power(spec, s)
    };
    let (s, v) = numeric::grid_golden_max(|s| -log_bound(s), 0.0, 1.0, 101, 1e-10);
    (s, (-v).exp())
}

/// `2 (M-1)^s (Tr S^{1+s})^n` at a single `s`.
pub fn random_coding_bound_at(s_bar: &DensityMatrix, n: usize, m: usize, s: f64) -> f64 {
    let factor = if m <= 1 { 0f64.powf(s) } else { ((m - 1) as f64).powf(s) };
    2.0 * factor * (n as f64 * log_trace_power(s_bar.spectrum(), s)).exp()
}

/// Letter-level decoder used in experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    PureSrm,
    MixedSrm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// i.i.d. letters; the budget only gates feasibility of `pi`.
    Plain,
    /// Words with total cost above `n E` are rejected and redrawn.
    Conditioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub budget: f64,
    pub mode: ConstraintMode,
}

/// Maximum rejections per word in conditioned sampling.
pub const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub decoder: Decoder,
    pub delta: f64,
    pub constraint: Option<Constraint>,
    pub max_dim: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 1,
            m: 2,
            trials: 1000,
            seed: 0,
            decoder: Decoder::PureSrm,
            delta: 0.1,
            constraint: None,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub mean_error: f64,
    pub std_error: f64,
    pub errors: Vec<f64>,
    pub bound_s_opt: f64,
    pub bound_value: f64,
    pub mixed_bound: MixedBoundTerms,
}

/// Flat summary of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub mean_error: f64,
    pub stderr: f64,
    pub bound_s_opt: f64,
    pub bound_value: f64,
}

impl ExperimentReport {
    pub fn to_record(&self) -> ExperimentRecord {
        ExperimentRecord {
            n: self.n,
            m: self.m,
            trials: self.trials,
            seed: self.seed,
            mean_error: self.mean_error,
            stderr: self.std_error,
            bound_s_opt: self.bound_s_opt,
            bound_value: self.bound_value,
        }
    }
}

struct TrialOutcome {
    error: f64,
    mixed_bound: MixedBoundTerms,
}

/// Draws `trials` random codebooks with i.i.d. letters from `pi`, decodes
/// each, and compares the mean error with the analytic bounds.
///
/// Trial `t` uses the ChaCha stream `t` of `seed`, so results do not depend
/// on the number of worker threads.
pub fn random_coding_experiment(ch: &ChannelCq, pi: &[f64], cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    ch.check_probs(pi)?;
    if cfg.n == 0 || cfg.m == 0 || cfg.trials == 0 {
        return Err(Error::Domain("n, M and trials must be positive".into()));
    }
    checked_pow(ch.dim(), cfg.n, cfg.max_dim)?;
    if cfg.decoder == Decoder::PureSrm && !ch.is_pure() {
        return Err(Error::MixedStates);
    }
    if let Some(c) = &cfg.constraint {
        let cost = ch.cost().ok_or(Error::NoCost)?;
        let spent: f64 = pi.iter().zip(cost).map(|(p, f)| p * f).sum();
        if spent > c.budget + Tolerances::default().prob {
            return Err(Error::Infeasible(format!("mean letter cost {spent} exceeds budget {}", c.budget)));
        }
    }
    let sampler = WeightedIndex::new(pi).map_err(|e| Error::BadProbabilities(e.to_string()))?;
    let s_bar = ch.average(pi);
    let typical = typical_projector_with(&s_bar, cfg.n, cfg.delta, cfg.max_dim)?;
    let spectra: Vec<Spectrum> = ch.states().iter().map(|s| s.spectrum().clone()).collect();
    let mean_entropy: f64 = pi.iter().zip(ch.entropies()).map(|(p, h)| p * h).sum();

    let run_trial = |t: usize| -> Result<TrialOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(t as u64);
        let words = (0..cfg.m)
            .map(|_| draw_word(ch, &sampler, cfg, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let cb = Codebook::with_max_dim(ch, words, cfg.max_dim)?;
        let pw = cb
            .words()
            .iter()
            .map(|w| conditional_projector_for_word(&spectra, w, mean_entropy, cfg.delta, cfg.max_dim))
            .collect::<Result<Vec<_>>>()?;
        let error = match cfg.decoder {
            Decoder::PureSrm => srm_error(&gram(&cb)?),
            Decoder::MixedSrm => average_error(&cb, &mixed_srm(&cb, &typical, &pw)?)?,
        };
        Ok(TrialOutcome { error, mixed_bound: mixed_bound_terms(&cb, &typical, &pw) })
    };
    let outcomes = (0..cfg.trials).into_par_iter().map(run_trial).collect::<Result<Vec<_>>>()?;

    let errors: Vec<f64> = outcomes.iter().map(|o| o.error).collect();
    let tf = cfg.trials as f64;
    let mean = numeric::pairwise_sum(&errors) / tf;
    let sq: Vec<f64> = errors.iter().map(|e| (e - mean) * (e - mean)).collect();
    let std_error = if cfg.trials > 1 { (numeric::pairwise_sum(&sq) / (tf - 1.0)).sqrt() / tf.sqrt() } else { 0.0 };
    let avg = |f: fn(&MixedBoundTerms) -> f64| numeric::pairwise_sum(&outcomes.iter().map(|o| f(&o.mixed_bound)).collect::<Vec<_>>()) / tf;
    let mixed_bound = MixedBoundTerms {
        typical: avg(|g| g.typical),
        conditional: avg(|g| g.conditional),
        cross: avg(|g| g.cross),
        total: avg(|g| g.total),
    };
    let (bound_s_opt, bound_value) = random_coding_bound(&s_bar, cfg.n, cfg.m);
    Ok(ExperimentReport {
        n: cfg.n,
        m: cfg.m,
        trials: cfg.trials,
        seed: cfg.seed,
        mean_error: mean,
        std_error,
        errors,
        bound_s_opt,
        bound_value,
        mixed_bound,
    })
}

fn draw_word(ch: &ChannelCq, sampler: &WeightedIndex<f64>, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let conditioned = match &cfg.constraint {
        Some(Constraint { budget, mode: ConstraintMode::Conditioned }) => Some(*budget),
        _ => None,
    };
    let Some(budget) = conditioned else {
        return Ok((0..cfg.n).map(|_| sampler.sample(rng)).collect());
    };
    let cost = ch.cost().ok_or(Error::NoCost)?;
    let limit = budget * cfg.n as f64 + Tolerances::default().prob;
    for _ in 0..MAX_REJECTIONS {
        let w: Vec<usize> = (0..cfg.n).map(|_| sampler.sample(rng)).collect();
        if w.iter().map(|&i| cost[i]).sum::<f64>() <= limit {
            return Ok(w);
        }
    }
    Err(Error::Infeasible(format!("no admissible word after {MAX_REJECTIONS} draws")))
}

/// Exact expectation of the SRM error over all codebooks of `m` words of
/// length `n`, words drawn i.i.d. from `pi`.
pub fn exhaustive_expected_error(ch: &ChannelCq, pi: &[f64], n: usize, m: usize) -> Result<f64> {
    ch.check_probs(pi)?;
    let k = ch.alphabet_size();
    let slots = n * m;
    let total = (k as f64).powi(slots as i32);
    if total > 1e7 {
        return Err(Error::Domain(format!("{total} codebooks is too many to enumerate")));
    }
    let mut idx = vec![0usize; slots];
    let mut terms = Vec::with_capacity(total as usize);
    loop {
        let weight: f64 = idx.iter().map(|&i| pi[i]).product();
        if weight > 0.0 {
            let words: Vec<Vec<usize>> = idx.chunks(n).map(<[usize]>::to_vec).collect();
            let cb = Codebook::new(ch, words)?;
            terms.push(weight * srm_error(&gram(&cb)?));
        }
        let mut t = slots;
        loop {
            if t == 0 {
                return Ok(numeric::pairwise_sum(&terms));
            }
            t -= 1;
            idx[t] += 1;
            if idx[t] < k {
                break;
            }
            idx[t] = 0;
        }
    }
}

/// Value of the quasiclassical bound at one `s` and its infimum over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GallagerBound {
    pub s: f64,
    pub value: f64,
    pub inf_s: f64,
    pub inf_value: f64,
}

/// `(M-1)^s (Tr[sum_i pi_i S_i^{1/(1+s)}]^{1+s})^n` for commuting states.
pub fn quasiclassical_gallager_bound(ch: &ChannelCq, pi: &[f64], n: usize, m: usize, s: f64) -> Result<GallagerBound> {
    ch.check_probs(pi)?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("s = {s} outside [0, 1]")));
    }
    let states = ch.states();
    let mut worst = 0.0_f64;
    for i in 0..states.len() {
        for j in (i + 1)..states.len() {
            worst = worst.max(linalg::commutator_norm(states[i].matrix(), states[j].matrix()));
        }
    }
    if worst > 1e-9 {
        return Err(Error::NotCommuting { norm: worst });
    }
    let floor = Tolerances::default().eig_floor;
    let value_at = |s: f64| -> f64 {
        let a = 1.0 / (1.0 + s);
        let d = ch.dim();
        let mut mix = CMatrix::zeros(d, d);
        for (p, st) in pi.iter().zip(states) {
            if *p > 0.0 {
                mix += st.map_spectrum(floor, |l| l.powf(a)) * Complex64::new(*p, 0.0);
            }
        }
        let spec = linalg::eigh(&mix);
        let tr: f64 = spec.values.iter().filter(|&&l| l > 0.0).map(|&l| l.powf(1.0 + s)).sum();
        let factor = if m <= 1 { 0f64.powf(s) } else { ((m - 1) as f64).powf(s) };
        factor * tr.powi(n as i32)
    };
    let (inf_s, neg) = numeric::grid_golden_max(|s| -value_at(s), 0.0, 1.0, 101, 1e-10);
    Ok(GallagerBound { s, value: value_at(s), inf_s, inf_value: -neg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::binary_channel;

    fn orth(k: usize) -> ChannelCq {
        ChannelCq::from_pure((0..k).map(|i| PureState::basis(k, i)).collect(), None).unwrap()
    }

    #[test]
    fn gram_examples() {
        let ch = orth(3);
        let cb = Codebook::new(&ch, vec![vec![0], vec![1], vec![2]]).unwrap();
        assert_eq!(gram(&cb).unwrap().entries, linalg::identity(3));
        let cb = Codebook::new(&ch, vec![vec![1], vec![1]]).unwrap();
        assert!(gram(&cb).unwrap().entries.iter().all(|z| (*z - linalg::ONE).norm() < 1e-15));
        let ch = ChannelCq::binary(0.3).unwrap();
        let cb = Codebook::new(&ch, vec![vec![0], vec![1]]).unwrap();
        assert!((gram(&cb).unwrap().entries[(0, 1)].norm() - 0.3).abs() < 1e-15);
        let mixed = ChannelCq::new(vec![DensityMatrix::maximally_mixed(2)], None).unwrap();
        let cb = Codebook::new(&mixed, vec![vec![0]]).unwrap();
        assert!(matches!(gram(&cb), Err(Error::MixedStates)));
    }

    #[test]
    fn srm_examples() {
        let ch = orth(3);
        let cb = Codebook::new(&ch, vec![vec![0], vec![2]]).unwrap();
        let x = srm(&cb).unwrap();
        assert_eq!(average_error(&cb, &x).unwrap(), 0.0);

        let cb = Codebook::new(&ch, vec![vec![1], vec![1]]).unwrap();
        let x = srm(&cb).unwrap();
        for (s, xk) in cb.states().iter().zip(x.elements()) {
            assert!((s.expectation(xk) - 0.5).abs() < 1e-12);
        }
        assert!((average_error(&cb, &x).unwrap() - 0.5).abs() < 1e-12);

        let eps: f64 = 0.5;
        let ch = ChannelCq::binary(eps).unwrap();
        let cb = Codebook::new(&ch, vec![vec![0], vec![1]]).unwrap();
        let want = (1.0 - (1.0 - eps * eps).sqrt()) / 2.0;
        assert!((average_error(&cb, &srm(&cb).unwrap()).unwrap() - want).abs() < 1e-12);
        assert!((srm_error(&gram(&cb).unwrap()) - want).abs() < 1e-12);
    }

    #[test]
    fn guessing_rule_error() {
        let ch = orth(3);
        let cb = Codebook::new(&ch, vec![vec![0], vec![1], vec![2]]).unwrap();
        let third = linalg::identity(3) * Complex64::new(1.0 / 3.0, 0.0);
        let rule = DecisionRule::new(vec![third.clone(), third.clone(), third]).unwrap();
        assert!((average_error(&cb, &rule).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        let short = DecisionRule::new(vec![linalg::identity(3)]).unwrap();
        assert!(matches!(average_error(&cb, &short), Err(Error::TooFewElements { needed: 3, found: 1 })));
    }

    #[test]
    fn srm_bounds_two_words() {
        for eps in [0.0, 0.2, 0.5, 0.9] {
            let ch = ChannelCq::binary(eps).unwrap();
            let cb = Codebook::new(&ch, vec![vec![0], vec![1]]).unwrap();
            let b = srm_bounds(&cb).unwrap();
            let tight = 2.0 - (1.0 + eps).sqrt() - (1.0 - eps).sqrt();
            assert!((b.tight - tight).abs() < 1e-12);
            assert!((b.coarse - eps * eps).abs() < 1e-12);
        }
    }

    #[test]
    fn typical_projector_examples() {
        let pure = PureState::from_real(&[0.6, 0.8]).unwrap().to_density();
        for n in 1..4 {
            let p = typical_projector(&pure, n, 0.05).unwrap();
            assert_eq!(p.rank, 1);
            assert!((p.capture - 1.0).abs() < 1e-12);
        }
        // lambda = 1/2 sits strictly inside (e^{-(ln 2 + 0.1)}, e^{-(ln 2 - 0.1)})
        let half = DensityMatrix::maximally_mixed(2);
        let p = typical_projector(&half, 1, 0.1).unwrap();
        assert_eq!(p.rank, 2);
        assert!((p.capture - 1.0).abs() < 1e-12);
    }

    #[test]
    fn typical_projector_matches_classical_typical_set() {
        let s = DensityMatrix::from_diagonal(&[0.9, 0.1]).unwrap();
        let (n, delta) = (4usize, 0.3);
        let p = typical_projector(&s, n, delta).unwrap();
        let h = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        let (lo, hi) = ((-(n as f64) * (h + delta)).exp(), (-(n as f64) * (h - delta)).exp());
        let mut capture = 0.0;
        let mut rank = 0;
        for k in 0..=n {
            let lam = 0.9f64.powi((n - k) as i32) * 0.1f64.powi(k as i32);
            if lam > lo && lam < hi {
                let binom = [1.0, 4.0, 6.0, 4.0, 1.0][k];
                capture += binom * lam;
                rank += binom as usize;
            }
        }
        assert_eq!(p.rank, rank);
        assert!((p.capture - capture).abs() < 1e-12);
        assert!(p.norm < hi);
        let sq = &p.projector * &p.projector;
        assert!(linalg::max_abs_diff(&sq, &p.projector) < 1e-9);
    }

    #[test]
    fn conditional_projector_examples() {
        let pure = PureState::from_real(&[0.6, 0.8]).unwrap().to_density();
        let p = conditional_typical_projector(&pure, 1, 0.0, 0.1).unwrap();
        assert!(linalg::max_abs_diff(&p.projector, pure.matrix()) < 1e-12);

        let s = DensityMatrix::from_diagonal(&[0.5, 0.5, 0.0]).unwrap();
        let p = conditional_typical_projector(&s, 1, 3.0, f64::INFINITY).unwrap();
        assert_eq!(p.rank, 2);
        assert!((p.projector[(2, 2)].norm()) < 1e-15);

        // classical conditional typicality on a product of diagonal letters
        let a = DensityMatrix::from_diagonal(&[0.8, 0.2]).unwrap();
        let b = DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap();
        let w = crate::qstate::tensor(&a, &b).unwrap();
        let (hbar, delta) = (0.55, 0.2);
        let p = conditional_typical_projector(&w, 2, hbar, delta).unwrap();
        let (lo, hi) = ((-2.0 * (hbar + delta)).exp(), (-2.0 * (hbar - delta)).exp());
        for (k, lam) in [0.24, 0.56, 0.06, 0.14].iter().enumerate() {
            let inside = *lam > lo && *lam < hi;
            assert_eq!(p.projector[(k, k)].re > 0.5, inside, "eigenvalue {lam}");
        }
    }

    #[test]
    fn mixed_srm_reduces_to_srm() {
        let ch = ChannelCq::binary(0.4).unwrap();
        let cb = Codebook::new(&ch, vec![vec![0, 1], vec![1, 1], vec![0, 0]]).unwrap();
        let dim = cb.dim();
        let id = TypicalProjector::from_projector(linalg::identity(dim), &linalg::identity(dim));
        let pw: Vec<TypicalProjector> = cb
            .states()
            .iter()
            .map(|s| {
                let d = s.density().into_matrix();
                TypicalProjector::from_projector(d.clone(), &d)
            })
            .collect();
        let a = mixed_srm(&cb, &id, &pw).unwrap();
        let b = srm(&cb).unwrap();
        for (x, y) in a.elements().iter().zip(b.elements()) {
            assert!(linalg::max_abs_diff(x, y) < 1e-9);
        }
    }

    #[test]
    fn mixed_srm_single_word() {
        let s = DensityMatrix::from_diagonal(&[0.7, 0.3]).unwrap();
        let ch = ChannelCq::new(vec![s.clone()], None).unwrap();
        let cb = Codebook::new(&ch, vec![vec![0]]).unwrap();
        let p = typical_projector(&s, 1, 0.5).unwrap();
        let pw = vec![conditional_typical_projector(&s, 1, crate::qstate::entropy(&s), 0.5).unwrap()];
        let x = mixed_srm(&cb, &p, &pw).unwrap();
        let p_hat = x.elements()[0].clone();
        let err = average_error(&cb, &x).unwrap();
        assert!((err - (1.0 - linalg::trace_product(s.matrix(), &p_hat).re)).abs() < 1e-12);
    }

    #[test]
    fn random_coding_bound_binary() {
        let ch = ChannelCq::binary(0.5).unwrap();
        let s_bar = ch.average(&[0.5, 0.5]);
        let (s, v) = random_coding_bound(&s_bar, 2, 2);
        assert!((0.0..=1.0).contains(&s));
        for k in 0..=100 {
            assert!(v <= random_coding_bound_at(&s_bar, 2, 2, k as f64 / 100.0) + 1e-15);
        }
        assert!((random_coding_bound_at(&s_bar, 2, 2, 0.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exhaustive_expectation_small_case() {
        let eps = 0.5;
        let ch = ChannelCq::binary(eps).unwrap();
        // n = 1, M = 2: half the codebooks repeat a word (error 1/2), half are
        // the two distinct letters.
        let e = exhaustive_expected_error(&ch, &[0.5, 0.5], 1, 2).unwrap();
        let distinct = (1.0 - (1.0f64 - eps * eps).sqrt()) / 2.0;
        assert!((e - (0.5 * 0.5 + 0.5 * distinct)).abs() < 1e-14);
    }

    #[test]
    fn experiment_orthogonal_channel_has_zero_error_for_distinct_words() {
        let ch = orth(4);
        let cfg = ExperimentConfig { n: 1, m: 1, trials: 50, seed: 3, ..Default::default() };
        let r = random_coding_experiment(&ch, &[0.25; 4], &cfg).unwrap();
        assert_eq!(r.mean_error, 0.0);
        // with two words, collisions happen with probability 1/4
        let cfg = ExperimentConfig { n: 1, m: 2, trials: 400, seed: 3, ..Default::default() };
        let r = random_coding_experiment(&ch, &[0.25; 4], &cfg).unwrap();
        assert!(r.errors.iter().all(|&e| e == 0.0 || (e - 0.5).abs() < 1e-12));
        assert!(r.bound_value > 0.0);
        assert!((r.bound_value - 0.5).abs() < 1e-9);
    }

    #[test]
    fn experiment_is_deterministic() {
        let ch = ChannelCq::binary(0.5).unwrap();
        let cfg = ExperimentConfig { n: 2, m: 2, trials: 200, seed: 7, ..Default::default() };
        let a = random_coding_experiment(&ch, &[0.5, 0.5], &cfg).unwrap();
        let b = random_coding_experiment(&ch, &[0.5, 0.5], &cfg).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| random_coding_experiment(&ch, &[0.5, 0.5], &cfg).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn gallager_bound_examples() {
        let s = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let ch = ChannelCq::new(vec![s.clone(), s], None).unwrap();
        let b = quasiclassical_gallager_bound(&ch, &[0.5, 0.5], 3, 5, 0.7).unwrap();
        assert!((b.value - 4f64.powf(0.7)).abs() < 1e-12);
        let b = quasiclassical_gallager_bound(&ch, &[0.5, 0.5], 3, 5, 0.0).unwrap();
        assert!((b.value - 1.0).abs() < 1e-14);

        // Binary symmetric channel, s = 1: Gallager E0 with uniform input.
        let p: f64 = 0.1;
        let bsc = ChannelCq::new(
            vec![DensityMatrix::from_diagonal(&[1.0 - p, p]).unwrap(), DensityMatrix::from_diagonal(&[p, 1.0 - p]).unwrap()],
            None,
        )
        .unwrap();
        let (n, m) = (2usize, 3usize);
        let b = quasiclassical_gallager_bound(&bsc, &[0.5, 0.5], n, m, 1.0).unwrap();
        let inner = 0.5 * (1.0 - p).sqrt() + 0.5 * p.sqrt();
        let e0 = -(2.0 * inner * inner).ln();
        let oracle = ((m - 1) as f64) * (-(n as f64) * e0).exp();
        assert!((b.value - oracle).abs() < 1e-12);
        assert!(b.inf_value <= b.value + 1e-15);

        let pure = ChannelCq::binary(0.5).unwrap();
        assert!(matches!(quasiclassical_gallager_bound(&pure, &[0.5, 0.5], 1, 2, 0.5), Err(Error::NotCommuting { .. })));
    }

    #[test]
    fn fano_consistency_on_simulated_codes() {
        let ch = ChannelCq::binary(0.5).unwrap();
        let c = binary_channel(0.5).unwrap().c;
        let cfg = ExperimentConfig { n: 2, m: 3, trials: 100, seed: 1, ..Default::default() };
        let r = random_coding_experiment(&ch, &[0.5, 0.5], &cfg).unwrap();
        for e in &r.errors {
            assert!(3f64.ln() * (1.0 - e) <= 2.0 * c + 1.0 + 1e-9);
        }
    }
}
