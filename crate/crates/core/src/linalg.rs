//! Dense complex linear algebra used throughout the crate.
//!
//! Everything spectral goes through [`eigh`]: matrix logarithms, fractional
//! powers and generalized inverses are all defined by mapping eigenvalues,
//! with eigenvalues at or below a relative floor treated as zero.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
/// Column `k` of `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Absolute cutoff below which an eigenvalue counts as zero.
    pub fn cutoff(&self, rel_floor: f64) -> f64 {
        rel_floor * self.max().max(0.0)
    }

    /// `V diag(f(lambda)) V^dagger`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            let v = self.vectors.column(k);
            for j in 0..n {
                let vj = v[j].conj() * w;
                if vj == ZERO {
                    continue;
                }
                for i in 0..n {
                    out[(i, j)] += v[i] * vj;
                }
            }
        }
        out
    }

    /// Orthogonal projector onto eigenvectors selected by `keep`.
    pub fn projector(&self, keep: impl Fn(f64) -> bool) -> CMatrix {
        self.map(|lam| if keep(lam) { 1.0 } else { 0.0 })
    }
}

/// Hermitian eigendecomposition of the Hermitian part of `m`.
pub fn eigh(m: &CMatrix) -> Spectrum {
    let n = m.nrows();
    if n == 0 {
        return Spectrum { values: Vec::new(), vectors: CMatrix::zeros(0, 0) };
    }
    let h = hermitian_part(m);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Spectrum { values, vectors }
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `max |a_ij - conj(a_ji)|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `Tr(AB)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Generalized inverse square root: `lambda^{-1/2}` on eigenvalues above
/// `rel_floor * lambda_max`, zero on the rest.
pub fn pinv_sqrt(m: &CMatrix, rel_floor: f64) -> CMatrix {
    let spec = eigh(m);
    let cut = spec.cutoff(rel_floor);
    spec.map(|lam| if lam > cut { 1.0 / lam.sqrt() } else { 0.0 })
}

/// Square root of a PSD matrix; negative round-off eigenvalues map to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    eigh(m).map(|lam| lam.max(0.0).sqrt())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    a.kronecker(b)
}

pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// Frobenius norm of `AB - BA`.
pub fn commutator_norm(a: &CMatrix, b: &CMatrix) -> f64 {
    (a * b - b * a).norm()
}

/// Largest absolute entry difference between two matrices.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn real_diag(d: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(d.len(), d.iter().map(|&x| Complex64::new(x, 0.0))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eigh_sorts_and_reconstructs() {
        let m = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let s = eigh(&m);
        assert!((s.values[0] - 1.0).abs() < 1e-12);
        assert!((s.values[1] - 3.0).abs() < 1e-12);
        assert!(max_abs_diff(&s.map(|x| x), &m) < 1e-12);
    }

    #[test]
    fn pinv_sqrt_zeroes_null_space() {
        let m = real_diag(&[4.0, 0.0, 1e-20]);
        let p = pinv_sqrt(&m, 1e-10);
        assert!((p[(0, 0)].re - 0.5).abs() < 1e-14);
        assert_eq!(p[(1, 1)], ZERO);
        assert_eq!(p[(2, 2)], ZERO);
    }

    #[test]
    fn trace_product_matches_product_trace() {
        let a = CMatrix::from_fn(3, 3, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        let b = CMatrix::from_fn(3, 3, |i, j| c((i * j) as f64, 0.25 * i as f64));
        assert!((trace_product(&a, &b) - trace(&(&a * &b))).norm() < 1e-12);
    }
}
