//! Dense complex helpers shared by every module.
//!
//! Everything here works on `nalgebra::DMatrix<Complex64>`. Hermitian
//! eigendecompositions are returned with ascending eigenvalues so callers
//! never have to re-sort.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Average `m` with its adjoint; removes round-off asymmetry before an eigensolve.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn hermitian_eigen(m: &CMatrix) -> HermitianEigen {
    let n = m.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        };
    }
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps ties in solver order
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEigen { values, vectors }
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut values: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Spectral norm of a Hermitian matrix (largest absolute eigenvalue).
pub fn hermitian_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)
        .into_iter()
        .fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Spectral norm of an arbitrary matrix (largest singular value).
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, &v| acc.max(v))
}

/// Largest absolute entrywise deviation between two matrices.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Matrix function `V f(Λ) V†` of a Hermitian matrix given its eigenpairs.
pub fn hermitian_function<F>(eig: &HermitianEigen, f: F) -> CMatrix
where
    F: Fn(f64) -> Complex64,
{
    let n = eig.values.len();
    let mut scaled = eig.vectors.clone();
    for (j, &lambda) in eig.values.iter().enumerate() {
        let factor = f(lambda);
        for i in 0..n {
            scaled[(i, j)] *= factor;
        }
    }
    scaled * eig.vectors.adjoint()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Inner product ⟨a|b⟩ (conjugate-linear in `a`).
pub fn inner(a: &CVector, b: &CVector) -> Complex64 {
    a.dotc(b)
}

/// ⟨a|M|b⟩.
pub fn sandwich(a: &CVector, m: &CMatrix, b: &CVector) -> Complex64 {
    a.dotc(&(m * b))
}
