//! Thresholded generalized eigenproblem `A c = B c E`.

use num_complex::Complex64;

use crate::error::{QksdError, Result};
use crate::krylov::KrylovPair;
use crate::linalg::{hermitian_eigen, hermitian_function, hermitize, spectral_norm, CMatrix, CVector};

/// Pair projected onto the retained eigenvectors of `S̃`.
#[derive(Debug, Clone)]
pub struct ThresholdResult {
    pub a: CMatrix,
    pub b: CMatrix,
    /// Indices into the ascending eigenvalues of `S̃`, largest first.
    pub retained_indices: Vec<usize>,
    pub epsilon: f64,
    pub n_eps: usize,
    pub v_kept: CMatrix,
    /// All eigenvalues of `S̃`, ascending.
    pub s_eigenvalues: Vec<f64>,
}

fn check_square_pair(h: &CMatrix, s: &CMatrix) -> Result<usize> {
    let n = s.nrows();
    for m in [h, s] {
        if m.nrows() != m.ncols() {
            return Err(QksdError::InvalidSize("matrix must be square".into()));
        }
    }
    if h.nrows() != n {
        return Err(QksdError::DimensionMismatch { expected: n, found: h.nrows() });
    }
    Ok(n)
}

fn project(h: &CMatrix, s: &CMatrix, keep: Vec<usize>, epsilon: f64) -> Result<ThresholdResult> {
    let eig = hermitian_eigen(s);
    if keep.is_empty() {
        return Err(QksdError::EmptyBasis { epsilon });
    }
    let n = s.nrows();
    let v_kept = CMatrix::from_fn(n, keep.len(), |r, c| eig.vectors[(r, keep[c])]);
    let a = hermitize(&(v_kept.adjoint() * h * &v_kept));
    let b = CMatrix::from_fn(keep.len(), keep.len(), |r, c| {
        if r == c {
            Complex64::new(eig.values[keep[r]], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(ThresholdResult {
        a,
        b,
        n_eps: keep.len(),
        retained_indices: keep,
        epsilon,
        v_kept,
        s_eigenvalues: eig.values,
    })
}

/// Keeps eigenvectors of `S̃` whose eigenvalue exceeds `ε`.
pub fn basis_thresholding(h: &CMatrix, s: &CMatrix, epsilon: f64) -> Result<ThresholdResult> {
    check_square_pair(h, s)?;
    if !(epsilon >= 0.0) {
        return Err(QksdError::InvalidInput(format!("threshold must be non-negative, got {epsilon}")));
    }
    let values = hermitian_eigen(s).values;
    let keep: Vec<usize> = (0..values.len()).rev().filter(|&i| values[i] > epsilon).collect();
    project(h, s, keep, epsilon)
}

/// Keeps the `k` largest eigenvectors of `S̃` regardless of their size.
pub fn threshold_top_k(h: &CMatrix, s: &CMatrix, k: usize) -> Result<ThresholdResult> {
    let n = check_square_pair(h, s)?;
    if k == 0 || k > n {
        return Err(QksdError::InvalidInput(format!("cannot keep {k} of {n} basis vectors")));
    }
    let values = hermitian_eigen(s).values;
    let keep: Vec<usize> = (n - k..n).rev().collect();
    let epsilon = if k < n { values[n - k - 1].max(0.0) } else { 0.0 };
    project(h, s, keep, epsilon)
}

#[derive(Debug, Clone)]
pub struct GevpSolution {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenangles: Vec<f64>,
    /// B-orthonormal columns.
    pub eigenvectors: CMatrix,
    pub d0: f64,
    pub cond_s: f64,
}

impl GevpSolution {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `E_1 − E_0`, or `None` for a one-dimensional problem.
    pub fn gap(&self) -> Option<f64> {
        self.eigenvalues.get(1).map(|e1| e1 - self.eigenvalues[0])
    }
}

/// Solves via `B^{−1/2} A B^{−1/2}`.
pub fn solve_gevp(a: &CMatrix, b: &CMatrix) -> Result<GevpSolution> {
    check_square_pair(a, b)?;
    if b.nrows() == 0 {
        return Err(QksdError::EmptyBasis { epsilon: f64::NAN });
    }
    let b_eig = hermitian_eigen(b);
    let bmin = b_eig.values[0];
    let bmax = *b_eig.values.last().unwrap();
    if !(bmin > 0.0) {
        return Err(QksdError::IllPosed(format!(
            "overlap block is not positive definite (smallest eigenvalue {bmin:e})"
        )));
    }
    let b_inv_sqrt = hermitian_function(&b_eig, |x| Complex64::new(1.0 / x.sqrt(), 0.0));
    let reduced = hermitize(&(&b_inv_sqrt * a * &b_inv_sqrt));
    let eig = hermitian_eigen(&reduced);
    let eigenvectors = &b_inv_sqrt * &eig.vectors;
    let c0: CVector = eigenvectors.column(0).into_owned();
    let x0 = &c0 / Complex64::new(c0.norm(), 0.0);
    let ax = x0.dotc(&(a * &x0));
    let bx = x0.dotc(&(b * &x0));
    let d0 = ax.re.hypot(bx.re);
    Ok(GevpSolution {
        eigenangles: eig.values.iter().map(|e| e.atan()).collect(),
        eigenvalues: eig.values,
        eigenvectors,
        d0,
        cond_s: bmax / bmin,
    })
}

/// Thresholds and solves in one step.
pub fn threshold_and_solve(pair: &KrylovPair, epsilon: f64) -> Result<(ThresholdResult, GevpSolution)> {
    let t = basis_thresholding(&pair.h, &pair.s, epsilon)?;
    let sol = solve_gevp(&t.a, &t.b)?;
    Ok((t, sol))
}

/// `η = √(‖ΔH‖² + ‖ΔS‖²)` in spectral norm.
pub fn perturbation_magnitude(delta_h: &CMatrix, delta_s: &CMatrix) -> f64 {
    spectral_norm(delta_h).hypot(spectral_norm(delta_s))
}

/// `χ` from conjugating the perturbed thresholded pair onto the exact one.
/// `None` when the retained dimensions differ.
pub fn conjugated_chi(exact: &ThresholdResult, perturbed: &ThresholdResult) -> Option<f64> {
    conjugated_deltas(exact, perturbed).map(|(da, db)| perturbation_magnitude(&da, &db))
}

/// `(W†ÃW − A, W†B̃W − B)` with `W = Ṽ_{>ε}† V_{>ε}`.
pub fn conjugated_deltas(exact: &ThresholdResult, perturbed: &ThresholdResult) -> Option<(CMatrix, CMatrix)> {
    if exact.n_eps != perturbed.n_eps {
        return None;
    }
    let w = perturbed.v_kept.adjoint() * &exact.v_kept;
    let da = w.adjoint() * &perturbed.a * &w - &exact.a;
    let db = w.adjoint() * &perturbed.b * &w - &exact.b;
    Some((da, db))
}
