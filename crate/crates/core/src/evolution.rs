//! Exact and Trotterized propagators, dense spectra, and the Hartree–Fock
//! reference state of a Hubbard chain.

use num_complex::Complex64;

use crate::error::{QksdError, Result};
use crate::hamiltonian::{build_hopping_1d, PauliSum};
use crate::linalg::{hermitian_eigen, hermitian_function, CMatrix, CVector, HermitianEigen};

/// Full eigendecomposition of a dense Hamiltonian, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigen: HermitianEigen,
}

impl Spectrum {
    pub fn from_dense(h: &CMatrix) -> Self {
        Self {
            eigen: hermitian_eigen(h),
        }
    }

    pub fn of(h: &PauliSum) -> Result<Self> {
        Ok(Self::from_dense(&h.to_dense()?))
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigen.vectors
    }

    pub fn dim(&self) -> usize {
        self.eigen.values.len()
    }

    /// `E_{N-1} - E_0`.
    pub fn spectral_span(&self) -> f64 {
        match (self.eigen.values.first(), self.eigen.values.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagatorKind {
    Exact,
    /// First-order product formula over individual Pauli terms.
    Trotter { order: u8, steps: usize, n_gamma: usize },
}

/// Unitary approximation of `e^{-iHt}`.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub matrix: CMatrix,
    pub time: f64,
    pub kind: PropagatorKind,
}

impl Propagator {
    pub fn apply(&self, state: &CVector) -> CVector {
        &self.matrix * state
    }

    /// `‖U†U - I‖` (spectral).
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.matrix.nrows();
        crate::linalg::spectral_norm(&(self.matrix.adjoint() * &self.matrix - CMatrix::identity(n, n)))
    }
}

/// `V diag(e^{-iE_j t}) V†`.
pub fn exact_propagator(spectrum: &Spectrum, time: f64) -> Propagator {
    let matrix = hermitian_function(&spectrum.eigen, |e| Complex64::from_polar(1.0, -e * time));
    Propagator {
        matrix,
        time,
        kind: PropagatorKind::Exact,
    }
}

/// `(Π_k e^{-iα_k P_k t/N})^N` over the non-identity terms in stored order;
/// the identity term contributes its exact global phase.
pub fn trotter_propagator(h: &PauliSum, time: f64, steps: usize) -> Result<Propagator> {
    if steps == 0 {
        return Err(QksdError::InvalidInput("Trotter step count must be at least 1".into()));
    }
    let dim = 1usize << h.n_qubits();
    crate::hamiltonian::pauli::check_cap(h.n_qubits(), crate::hamiltonian::DEFAULT_DENSE_QUBIT_CAP)?;
    let tau = time / steps as f64;
    let terms: Vec<_> = h.non_identity_terms().collect();

    let mut step = CMatrix::identity(dim, dim);
    for (coeff, string) in &terms {
        // e^{-iθP} = cos θ I - i sin θ P, applied on the left
        let theta = coeff * tau;
        let (c, s) = (theta.cos(), theta.sin());
        let mut next = CMatrix::zeros(dim, dim);
        for row in 0..dim {
            let (col, value) = string.row_entry(row);
            let weight = Complex64::new(0.0, -s) * value;
            for j in 0..dim {
                next[(row, j)] = step[(row, j)] * c + step[(col, j)] * weight;
            }
        }
        step = next;
    }
    let mut matrix = CMatrix::identity(dim, dim);
    for _ in 0..steps {
        matrix = &step * &matrix;
    }
    let phase = Complex64::from_polar(1.0, -h.identity_coefficient() * time);
    matrix *= phase;
    Ok(Propagator {
        matrix,
        time,
        kind: PropagatorKind::Trotter {
            order: 1,
            steps,
            n_gamma: terms.len(),
        },
    })
}

/// Particle numbers `(n↑, n↓)` of a Hubbard sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Filling {
    pub n_up: usize,
    pub n_down: usize,
}

impl Filling {
    pub fn new(n_up: usize, n_down: usize) -> Self {
        Self { n_up, n_down }
    }

    /// Half filling with `S_z = 0` (up count rounded up for odd chains).
    pub fn half(sites: usize) -> Self {
        Self {
            n_up: sites.div_ceil(2),
            n_down: sites / 2,
        }
    }
}

/// Computational-basis indices whose interleaved occupations match `filling`.
pub fn sector_basis(sites: usize, filling: Filling) -> Result<Vec<usize>> {
    if filling.n_up > sites || filling.n_down > sites {
        return Err(QksdError::InvalidFilling {
            sites,
            n_up: filling.n_up,
            n_down: filling.n_down,
        });
    }
    let n_qubits = 2 * sites;
    let occupied = |index: usize, qubit: usize| (index >> (n_qubits - 1 - qubit)) & 1 == 1;
    let basis: Vec<usize> = (0..1usize << n_qubits)
        .filter(|&b| {
            let up = (0..sites).filter(|&i| occupied(b, 2 * i)).count();
            let down = (0..sites).filter(|&i| occupied(b, 2 * i + 1)).count();
            up == filling.n_up && down == filling.n_down
        })
        .collect();
    if basis.is_empty() {
        return Err(QksdError::InvalidFilling {
            sites,
            n_up: filling.n_up,
            n_down: filling.n_down,
        });
    }
    Ok(basis)
}

/// Eigendecomposition of `h` restricted to the sector spanned by `basis`.
pub fn sector_spectrum(h: &CMatrix, basis: &[usize]) -> Spectrum {
    let d = basis.len();
    let block = CMatrix::from_fn(d, d, |i, j| h[(basis[i], basis[j])]);
    Spectrum::from_dense(&block)
}

/// Lowest eigenvalue of `h` inside the `(n↑, n↓)` sector.
pub fn sector_ground_energy(h: &CMatrix, sites: usize, filling: Filling) -> Result<f64> {
    let basis = sector_basis(sites, filling)?;
    Ok(sector_spectrum(h, &basis).eigenvalues()[0])
}

/// Ground state of the hopping-only chain inside the `(n↑, n↓)` sector,
/// embedded back into the full `2^{2L}` Fock space with unit norm.
pub fn hartree_fock_state(sites: usize, hopping: f64, filling: Filling) -> Result<CVector> {
    let basis = sector_basis(sites, filling)?;
    let hop = build_hopping_1d(sites, hopping)?;
    let dim = 1usize << (2 * sites);
    let dense = if hop.is_empty() {
        CMatrix::zeros(dim, dim)
    } else {
        hop.to_dense()?
    };
    let spectrum = sector_spectrum(&dense, &basis);
    let ground = spectrum.eigenvectors().column(0);
    let mut state = CVector::zeros(dim);
    for (i, &b) in basis.iter().enumerate() {
        state[b] = ground[i];
    }
    // fix the global phase so the largest amplitude is real and positive
    let pivot = state
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    state *= phase;
    let norm = state.norm();
    Ok(state.unscale(norm))
}
