//! Jordan–Wigner images of fermionic operators.
//!
//! Mode `p` maps to qubit `p`; an occupied mode is the qubit state `|1⟩`, so
//! `n_p = (I - Z_p)/2` and `a_p = Z_0 ⋯ Z_{p-1} (X_p + iY_p)/2`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul};

use num_complex::Complex64;

use super::pauli::{check_cap, Pauli, PauliString, PauliSum, MERGE_TOLERANCE};
use crate::error::{QksdError, Result};
use crate::linalg::{CMatrix, I, ONE};

/// Pauli expansion with complex coefficients; closed under products, which
/// the real-coefficient [`PauliSum`] is not.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliOperator {
    n_qubits: usize,
    terms: BTreeMap<PauliString, Complex64>,
}

impl PauliOperator {
    pub fn zero(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: BTreeMap::new(),
        }
    }

    pub fn term(coeff: Complex64, string: PauliString) -> Self {
        let mut op = Self::zero(string.n_qubits());
        op.add_term(coeff, string);
        op
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn add_term(&mut self, coeff: Complex64, string: PauliString) {
        let slot = self.terms.entry(string).or_insert(Complex64::new(0.0, 0.0));
        *slot += coeff;
    }

    pub fn scale(mut self, factor: Complex64) -> Self {
        for c in self.terms.values_mut() {
            *c *= factor;
        }
        self
    }

    pub fn adjoint(&self) -> Self {
        Self {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(s, c)| (s.clone(), c.conj())).collect(),
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    /// Real-coefficient view; fails if any surviving coefficient carries an
    /// imaginary part above `tol` (the operator is not Hermitian).
    pub fn to_pauli_sum(&self, tol: f64) -> Result<PauliSum> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (string, coeff) in &self.terms {
            if coeff.im.abs() > tol {
                return Err(QksdError::InvalidInput(format!(
                    "operator is not Hermitian: {string} carries {coeff}"
                )));
            }
            if coeff.re.abs() >= MERGE_TOLERANCE {
                terms.push((coeff.re, string.clone()));
            }
        }
        PauliSum::new(self.n_qubits, terms)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<CMatrix> {
        check_cap(self.n_qubits, cap)?;
        let dim = 1usize << self.n_qubits;
        let mut out = CMatrix::zeros(dim, dim);
        for (string, coeff) in &self.terms {
            for row in 0..dim {
                let (col, value) = string.row_entry(row);
                out[(row, col)] += value * *coeff;
            }
        }
        Ok(out)
    }
}

impl Add for PauliOperator {
    type Output = PauliOperator;

    fn add(mut self, rhs: PauliOperator) -> PauliOperator {
        for (s, c) in rhs.terms {
            self.add_term(c, s);
        }
        self
    }
}

impl Mul for &PauliOperator {
    type Output = PauliOperator;

    fn mul(self, rhs: &PauliOperator) -> PauliOperator {
        let mut out = PauliOperator::zero(self.n_qubits);
        for (a, ca) in &self.terms {
            for (b, cb) in &rhs.terms {
                let (phase, s) = a.mul(b);
                out.add_term(phase * ca * cb, s);
            }
        }
        out
    }
}

/// `a_p` on `n_qubits` modes.
pub fn annihilation(mode: usize, n_qubits: usize) -> PauliOperator {
    assert!(mode < n_qubits, "mode {mode} out of range");
    let mut x = vec![Pauli::I; n_qubits];
    for axis in x.iter_mut().take(mode) {
        *axis = Pauli::Z;
    }
    let mut y = x.clone();
    x[mode] = Pauli::X;
    y[mode] = Pauli::Y;
    let mut op = PauliOperator::term(ONE.scale(0.5), PauliString::new(x));
    op.add_term(I.scale(0.5), PauliString::new(y));
    op
}

/// `a_p†` on `n_qubits` modes.
pub fn creation(mode: usize, n_qubits: usize) -> PauliOperator {
    annihilation(mode, n_qubits).adjoint()
}

/// `n_p = a_p† a_p`.
pub fn number(mode: usize, n_qubits: usize) -> PauliOperator {
    &creation(mode, n_qubits) * &annihilation(mode, n_qubits)
}
