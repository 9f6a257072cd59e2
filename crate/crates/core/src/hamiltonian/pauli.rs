use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{QksdError, Result};
use crate::linalg::{CMatrix, I, ONE, ZERO};

/// Default ceiling on the qubit count accepted by dense conversions.
pub const DEFAULT_DENSE_QUBIT_CAP: usize = 14;

/// Coefficients below this magnitude are dropped when a sum is assembled.
pub const MERGE_TOLERANCE: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// Single-qubit product `self * other = phase * result`.
    pub fn mul(self, other: Pauli) -> (Complex64, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (ONE, p),
            (a, b) if a == b => (ONE, I),
            (X, Y) => (I_PHASE, Z),
            (Y, X) => (-I_PHASE, Z),
            (Y, Z) => (I_PHASE, X),
            (Z, Y) => (-I_PHASE, X),
            (Z, X) => (I_PHASE, Y),
            (X, Z) => (-I_PHASE, Y),
            _ => unreachable!(),
        }
    }

    fn matrix(self) -> [[Complex64; 2]; 2] {
        match self {
            Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => [[ZERO, -I], [I, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

const I_PHASE: Complex64 = I;

/// Tensor product of single-qubit Paulis; position 0 is the leftmost
/// (most significant) tensor factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    axes: Vec<Pauli>,
}

impl PauliString {
    pub fn new(axes: Vec<Pauli>) -> Self {
        Self { axes }
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self {
            axes: vec![Pauli::I; n_qubits],
        }
    }

    /// Parse a label such as `"XZIY"`.
    pub fn parse(label: &str) -> Result<Self> {
        label
            .chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(QksdError::InvalidInput(format!(
                    "unknown Pauli symbol {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    /// String with `pauli` on `qubit` and identity elsewhere.
    pub fn single(n_qubits: usize, qubit: usize, pauli: Pauli) -> Self {
        let mut axes = vec![Pauli::I; n_qubits];
        axes[qubit] = pauli;
        Self { axes }
    }

    pub fn n_qubits(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Pauli] {
        &self.axes
    }

    pub fn is_identity(&self) -> bool {
        self.axes.iter().all(|&p| p == Pauli::I)
    }

    /// Anticommute iff the number of positions where both factors are
    /// non-identity and different is odd.
    pub fn anticommutes_with(&self, other: &PauliString) -> bool {
        debug_assert_eq!(self.n_qubits(), other.n_qubits());
        let clashes = self
            .axes
            .iter()
            .zip(&other.axes)
            .filter(|(a, b)| **a != Pauli::I && **b != Pauli::I && a != b)
            .count();
        clashes % 2 == 1
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        !self.anticommutes_with(other)
    }

    /// Product `self * other = phase * string`.
    pub fn mul(&self, other: &PauliString) -> (Complex64, PauliString) {
        debug_assert_eq!(self.n_qubits(), other.n_qubits());
        let mut phase = ONE;
        let axes = self
            .axes
            .iter()
            .zip(&other.axes)
            .map(|(&a, &b)| {
                let (p, r) = a.mul(b);
                phase *= p;
                r
            })
            .collect();
        (phase, PauliString { axes })
    }

    pub fn to_dense(&self) -> Result<CMatrix> {
        self.to_dense_capped(DEFAULT_DENSE_QUBIT_CAP)
    }

    /// Dense `2^N × 2^N` matrix. Each row has exactly one non-zero entry, so
    /// the matrix is filled directly instead of through Kronecker products.
    pub fn to_dense_capped(&self, cap: usize) -> Result<CMatrix> {
        let n = self.n_qubits();
        check_cap(n, cap)?;
        let dim = 1usize << n;
        let mut out = CMatrix::zeros(dim, dim);
        for row in 0..dim {
            let (col, value) = self.row_entry(row);
            out[(row, col)] = value;
        }
        Ok(out)
    }

    /// Column index and value of the single non-zero entry in `row`.
    pub(crate) fn row_entry(&self, row: usize) -> (usize, Complex64) {
        let n = self.n_qubits();
        let mut col = row;
        let mut value = ONE;
        for (q, &p) in self.axes.iter().enumerate() {
            let shift = n - 1 - q;
            let bit = (row >> shift) & 1;
            let m = p.matrix();
            // entry (bit, other) is non-zero for exactly one `other`
            let other = if m[bit][0] != ZERO { 0 } else { 1 };
            value *= m[bit][other];
            col = (col & !(1 << shift)) | (other << shift);
        }
        (col, value)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.axes {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

pub(crate) fn check_cap(n_qubits: usize, cap: usize) -> Result<()> {
    if n_qubits > cap {
        return Err(QksdError::ResourceLimit {
            qubits: n_qubits,
            cap,
        });
    }
    Ok(())
}

/// Hermitian operator `Σ_k α_k P_k` with real coefficients and merged terms.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    /// Merge duplicate strings (first occurrence fixes the order) and drop
    /// coefficients below [`MERGE_TOLERANCE`].
    pub fn new(n_qubits: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        let mut index: HashMap<PauliString, usize> = HashMap::new();
        let mut merged: Vec<(f64, PauliString)> = Vec::new();
        for (coeff, string) in terms {
            if string.n_qubits() != n_qubits {
                return Err(QksdError::DimensionMismatch {
                    expected: n_qubits,
                    found: string.n_qubits(),
                });
            }
            if !coeff.is_finite() {
                return Err(QksdError::InvalidInput(format!(
                    "non-finite coefficient on {string}"
                )));
            }
            match index.get(&string) {
                Some(&slot) => merged[slot].0 += coeff,
                None => {
                    index.insert(string.clone(), merged.len());
                    merged.push((coeff, string));
                }
            }
        }
        merged.retain(|(c, _)| c.abs() >= MERGE_TOLERANCE);
        Ok(Self {
            n_qubits,
            terms: merged,
        })
    }

    /// Build from `(coefficient, label)` pairs, e.g. `(0.5, "XZ")`.
    pub fn from_labels(terms: &[(f64, &str)]) -> Result<Self> {
        let n_qubits = terms.first().map(|(_, l)| l.len()).unwrap_or(0);
        let parsed = terms
            .iter()
            .map(|(c, l)| PauliString::parse(l).map(|s| (*c, s)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_qubits, parsed)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the all-identity string (0 when absent).
    pub fn identity_coefficient(&self) -> f64 {
        self.terms
            .iter()
            .find(|(_, s)| s.is_identity())
            .map(|(c, _)| *c)
            .unwrap_or(0.0)
    }

    /// Terms other than the identity, in stored order.
    pub fn non_identity_terms(&self) -> impl Iterator<Item = &(f64, PauliString)> {
        self.terms.iter().filter(|(_, s)| !s.is_identity())
    }

    pub fn without_identity(&self) -> PauliSum {
        PauliSum {
            n_qubits: self.n_qubits,
            terms: self.non_identity_terms().cloned().collect(),
        }
    }

    /// `‖H‖_α = Σ_k |α_k|` over non-identity terms.
    pub fn alpha_norm(&self) -> f64 {
        self.non_identity_terms().map(|(c, _)| c.abs()).sum()
    }

    pub fn to_dense(&self) -> Result<CMatrix> {
        self.to_dense_capped(DEFAULT_DENSE_QUBIT_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<CMatrix> {
        check_cap(self.n_qubits, cap)?;
        let dim = 1usize << self.n_qubits;
        let mut out = CMatrix::zeros(dim, dim);
        for (coeff, string) in &self.terms {
            for row in 0..dim {
                let (col, value) = string.row_entry(row);
                out[(row, col)] += value * *coeff;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn x_is_the_swap_matrix() {
        let x = PauliString::parse("X").unwrap().to_dense().unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        assert_eq!(x, expected);
    }

    #[test]
    fn scaled_z() {
        let h = PauliSum::from_labels(&[(0.5, "Z")]).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[c(0.5), ZERO, ZERO, c(-0.5)]);
        assert!(max_abs_diff(&h.to_dense().unwrap(), &expected) < 1e-15);
    }

    #[test]
    fn z_kron_x_blocks() {
        let zx = PauliString::parse("ZX").unwrap().to_dense().unwrap();
        #[rustfmt::skip]
        let expected = CMatrix::from_row_slice(4, 4, &[
            ZERO, ONE, ZERO, ZERO,
            ONE, ZERO, ZERO, ZERO,
            ZERO, ZERO, ZERO, -ONE,
            ZERO, ZERO, -ONE, ZERO,
        ]);
        assert_eq!(zx, expected);
    }

    #[test]
    fn products_match_dense_multiplication() {
        let labels = ["XY", "ZZ", "YI", "XZ", "IY"];
        for a in labels {
            for b in labels {
                let pa = PauliString::parse(a).unwrap();
                let pb = PauliString::parse(b).unwrap();
                let (phase, prod) = pa.mul(&pb);
                let dense = pa.to_dense().unwrap() * pb.to_dense().unwrap();
                let rebuilt = prod.to_dense().unwrap() * phase;
                assert!(max_abs_diff(&dense, &rebuilt) < 1e-15, "{a}*{b}");
                let anti = pa.to_dense().unwrap() * pb.to_dense().unwrap()
                    + pb.to_dense().unwrap() * pa.to_dense().unwrap();
                let is_zero = anti.iter().all(|z| z.norm() < 1e-15);
                assert_eq!(is_zero, pa.anticommutes_with(&pb), "{a},{b}");
            }
        }
    }

    #[test]
    fn merging_sums_duplicates_and_drops_zeros() {
        let h = PauliSum::from_labels(&[(0.5, "XZ"), (0.25, "XZ"), (1e-16, "ZZ"), (0.1, "XX")])
            .unwrap();
        assert_eq!(h.terms().len(), 2);
        assert_eq!(h.terms()[0].0, 0.75);
        assert_eq!(h.terms()[1].1.to_string(), "XX");
    }

    #[test]
    fn dense_cap_is_enforced() {
        let big = PauliString::identity(DEFAULT_DENSE_QUBIT_CAP + 1);
        assert!(matches!(
            big.to_dense(),
            Err(QksdError::ResourceLimit { .. })
        ));
        assert!(PauliString::identity(3).to_dense_capped(2).is_err());
    }
}
