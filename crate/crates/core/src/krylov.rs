//! Real-time Krylov bases and the exact projected pair `(H, S)`.
//!
//! Basis vectors are `|φ_k⟩ = U(Δt)^k |φ_0⟩` for `k = 0..n`. For exact
//! propagators this is a global unitary relabeling of the symmetric grid
//! `k = -⌊n/2⌋..=⌊n/2⌋`, so both give the same `(H, S)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QksdError, Result};
use crate::evolution::{exact_propagator, trotter_propagator, Spectrum};
use crate::hamiltonian::{PauliSum, UnitaryPartition};
use crate::linalg::{inner, sandwich, CMatrix, CVector, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    Toeplitz,
    NonToeplitz,
}

impl Construction {
    pub fn label(self) -> &'static str {
        match self {
            Construction::Toeplitz => "toeplitz",
            Construction::NonToeplitz => "nontoeplitz",
        }
    }
}

impl std::str::FromStr for Construction {
    type Err = QksdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "toeplitz" | "t" => Ok(Construction::Toeplitz),
            "nontoeplitz" | "non_toeplitz" | "non-toeplitz" | "nt" => Ok(Construction::NonToeplitz),
            other => Err(QksdError::Config(format!("unknown construction {other:?}"))),
        }
    }
}

/// Krylov order and time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    order: usize,
    dt: f64,
}

impl KrylovConfig {
    pub fn new(order: usize, dt: f64) -> Result<Self> {
        if order == 0 || order % 2 == 0 {
            return Err(QksdError::InvalidInput(format!(
                "Krylov order must be odd and positive, got {order}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(QksdError::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { order, dt })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Symmetric index grid `-⌊n/2⌋ ..= ⌊n/2⌋`.
    pub fn grid(&self) -> Vec<i64> {
        let half = (self.order / 2) as i64;
        (-half..=half).collect()
    }
}

/// `Δt = π / ‖H‖_β`.
pub fn default_time_step(partition: &UnitaryPartition) -> Result<f64> {
    time_step_for_span(partition.beta_norm())
}

/// `Δt = π / span` for an explicit spectral-span estimate.
pub fn time_step_for_span(span: f64) -> Result<f64> {
    if !(span.is_finite() && span > 0.0) {
        return Err(QksdError::InvalidInput(format!(
            "time step needs a positive norm, got {span}"
        )));
    }
    Ok(PI / span)
}

/// How basis states are propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagatorSource {
    Exact,
    /// First-order Trotter with `steps` product steps per `Δt`.
    Trotter { steps: usize },
}

/// `h_k = ⟨φ_0|H|φ_k⟩` and `s_k = ⟨φ_0|φ_k⟩`, `k = 0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrylovSequences {
    pub h: Vec<Complex64>,
    pub s: Vec<Complex64>,
}

/// Projected pair on the Krylov basis.
#[derive(Debug, Clone)]
pub struct KrylovPair {
    pub h: CMatrix,
    pub s: CMatrix,
    pub construction: Construction,
    pub config: KrylovConfig,
}

/// Basis states `φ_k`, `k = 0..n`.
pub fn krylov_basis(
    h: &PauliSum,
    spectrum: &Spectrum,
    reference: &CVector,
    config: &KrylovConfig,
    source: PropagatorSource,
) -> Result<Vec<CVector>> {
    if reference.len() != spectrum.dim() {
        return Err(QksdError::DimensionMismatch {
            expected: spectrum.dim(),
            found: reference.len(),
        });
    }
    if (reference.norm() - 1.0).abs() > 1e-10 {
        return Err(QksdError::InvalidInput("reference state must have unit norm".into()));
    }
    let step = match source {
        PropagatorSource::Exact => exact_propagator(spectrum, config.dt()),
        PropagatorSource::Trotter { steps } => trotter_propagator(h, config.dt(), steps)?,
    };
    let mut states = Vec::with_capacity(config.order());
    let mut current = reference.clone();
    for _ in 0..config.order() {
        let next = step.apply(&current);
        states.push(std::mem::replace(&mut current, next));
    }
    Ok(states)
}

/// Sequences computed from basis states and the dense Hamiltonian.
pub fn exact_sequences(h_dense: &CMatrix, basis: &[CVector]) -> KrylovSequences {
    let phi0 = &basis[0];
    let h_phi0 = h_dense * phi0;
    let mut h = Vec::with_capacity(basis.len());
    let mut s = Vec::with_capacity(basis.len());
    for (k, phi) in basis.iter().enumerate() {
        let mut hk = inner(&h_phi0, phi);
        let mut sk = inner(phi0, phi);
        if k == 0 {
            // exact by normalization and Hermiticity
            hk = Complex64::new(hk.re, 0.0);
            sk = Complex64::new(1.0, 0.0);
        }
        h.push(hk);
        s.push(sk);
    }
    KrylovSequences { h, s }
}

/// Hermitian Toeplitz matrix with first row `seq` (`M_kl = seq[l-k]`, `l ≥ k`).
pub fn toeplitz_from_sequence(seq: &[Complex64]) -> CMatrix {
    let n = seq.len();
    CMatrix::from_fn(n, n, |k, l| if l >= k { seq[l - k] } else { seq[k - l].conj() })
}

impl KrylovPair {
    /// `H_kl = h_{l-k}`, `S_kl = s_{l-k}` with conjugate extension below
    /// the diagonal.
    pub fn toeplitz(sequences: &KrylovSequences, config: KrylovConfig) -> Result<Self> {
        let n = config.order();
        for len in [sequences.h.len(), sequences.s.len()] {
            if len != n {
                return Err(QksdError::DimensionMismatch { expected: n, found: len });
            }
        }
        Ok(Self {
            h: toeplitz_from_sequence(&sequences.h),
            s: toeplitz_from_sequence(&sequences.s),
            construction: Construction::Toeplitz,
            config,
        })
    }

    /// `H_kl = ⟨φ_k|H|φ_l⟩` elementwise; `S` keeps its Toeplitz form.
    pub fn non_toeplitz(h_dense: &CMatrix, basis: &[CVector], config: KrylovConfig) -> Result<Self> {
        let n = config.order();
        if basis.len() != n {
            return Err(QksdError::DimensionMismatch { expected: n, found: basis.len() });
        }
        let h_basis: Vec<CVector> = basis.iter().map(|phi| h_dense * phi).collect();
        let mut h = CMatrix::zeros(n, n);
        for k in 0..n {
            h[(k, k)] = Complex64::new(inner(&basis[k], &h_basis[k]).re, 0.0);
            for l in (k + 1)..n {
                let v = inner(&basis[k], &h_basis[l]);
                h[(k, l)] = v;
                h[(l, k)] = v.conj();
            }
        }
        let seq = exact_sequences(h_dense, basis);
        Ok(Self {
            h,
            s: toeplitz_from_sequence(&seq.s),
            construction: Construction::NonToeplitz,
            config,
        })
    }

    pub fn order(&self) -> usize {
        self.config.order()
    }
}

/// Everything the sampler needs: the exact pair in both constructions plus
/// the per-fragment overlaps that serve as Hadamard-test expectations.
#[derive(Debug, Clone)]
pub struct KrylovProblem {
    pub config: KrylovConfig,
    pub source: PropagatorSource,
    /// Partition weights `β_j`.
    pub betas: Vec<f64>,
    pub beta_norm: f64,
    pub identity_offset: f64,
    pub sequences: KrylovSequences,
    /// `[j][k] = ⟨φ_0|Û_j|φ_k⟩`.
    pub toeplitz_overlaps: Vec<Vec<Complex64>>,
    /// `[j][(k, l)] = ⟨φ_k|Û_j|φ_l⟩`.
    pub pair_overlaps: Vec<CMatrix>,
    pub toeplitz: KrylovPair,
    pub non_toeplitz: KrylovPair,
}

impl KrylovProblem {
    pub fn build(
        h: &PauliSum,
        partition: &UnitaryPartition,
        reference: &CVector,
        config: KrylovConfig,
        source: PropagatorSource,
    ) -> Result<Self> {
        let h_dense = h.to_dense()?;
        let spectrum = Spectrum::from_dense(&h_dense);
        let basis = krylov_basis(h, &spectrum, reference, &config, source)?;
        Self::from_basis(&h_dense, partition, &basis, config, source)
    }

    pub fn from_basis(
        h_dense: &CMatrix,
        partition: &UnitaryPartition,
        basis: &[CVector],
        config: KrylovConfig,
        source: PropagatorSource,
    ) -> Result<Self> {
        let n = config.order();
        let sequences = exact_sequences(h_dense, basis);
        let unitaries = partition.dense_unitaries()?;
        let mut toeplitz_overlaps = Vec::with_capacity(unitaries.len());
        let mut pair_overlaps = Vec::with_capacity(unitaries.len());
        for u in &unitaries {
            let u_basis: Vec<CVector> = basis.iter().map(|phi| u * phi).collect();
            let mut m = CMatrix::from_element(n, n, ZERO);
            for k in 0..n {
                for l in 0..n {
                    m[(k, l)] = inner(&basis[k], &u_basis[l]);
                }
            }
            toeplitz_overlaps.push((0..n).map(|k| m[(0, k)]).collect());
            pair_overlaps.push(m);
        }
        let toeplitz = KrylovPair::toeplitz(&sequences, config)?;
        let non_toeplitz = KrylovPair::non_toeplitz(h_dense, basis, config)?;
        Ok(Self {
            config,
            source,
            betas: partition.betas(),
            beta_norm: partition.beta_norm(),
            identity_offset: partition.identity_offset(),
            sequences,
            toeplitz_overlaps,
            pair_overlaps,
            toeplitz,
            non_toeplitz,
        })
    }

    pub fn order(&self) -> usize {
        self.config.order()
    }

    pub fn pair(&self, construction: Construction) -> &KrylovPair {
        match construction {
            Construction::Toeplitz => &self.toeplitz,
            Construction::NonToeplitz => &self.non_toeplitz,
        }
    }
}

/// `⟨φ_0|H|φ_0⟩` for a dense Hamiltonian.
pub fn reference_energy(h_dense: &CMatrix, reference: &CVector) -> f64 {
    sandwich(reference, h_dense, reference).re
}
