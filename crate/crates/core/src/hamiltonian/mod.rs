//! Fermi–Hubbard Hamiltonians as Pauli sums and their anticommuting
//! unitary partitions.

pub mod hubbard;
pub mod jordan_wigner;
pub mod partition;
pub mod pauli;

pub use hubbard::{build_hopping_1d, build_hubbard_1d, mode_index, Spin};
pub use jordan_wigner::{annihilation, creation, number, PauliOperator};
pub use partition::{sorted_insertion_partition, Fragment, UnitaryPartition};
pub use pauli::{Pauli, PauliString, PauliSum, DEFAULT_DENSE_QUBIT_CAP};

/// Dense matrix of a Pauli sum, with an explicit qubit cap.
pub fn pauli_to_dense(h: &PauliSum, cap: usize) -> crate::error::Result<crate::linalg::CMatrix> {
    h.to_dense_capped(cap)
}
