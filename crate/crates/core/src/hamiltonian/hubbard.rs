use super::jordan_wigner::{annihilation, creation, number, PauliOperator};
use super::pauli::PauliSum;
use crate::error::{QksdError, Result};
use crate::linalg::ONE;

/// Spin label of a Hubbard mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

/// Qubit carrying site `site` with `spin` (interleaved ordering).
pub fn mode_index(site: usize, spin: Spin) -> usize {
    match spin {
        Spin::Up => 2 * site,
        Spin::Down => 2 * site + 1,
    }
}

/// Open-chain 1D spinful Fermi–Hubbard model
/// `-t Σ_{i,σ} (a†_{iσ} a_{i+1,σ} + h.c.) + u Σ_i n_{i↑} n_{i↓}`
/// mapped to `2L` qubits by Jordan–Wigner.
pub fn build_hubbard_1d(sites: usize, hopping: f64, onsite: f64) -> Result<PauliSum> {
    if sites == 0 {
        return Err(QksdError::InvalidSize("Hubbard chain needs at least one site".into()));
    }
    let n_qubits = 2 * sites;
    let mut op = PauliOperator::zero(n_qubits);
    for i in 0..sites.saturating_sub(1) {
        for spin in [Spin::Up, Spin::Down] {
            let p = mode_index(i, spin);
            let q = mode_index(i + 1, spin);
            let forward = &creation(p, n_qubits) * &annihilation(q, n_qubits);
            let backward = forward.adjoint();
            op = op + (forward + backward).scale(ONE.scale(-hopping));
        }
    }
    for i in 0..sites {
        let up = number(mode_index(i, Spin::Up), n_qubits);
        let down = number(mode_index(i, Spin::Down), n_qubits);
        op = op + (&up * &down).scale(ONE.scale(onsite));
    }
    op.to_pauli_sum(1e-12)
}

/// Hopping part only (`u = 0`).
pub fn build_hopping_1d(sites: usize, hopping: f64) -> Result<PauliSum> {
    build_hubbard_1d(sites, hopping, 0.0)
}
