//! Sampling-error analysis for quantum Krylov subspace diagonalization.
//!
//! Builds Fermi-Hubbard Hamiltonians as Pauli sums, projects them onto
//! real-time Krylov bases, simulates Hadamard-test sampling under optimal shot
//! allocation, and evaluates the thresholded generalized eigenproblem against
//! closed-form error bounds.

pub mod bounds;
pub mod error;
pub mod evolution;
pub mod gevp;
pub mod hamiltonian;
pub mod harness;
pub mod krylov;
pub mod linalg;
pub mod sampling;

pub use error::{QksdError, Result};
