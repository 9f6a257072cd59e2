use thiserror::Error;

pub type Result<T> = std::result::Result<T, QksdError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QksdError {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dense representation of {qubits} qubits exceeds the cap of {cap}")]
    ResourceLimit { qubits: usize, cap: usize },

    #[error("invalid filling ({n_up}, {n_down}) for {sites} sites")]
    InvalidFilling {
        sites: usize,
        n_up: usize,
        n_down: usize,
    },

    #[error("budget of {budget} shots cannot cover {required} required configurations")]
    InfeasibleBudget { budget: u64, required: u64 },

    #[error("value {0} is outside [-1, 1] and cannot be a Hadamard-test expectation")]
    InvalidProbability(f64),

    #[error("single-qubit fidelity {0} must lie in (0, 1]")]
    InvalidFidelity(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no overlap eigenvalue exceeds the threshold {epsilon:e}")]
    EmptyBasis { epsilon: f64 },

    #[error("ill-posed generalized eigenproblem: {0}")]
    IllPosed(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QksdError {
    fn from(err: std::io::Error) -> Self {
        QksdError::Io(err.to_string())
    }
}

impl From<csv::Error> for QksdError {
    fn from(err: csv::Error) -> Self {
        QksdError::Io(err.to_string())
    }
}
