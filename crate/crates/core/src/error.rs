use thiserror::Error;

use crate::statevector::Pauli;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("basis index {index} out of range for {num_qubits} qubits")]
    BasisIndexOutOfRange { num_qubits: usize, index: usize },

    #[error("qubit {qubit} out of range for {num_qubits}-qubit register")]
    QubitOutOfRange { num_qubits: usize, qubit: usize },

    #[error("qubit {0} listed twice")]
    DuplicateQubit(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("state is not normalized: squared norm {norm_sqr}")]
    NotNormalized { norm_sqr: f64 },

    #[error("amplitude count {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("subsystem is not pure: overlap with best product candidate is {purity}")]
    SubsystemNotPure { purity: f64 },

    #[error("impossible branch: forced outcome has zero probability")]
    ImpossibleBranch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("register of {required} qubits exceeds the maximum of {max}")]
    RegisterTooLarge { required: usize, max: usize },

    #[error("{branches} branches exceed the enumeration budget of {budget}")]
    BudgetExceeded { branches: u64, budget: u64 },

    #[error("forced outcome list does not fit the protocol: {0}")]
    ForcedOutcomes(String),

    #[error("protocol step out of order: {0}")]
    StepOrder(String),

    #[error("oracle found no correction reaching fidelity 1: {0}")]
    ModelFalsified(String),

    #[error("oracle found several inequivalent corrections for {context}: {candidates:?}")]
    Ambiguous {
        context: String,
        candidates: Vec<Vec<Pauli>>,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cannot parse operator '{0}'")]
    Operator(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
