use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("qubit index {0} listed more than once")]
    DuplicateQubit(usize),

    #[error("register budget exceeded: {requested} qubits requested, limit is {limit}")]
    RegisterBudget { requested: usize, limit: usize },

    #[error("instance promise violated: {0}")]
    Promise(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no polynomial of degree <= {cap} reaches error {requested:e}; best achievable {achieved:e}")]
    DegreeCap {
        cap: usize,
        requested: f64,
        achieved: f64,
    },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn promise(msg: impl Into<String>) -> Self {
        Error::Promise(msg.into())
    }
}
