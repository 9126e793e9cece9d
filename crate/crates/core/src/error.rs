use thiserror::Error;

/// Errors produced anywhere in the reduction toolchain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not unitary (||U^dag U - I||_F = {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("repeated qubit index {0} in gate operands")]
    RepeatedQubit(usize),

    #[error("gate set config line {line}: {msg}")]
    GateSetConfig { line: usize, msg: String },

    #[error("circuit line {line}: {msg}")]
    CircuitParse { line: usize, msg: String },

    #[error("circuit of length {len} is shorter than the minimum block length {min}")]
    CircuitTooShort { len: usize, min: usize },

    #[error("no gate in the set can be placed on {0} qubit(s)")]
    NoApplicableToken(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("gate set fingerprint mismatch: file has {found:016x}, loaded gate set has {expected:016x}")]
    FingerprintMismatch { expected: u64, found: u64 },

    #[error("database format: {0}")]
    DatabaseFormat(String),

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("graph exceeds node cap of {0}")]
    NodeCapExceeded(usize),

    #[error("training data: {0}")]
    Training(String),

    #[error("equivalence verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
