use thiserror::Error;

/// Errors produced by the simulation, optimization and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{qubits} qubits exceeds the supported limit of {limit}")]
    ResourceLimit { qubits: usize, limit: usize },

    #[error("term {term} anticommutes with symmetry Z{qubit}")]
    SymmetryViolation { term: String, qubit: usize },

    #[error("unsupported Pauli label {label} in term {term}")]
    UnsupportedLabel { label: char, term: String },

    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    #[error("Kraus operators are not trace preserving (deviation {deviation:.3e})")]
    NotTracePreserving { deviation: f64 },

    #[error("operation requires a density-matrix state")]
    RequiresMixed,

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("calibration {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("calibration schema: {0}")]
    Schema(String),

    #[error("no calibration entry for gate kind `{0}`")]
    UnknownGate(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("no records to summarize")]
    EmptyRecords,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
