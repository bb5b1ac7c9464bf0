use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index sets do not cover [1, {n}]: missing {missing:?}")]
    IndexSetCover { n: usize, missing: Vec<usize> },

    #[error("part {part}: {what} has a nonzero at ({row}, {col}) outside its index set")]
    SupportViolation {
        part: usize,
        what: &'static str,
        row: usize,
        col: usize,
    },

    #[error("reassembly mismatch: {0}")]
    ReassemblyMismatch(String),

    #[error("input is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("interface system is inconsistent for part {part} (residual {residual:.3e})")]
    InconsistentSystem { part: usize, residual: f64 },

    #[error("relaxation order {r} is too small (needs at least {r_min})")]
    DegreeOverflow { r: u32, r_min: u32 },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no solver backend available: {0}")]
    BackendUnavailable(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("zero-length element {0}")]
    ZeroLength(usize),

    #[error("structure is a mechanism: stiffness matrix singular at unit design")]
    MechanismDetected,

    #[error("invalid partition: {0}")]
    PartitionInvalid(String),

    #[error("candidate design is infeasible: {0}")]
    InfeasibleCandidate(String),

    #[error("lower bound must be positive, got {0}")]
    NonpositiveLowerBound(f64),

    #[error("invalid model: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
