//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide error enumeration.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("matrix is not Hermitian: residual {residual:.3e} exceeds {allowed:.3e}")]
    NotHermitian { residual: f64, allowed: f64 },

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:.3e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is numerically singular: min eigenvalue {min_eigenvalue:.3e} below cutoff {cutoff:.3e}")]
    Singular { min_eigenvalue: f64, cutoff: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid Markov matrix: {0}")]
    InvalidKernel(String),

    #[error("bad partition: {0}")]
    BadPartition(String),

    #[error("bad restriction basis: {0}")]
    BadBasis(String),

    #[error("subset enumeration over {n} outcomes would visit 2^{n} subsets; enable sampling")]
    SubsetBlowup { n: usize },

    #[error("operation requires a rank-1 POVM")]
    NotRank1,

    #[error("operation requires a projection valued measure")]
    NotPvm,

    #[error("channel is not unital: residual {0:.3e}")]
    NotUnital(f64),

    #[error("target must vanish wherever the PVM vanishes: {0}")]
    AbsoluteContinuityViolated(String),

    #[error("invalid posterior states: {0}")]
    BadStates(String),

    #[error("invalid instrument: {0}")]
    InvalidInstrument(String),

    #[error("joint observable margin mismatch: residual {0:.3e}")]
    MarginMismatch(f64),

    #[error("block reconstruction residual {0:.3e} exceeds tolerance; joint is not realizable")]
    BlockResidual(f64),

    #[error("operation requires an extreme POVM")]
    NotExtreme,

    #[error("margins admit no joint observable: infeasibility {0:.3e}")]
    NotJointlyMeasurable(f64),

    #[error("infeasible rank request: {0}")]
    InfeasibleRanks(String),

    #[error("frame operator is singular; the configured vectors do not span the space")]
    SingularS,

    #[error("clean decomposition residual {0:.3e}; eigenvalue-1 threshold and tolerances are inconsistent")]
    DecompositionResidual(f64),

    #[error("tolerances must be positive: {0}")]
    BadTolerances(String),

    #[error("unsupported schema version {0}; this build reads version 1")]
    UnsupportedSchemaVersion(u32),
}

pub type Result<T> = std::result::Result<T, Error>;
