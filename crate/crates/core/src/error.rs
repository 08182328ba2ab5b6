use crate::fock::Statistics;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("fermionic basis requires k <= q, got q={q}, k={k}")]
    EmptyFermiBasis { q: u32, k: u32 },

    #[error("invalid basis parameters q={q}, k={k}")]
    InvalidBasis { q: u32, k: u32 },

    #[error("label {label} outside 1..={q}")]
    LabelOutOfRange { label: u32, q: u32 },

    #[error("labels {labels:?} not ordered for {statistics:?} statistics")]
    UnorderedIndexSet {
        labels: Vec<u32>,
        statistics: Statistics,
    },

    #[error("mismatched single-particle dimensions: {left} vs {right}")]
    QMismatch { left: u32, right: u32 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("incompatible bases: {context}")]
    BasisMismatch { context: String },

    #[error("matrix not Hermitian: max asymmetry {max_asymmetry:.6e}")]
    NonHermitian { max_asymmetry: f64 },

    #[error("matrix has a non-finite entry")]
    NonFinite,

    #[error("matrix has no elements")]
    EmptyMatrix,

    #[error("matrix not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("tolerance policy values must be positive")]
    InvalidTolerance,

    #[error("invalid projector parameters: q={q}, n={n}, m={m} ({reason})")]
    InvalidProjector { q: u32, n: u32, m: u32, reason: String },

    #[error("particle sector m={m} outside 1..={n}")]
    InvalidSector { m: u32, n: u32 },

    #[error("state norm {norm:.6e} not acceptable: {reason}")]
    InvalidStateNorm { norm: f64, reason: String },

    #[error("invalid Hubbard filling: {electrons} electrons on {sites} sites")]
    InvalidFilling { electrons: usize, sites: usize },

    #[error("size cap exceeded: {context}")]
    SizeCap { context: String },

    #[error("cokernel is trivial (dim 0); nothing to recover")]
    TrivialCokernel,

    #[error(
        "infeasible shape: {rows} rows > {cols} columns (2N >= N_A^2 fails); \
         use the excess metric instead"
    )]
    InfeasibleShape { rows: usize, cols: usize },

    #[error("minor sample count must be >= 1")]
    EmptySample,

    #[error("orbitals not orthonormal: max Gram deviation {deviation:.6e}")]
    NonOrthonormalOrbitals { deviation: f64 },

    #[error("orbital vector is numerically zero")]
    ZeroOrbital,

    #[error("Jacobians built from different states; span test needs the same state")]
    StateMismatch,

    #[error("infeasible product rank r={r} for q={q}, n={n}")]
    InfeasibleRank { r: u32, q: u32, n: u32 },

    #[error("rank-1 stratum check failed: expected coker dim {expected}, measured {got}")]
    StrataMismatch { expected: usize, got: usize },

    #[error("family parameters: expected {expected} values, got {got}")]
    ParameterMismatch { expected: usize, got: usize },

    #[error("energy has a non-negligible imaginary part {imaginary:.6e}")]
    EnergyNotReal { imaginary: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
