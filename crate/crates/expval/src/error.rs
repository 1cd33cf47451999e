//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode list is empty")]
    EmptyModeList,
    #[error("mode dimension {dim} must be at least 2")]
    ModeDimTooSmall { dim: usize },
    #[error("total dimension {total} exceeds the cap {cap}")]
    DimensionCapExceeded { total: usize, cap: usize },
    #[error("mode index {mode} out of range for {n_modes} modes")]
    InvalidMode { mode: usize, n_modes: usize },
    #[error("occupation {occupation} out of range for mode {mode} (dim {dim})")]
    OccupationOutOfRange { mode: usize, occupation: usize, dim: usize },
    #[error("operands live on different spaces ({left:?} vs {right:?})")]
    SpaceMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("matrix shape {rows}x{cols} does not match space dimension {dim}")]
    ShapeMismatch { rows: usize, cols: usize, dim: usize },
    #[error("operator is not Hermitian (defect {defect:.3e} exceeds {tolerance:.1e})")]
    NonHermitian { defect: f64, tolerance: f64 },
    #[error("state vector has zero norm")]
    ZeroNormState,
    #[error("operator basis is empty")]
    EmptyBasis,
    #[error("basis Gram matrix is numerically singular (condition {condition:.3e})")]
    IllConditionedBasis { condition: f64 },
    #[error("slice grid must contain at least one slice")]
    ZeroSlices,
    #[error("horizon must be positive and finite, got {horizon}")]
    BadHorizon { horizon: f64 },
    #[error("propagator lost unitarity: defect {defect:.3e} exceeds {tolerance:.1e}")]
    UnitarityLost { defect: f64, tolerance: f64 },
    #[error("time {t} outside the spec's validity window [0, {horizon}]")]
    HorizonExceeded { t: f64, horizon: f64 },
    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),
    #[error("series order {requested} exceeds the cap {cap}")]
    OrderCapExceeded { requested: usize, cap: usize },
    #[error("order must be at least 1")]
    ZeroOrder,
    #[error("commutator closure violated: residual {residual:.3e} exceeds {tolerance:.1e} at t = {time}")]
    ClosureViolated { residual: f64, tolerance: f64, time: f64 },
    #[error("observable lies outside the basis span (residual {residual:.3e})")]
    OutsideSpan { residual: f64 },
    #[error("scenario configuration invalid: {0}")]
    InvalidScenario(String),
    #[error("nested-commutator pattern needs at least 2 symbols, got {0}")]
    TooFewSymbols(usize),
    #[error("duplicate symbol '{0}' in nested-commutator pattern")]
    DuplicateSymbol(char),
    #[error("finite-difference step {dt_fd} incompatible with horizon {t}: {reason}")]
    BadFiniteDifferenceStep { dt_fd: f64, t: f64, reason: String },
    #[error("unknown suite '{0}' (expected linearity, scaling, closure or distinctness)")]
    UnknownSuite(String),
    #[error("experiment config invalid: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
