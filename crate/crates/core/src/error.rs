use thiserror::Error;

/// Errors raised by constructions, flows and checkers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coverage gap: sampled point {point:?} lies in no region")]
    CoverageGap { point: Vec<f64> },

    #[error("point {point:?} is not covered by any cell")]
    NotCovered { point: Vec<f64> },

    #[error("rejection sampling found no point in cell {cell} after {attempts} attempts")]
    EmptyRegion { cell: usize, attempts: usize },

    #[error("trajectory left the state space at t = {t}: {point:?}")]
    Divergence { t: f64, point: Vec<f64> },

    #[error("contraction certificate failed (worst margin {worst_margin:e})")]
    NotContractive { worst_margin: f64 },

    #[error("discrete system is not tagged as an over-approximation")]
    NotOverApproximation,

    #[error("too many unresolved limit classifications: {fraction:.4} > {threshold:.4}")]
    TooManyUnresolved { fraction: f64, threshold: f64 },

    #[error("order violation: both ({i}, {j}) and ({j}, {i}) witnessed")]
    OrderViolation { i: usize, j: usize },

    #[error("no point of the level set V = {level} found in the state space")]
    LevelSetEmpty { level: f64 },

    #[error("no admissible chain from cell {cell:?} at t = {t}")]
    NoAdmissibleChain { cell: Vec<usize>, t: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("expression error: {0}")]
    Expr(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
