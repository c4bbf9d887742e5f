use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("degenerate combination: θ₁ − θ₂ + θ₃ vanishes")]
    DegenerateCombination,

    #[error("degenerate direction: every projection ⟨x, θ⟩ is zero")]
    DegenerateDirection,

    #[error(
        "combinatorial budget exceeded: {distinct} distinct directions in dimension {dim} \
         (limit {max_directions} directions, dimension {max_dim}); use a sampled variant"
    )]
    BudgetExceeded {
        distinct: usize,
        dim: usize,
        max_directions: usize,
        max_dim: usize,
    },

    #[error("selection impossible: {0}")]
    SelectionImpossible(String),

    #[error("dimension too small: {0}")]
    DimensionTooSmall(String),

    #[error("θ₃ resampling failed after {0} attempts")]
    ResamplingFailed(usize),

    #[error("insufficient tail: {0} grid points with positive tail, need at least 3")]
    InsufficientTail(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
