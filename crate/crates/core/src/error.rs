use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum CderError {
    #[error("no clouds")]
    NoClouds,

    #[error("empty cloud `{0}`")]
    EmptyCloud(String),

    #[error("invalid collection: {0}")]
    InvalidCollection(String),

    #[error("dimension mismatch: expected {expected}, found {found}{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: Option<String>,
    },

    #[error("non-finite coordinate in cloud `{0}`")]
    NonFinite(String),

    #[error("invalid weight in cloud `{0}`: weights must be positive and finite")]
    InvalidWeight(String),

    #[error("collection is not weighted")]
    Unweighted,

    #[error("theta must lie strictly between 0 and 1, got {0}")]
    InvalidTheta(f64),

    #[error("empty pointset")]
    EmptyPointSet,

    #[error("empty region")]
    EmptyRegion,

    #[error("NaN entropy")]
    NanEntropy,

    #[error("label {0} is not dominant in this region")]
    NotDominant(usize),

    #[error("untrained model")]
    UntrainedModel,

    #[error("cannot stratify: label `{0}` has fewer than {1} clouds")]
    CannotStratify(String, usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CderError {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            CderError::Numerical(_) | CderError::NanEntropy => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = CderError> = std::result::Result<T, E>;
