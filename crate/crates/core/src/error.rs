use thiserror::Error;

/// Errors raised by ingestion, solvers and reporting.
#[derive(Debug, Error)]
pub enum SccaError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid state: {0}")]
    State(String),

    /// Every coordinate of a direction was thresholded out.
    ///
    /// `last_iterate` holds the iterate that produced the empty update, when
    /// there was one.
    #[error("empty support: {context}")]
    EmptySupport {
        context: String,
        last_iterate: Option<Vec<f64>>,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("singular matrix: {0}")]
    Singularity(String),

    #[error("indefinite matrix: {0}")]
    IndefiniteMatrix(String),

    #[error("solution has {found} factor(s), {required} required")]
    InsufficientFactors { found: usize, required: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SccaError {
    pub fn empty_support(context: impl Into<String>) -> Self {
        SccaError::EmptySupport {
            context: context.into(),
            last_iterate: None,
        }
    }

    /// Prefixes the context of an `EmptySupport` error, leaving other
    /// variants untouched.
    pub fn with_side(self, side: &str) -> Self {
        match self {
            SccaError::EmptySupport { context, last_iterate } => SccaError::EmptySupport {
                context: format!("{side}: {context}"),
                last_iterate,
            },
            other => other,
        }
    }

    pub fn is_empty_support(&self) -> bool {
        matches!(self, SccaError::EmptySupport { .. })
    }
}

pub type Result<T> = std::result::Result<T, SccaError>;
