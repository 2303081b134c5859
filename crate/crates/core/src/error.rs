use thiserror::Error;

/// Errors raised by dictionary, regression, analysis and I/O routines.
#[derive(Debug, Error)]
pub enum SillError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("mode mismatch: expected {expected}, found {found}")]
    ModeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty snapshot set")]
    EmptySnapshots,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("index {index} out of range for {len} dictionary logistics")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("total-order precondition violated: logistics are incomparable under orthant domination")]
    Incomparable,

    #[error("point {point} lies within {distance:e} of a center hyperplane (required separation {delta:e})")]
    OnHyperplane {
        point: usize,
        distance: f64,
        delta: f64,
    },

    #[error("product density is singular at z = 0")]
    SingularPoint,

    #[error("quadrature did not converge after {panels} panels (last change {change:e})")]
    QuadratureNonConvergence { panels: usize, change: f64 },

    #[error("{count} trajectory(ies) diverged")]
    Diverged { count: usize },

    #[error("linear solve failed: {0}")]
    Solve(&'static str),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl SillError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SillError::QuadratureNonConvergence { .. } | SillError::Solve(_) | SillError::Diverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, SillError>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(SillError::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}
