use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A problem document violated the input schema. Always names the field.
    #[error("schema violation in `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("linear program exceeds the {cap}-variable cap ({got} variables)")]
    DimensionOverflow { cap: usize, got: usize },

    #[error("simplex cycling guard tripped after {pivots} pivots")]
    CyclingGuard { pivots: usize },

    #[error("farkas certificate requested for a feasible program")]
    FeasibleProgram,

    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: &'static str, detail: String },

    #[error("oracle returned a non-finite value: {0}")]
    NonFinite(String),

    #[error("instance fingerprints differ: {left} vs {right}")]
    FingerprintMismatch { left: String, right: String },

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
