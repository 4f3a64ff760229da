use thiserror::Error;

/// Errors raised while loading, building or solving VNF-PR problems.
#[derive(Debug, Error)]
pub enum Error {
    /// The instance violates a structural invariant. `path` names the offending field.
    #[error("invalid instance at {path}: {message}")]
    InvalidInstance { path: String, message: String },

    /// A model variant or extension set cannot be applied to the instance.
    #[error("incompatible model specification: {0}")]
    Incompatible(String),

    /// Extension rules contradict each other.
    #[error("contradictory placement rules: {0}")]
    Contradiction(String),

    /// The model has coefficients outside the range the solver accepts.
    #[error("numerically unsafe model: {0}")]
    Numeric(String),

    /// Text input (model, solution, instance) could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An imported assignment does not satisfy the model.
    #[error("assignment rejected: constraint {tag} violated by {violation:.3e}")]
    Rejected { tag: String, violation: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// No solution exists, or none was found where one was required.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("pipeline aborted: {0}")]
    Pipeline(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidInstance {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
