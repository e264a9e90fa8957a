use thiserror::Error;

/// Errors raised by the design engine.
///
/// The variants map onto the three failure classes the command line and the
/// service distinguish: bad input (`Spec`, `Domain`, `Usage`), infeasible
/// designs (`Infeasible`) and numerical failures (`Numeric`, `Precision`).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the model's natural parameter space.
    #[error("domain error: {0}")]
    Domain(String),

    /// A specification document violates a structural or range constraint.
    #[error("invalid specification{}: {message}", field.as_ref().map(|f| format!(" (field `{f}`)")).unwrap_or_default())]
    Spec {
        field: Option<String>,
        message: String,
    },

    /// An operation was invoked in a state where it is not defined.
    #[error("usage error: {0}")]
    Usage(String),

    /// No design or threshold satisfies the requested constraints.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// An iterative numerical routine failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The requested accuracy is beyond what the chosen method can deliver.
    #[error("insufficient precision: {0}")]
    Precision(String),
}

impl Error {
    pub fn spec(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Spec {
            field: Some(field.into()),
            message: message.into(),
        }
    }

    /// Stable machine-readable code used in JSON error documents.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Spec { .. } => "schema",
            Error::Usage(_) => "usage",
            Error::Infeasible(_) => "infeasible",
            Error::Numeric(_) => "numeric",
            Error::Precision(_) => "precision",
        }
    }

    /// Offending field, when the error can be pinned to one.
    pub fn field(&self) -> Option<&str> {
        match self {
            Error::Spec { field, .. } => field.as_deref(),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
