use thiserror::Error;

pub type Result<T> = std::result::Result<T, VaError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VaError {
    /// A point or parameter lies outside the set on which a function is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scenario, grid or plan failed validation. `field` is a dotted path.
    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },

    /// The requested operation needs time-only fee/charge (or similar) inputs.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Moment matching produced a negative transition rate.
    #[error("grid too coarse: negative transition rate at node {node} (x = {x}); try M >= {suggested_m}")]
    GridTooCoarse {
        node: usize,
        x: f64,
        suggested_m: usize,
    },

    #[error("PSOR did not converge at t = {t} after {iterations} iterations (last residual {residual:e})")]
    SolverDivergence {
        t: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("missing boundary: {0}")]
    MissingBoundary(String),
}

impl VaError {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        VaError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
