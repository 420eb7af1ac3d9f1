use thiserror::Error;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("assumption violated ({condition}): {detail}")]
    AssumptionViolation {
        condition: &'static str,
        detail: String,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error(
        "grid does not resolve the oscillation: h = {h:.4e} exceeds eps/8 = {limit:.4e}; \
         at least n = {required_n} cells per side are required"
    )]
    Resolution { h: f64, limit: f64, required_n: usize },

    #[error("solver stopped after {iterations} iterations with relative residual {residual:.3e}")]
    Solver { iterations: usize, residual: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
