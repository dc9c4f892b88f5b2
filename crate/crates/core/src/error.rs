use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two nodes that share a link sit at the same coordinates.
    #[error("degenerate geometry: {0} are co-located")]
    DegenerateGeometry(String),

    /// A scenario field violates its invariant.
    #[error("invalid scenario: `{key}` {reason}")]
    InvalidScenario { key: &'static str, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The best-response validation of the equilibrium did not settle.
    #[error("best-response iteration did not converge within {iterations} iterations (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64 },

    #[error("scenario file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
