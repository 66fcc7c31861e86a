use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate membrane: sigma_m and eps_m are both zero")]
    DegenerateMembrane,

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix is singular to working precision (pivot ratio {pivot_ratio:.3e})")]
    SingularMatrix { pivot_ratio: f64 },

    #[error("no interior maximum on the frequency grid (argmax at index {index} of {len}); widen the grid")]
    NoInteriorMaximum { index: usize, len: usize },

    #[error("rejection budget of {attempts} draws exhausted: {reason}")]
    RejectionBudget { attempts: usize, reason: String },

    #[error("lattice sum truncation tail {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    Truncation { estimate: f64, tolerance: f64 },

    #[error("matrix I - (f/2)M is near singular (|det| = {det:.3e})")]
    NearSingular { det: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
