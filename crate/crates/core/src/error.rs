use thiserror::Error;

/// Errors raised by the analyses. Variants split into validation problems
/// (bad inputs, violated preconditions) and numerical failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("adaptive quadrature hit max depth: estimate {estimate}, error bound {error_bound}")]
    QuadratureDepth { estimate: f64, error_bound: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("conformal factor lost positivity at t = {time} (node {node}); last good profile kept")]
    PositivityLoss {
        time: f64,
        node: usize,
        last_good: Vec<f64>,
    },

    #[error("time step {dt} exceeds the stability limit {limit}")]
    UnstableStep { dt: f64, limit: f64 },

    #[error("theta = {theta} is not a critical point of the area profile (residual {residual})")]
    NotCritical { theta: f64, residual: f64 },

    #[error("measure is not in the cone hull of the family; check it with cone_hull_membership first")]
    NotAMember,

    #[error("family is not structured: {0}")]
    Unstructured(String),
}

impl Error {
    /// Numerical failures as opposed to validation errors.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureDepth { .. }
                | Error::NonFinite(_)
                | Error::PositivityLoss { .. }
                | Error::UnstableStep { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
