use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown activation `{0}`")]
    UnknownActivation(String),

    #[error("invalid activation parameter in `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("activation is not square-integrable under the Gaussian measure")]
    NotSquareIntegrable,

    #[error("degenerate activation `{0}`: all energy sits in the constant term")]
    DegenerateActivation(String),

    #[error("fixed-point analysis requires a nonlinear activation, `{0}` is linear")]
    LinearActivation(String),

    #[error("internal inconsistency: kappa(rho) - rho has no sign change on [0, {upper}]")]
    NoBracket { upper: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("kernel ODE integration failed: non-finite state after t = {last_valid_t}")]
    IntegrationFailure { last_valid_t: f64 },

    #[error("degenerate trial: zero-variance vector in a normalization layer")]
    DegenerateTrial,

    #[error("{degenerate} of {trials} trials were degenerate (limit is 1%)")]
    TooManyDegenerateTrials { degenerate: usize, trials: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::UnknownActivation(_)
                | Error::InvalidParameter { .. }
                | Error::Domain(_)
                | Error::InvalidConfig(_)
                | Error::LinearActivation(_)
        )
    }
}
