use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid dose grid: {0}")]
    InvalidGrid(String),

    #[error("no patients treated at the dose being evaluated")]
    NoData,

    #[error("trial is not running (status: {0})")]
    NotRunning(crate::trial::TrialStatus),

    #[error("invalid cohort outcome: {0}")]
    InvalidOutcome(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unsupported beta family Beta({a}, {b}): one shape parameter must equal 1")]
    UnsupportedBetaFamily { a: f64, b: f64 },

    #[error("invalid elicitation input: {0}")]
    InvalidElicitation(String),

    #[error("posterior mass underflowed on every grid point")]
    PosteriorUnderflow,

    #[error("prior optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
