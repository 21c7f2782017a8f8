use thiserror::Error;

/// Errors raised by the estimation, fitting and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate sample: the maximum likelihood estimate needs at least two distinct observations")]
    DegenerateSample,
    #[error("empty sample")]
    EmptySample,
    #[error("solver did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("quantile level {0} is outside (0, 1)")]
    QuantileOutOfRange(f64),
    #[error("adaptive quadrature did not converge (estimated error {0:e})")]
    QuadratureFailure(f64),
    #[error("empty support: center {center} lies outside the data range [{low}, {high}]")]
    EmptySupport { center: f64, low: f64, high: f64 },
    #[error("smoothing bandwidth is not positive (sample variance minus fitted variance = {0:e})")]
    NonPositiveBandwidth(f64),
    #[error("estimated Fisher information is zero")]
    ZeroInformation,
    #[error("median absolute deviation is zero")]
    ZeroMad,
    #[error("no tuning entry for {0}")]
    MissingEntry(String),
    #[error("Fisher information of {0} is infinite")]
    InfiniteInformation(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
