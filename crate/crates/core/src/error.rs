use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("critical divergence: lambda = {lambda} within tolerance of critical coupling {critical}")]
    CriticalDivergence { lambda: f64, critical: f64 },
    #[error("phase is unidentifiable at zero force")]
    PhaseUnidentifiable,
    #[error("displacement radicand is negative ({0})")]
    NegativeRadicand(f64),
    #[error("covariance depends on the estimated parameters (deviation {0:e})")]
    ParameterDependentCovariance(f64),
    #[error("singular matrix: {0}")]
    Singular(&'static str),
    #[error("drift matrix is not Hurwitz (max real part {0:e})")]
    NonHurwitz(f64),
    #[error("steady state is not unique (solutions differ by {0:e})")]
    NonUniqueSteadyState(f64),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("memory budget exceeded: {needed} superoperator entries > {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("truncation unsafe: Fock tail mass {0:e}")]
    TruncationUnsafe(f64),
    #[error("ill-conditioned SLD solve (dropped weight {0:e})")]
    IllConditioned(f64),
    #[error("finite-difference mismatch {0:e}")]
    DerivativeMismatch(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
