use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("weights do not form a probability vector: {0}")]
    NotAProbability(String),
    #[error("the measure is the Dirac mass at 0")]
    DiracAtZero,
    #[error("measure is not symmetric: {0}")]
    Asymmetric(String),
    #[error("log-density is not finite at x = {0}")]
    NonFinite(f64),
    #[error("density has zero total mass on the support")]
    ZeroMass,
    #[error("invalid support or resolution: {0}")]
    InvalidSupport(String),
    #[error("quadrature did not reach the requested tolerance (last relative change {0:e})")]
    QuadratureFailure(f64),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("dual solver did not converge at ({x}, {y}, {z}) after {iterations} iterations: {reason}")]
    NoConvergence {
        x: f64,
        y: f64,
        z: f64,
        iterations: usize,
        reason: String,
    },
    #[error("Hessian of the log-Laplace transform is singular")]
    SingularHessian,
    #[error("degenerate measure: covariance determinant a = {0:e} is not positive")]
    DegenerateMeasure(f64),
    #[error("finite-difference stencil leaves the admissible domain: {0}")]
    StepTooLarge(String),
    #[error("could not draw an initial configuration with a nonzero coordinate")]
    InitFailure,
    #[error("exact enumeration too large: {0} multisets")]
    TooLarge(u128),
    #[error("measure is inadmissible: 5 mu4^2 - 2 sigma^2 mu6 = {0:e} <= 0")]
    InadmissibleMeasure(f64),
    #[error("degenerate least-squares fit: {0}")]
    DegenerateFit(String),
    #[error("root polishing failed to reduce the forward-map residual ({0:e})")]
    NumericInstability(f64),
    #[error("sample data does not match the expected schema: {0}")]
    SchemaMismatch(String),
    #[error("i/o failure: {0}")]
    IoFailure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::IoFailure(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
