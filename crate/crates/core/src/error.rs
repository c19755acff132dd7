use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({t}, {u}) lies outside [0,1]^2")]
    Domain { t: f64, u: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid quadrature parameters: {0}")]
    InvalidParams(String),

    #[error("integrand is not finite at u = {node}")]
    NonFiniteIntegrand { node: f64 },

    #[error("grid function is bound to a different quadrature rule")]
    RuleMismatch,

    #[error("normalizer (Wf)(0) = {value} is not positive")]
    DegenerateNormalizer { value: f64 },

    #[error("function value at the origin ({value}) is not positive")]
    ZeroAtOrigin { value: f64 },

    #[error("function is not a fixed point of R_k: residual {residual:e} > tolerance {tol:e}")]
    NotAFixedPoint { residual: f64, tol: f64 },

    #[error("negative value {value:e} at node {node}")]
    NegativeValue { node: f64, value: f64 },

    #[error("need k >= 2 and n > k, got k = {k}, n = {n}")]
    InvalidOrder { k: usize, n: usize },

    #[error("no sign change of P_n - Q_n on (0,1) for k = {k}, n = {n}")]
    NoBracket { k: usize, n: usize },

    #[error("root of P_n - Q_n for k = {k}, n = {n} has residual {residual:e} above {tol:e}")]
    RootNotConverged { k: usize, n: usize, residual: f64, tol: f64 },

    #[error("both forms of the coupling denominator lost precision for k = {k}, n = {n}")]
    DenominatorUnderflow { k: usize, n: usize },

    #[error("coupling gamma = {gamma} is not admissible (|gamma| must be < 4)")]
    NotAdmissible { gamma: f64 },

    #[error("the general-k solution needs a construction record")]
    MissingRecord,

    #[error("density normalization failed: {0}")]
    NormalizationFailure(String),

    #[error("stationarity check failed: residual {residual:e} > {tol:e}")]
    StationarityFailure { residual: f64, tol: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
