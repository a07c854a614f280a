use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("trajectory left the field domain at t = {t}, |x| = {x_norm}")]
    DomainExceeded { t: f64, x_norm: f64 },

    #[error("ODE local error {estimate:e} exceeds tolerance {tolerance:e}")]
    ToleranceNotMet { estimate: f64, tolerance: f64 },

    #[error("direction is not a unit vector (|omega| = {0})")]
    NonUnitDirection(f64),

    #[error("density is nonzero ({value:e}) on the momentum quadrature boundary")]
    QuadratureDomainViolation { value: f64 },

    #[error("reduction is singular at |x| = 0; use the radial formula")]
    SingularAtOrigin,

    #[error("integral does not converge: {0}")]
    NonConvergent(String),

    #[error("probe design is ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("iteration is not contracting: ratios {0:?}")]
    NonContraction(Vec<f64>),

    #[error("chained domain needs {needed} nodes, ceiling is {ceiling}")]
    InfeasibleBudget { needed: u64, ceiling: u64 },

    #[error("momentum drift bound {bound:e} exceeds the configured slack {slack:e}")]
    MomentumSlackExceeded { bound: f64, slack: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("table format: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
