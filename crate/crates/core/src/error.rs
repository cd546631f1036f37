use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown speed family `{0}`")]
    UnknownFamily(String),

    #[error("invalid parameter for `{family}`: {reason}")]
    InvalidParameter { family: String, reason: String },

    #[error("curvature vector {0:?} lies outside the admissible cone")]
    OutsideCone(Vec<f64>),

    #[error("speed is not finite at {0:?}")]
    NonFinite(Vec<f64>),

    #[error("invalid speed: {0}")]
    InvalidSpeed(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integration stalled at t = {t}: {reason}")]
    IntegrationStall { t: f64, reason: String },

    #[error("pole margin violated at node {node} (radius {rho})")]
    PoleMargin { node: usize, rho: f64 },

    #[error("curve leaves the open hemisphere at node {node} (radius {rho})")]
    Hemisphere { node: usize, rho: f64 },

    #[error("convexity lost at node {node} (kappa = {kappa})")]
    ConvexityLost { node: usize, kappa: f64 },

    /// The state passed to the stepper is the last valid one.
    #[error("numerical blowup at t = {t}")]
    NumericalBlowup { t: f64 },

    #[error("root finding failed on the ray at angle {theta}")]
    RootFinding { theta: f64 },

    #[error("series too short: {len} rows, at least {need} required")]
    SeriesTooShort { len: usize, need: usize },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
