use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bessel domain error: order {order}, argument {x}")]
    BesselDomain { order: usize, x: f64 },

    #[error("bessel zero j({order},{index}) did not converge (residual {residual:e})")]
    ZeroNonConvergence {
        order: usize,
        index: usize,
        residual: f64,
    },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("level set does not cross the ray at theta = {theta} near r = {guess}")]
    NoRoot { theta: f64, guess: f64 },

    #[error("root search at theta = {theta} did not reach tolerance (|u| = {residual:e})")]
    NonConvergence { theta: f64, residual: f64 },

    #[error("level set normal is degenerate at theta = {theta} (u_r = {u_r:e})")]
    TangentialZero { theta: f64, u_r: f64 },

    #[error("least-squares system is singular: {0}")]
    Singular(String),

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("unknown optimizer '{0}'")]
    UnknownOptimizer(String),

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
