use thiserror::Error;

/// Errors raised by the solver, simulator and configuration layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("parameter `{name}` must be non-negative, got {value}")]
    NegativeParameter { name: &'static str, value: f64 },

    #[error("inconsistent moments for {variable}: second moment {second} is below squared mean {mean_sq}")]
    MomentInconsistency {
        variable: &'static str,
        second: f64,
        mean_sq: f64,
    },

    #[error("Riccati solution left the finite range near t = {time}")]
    RiccatiBlowup { time: f64 },

    #[error("Neumann series does not contract: term {order} has ratio {ratio} to its predecessor")]
    SeriesDiverging { order: usize, ratio: f64 },

    #[error("series truncation limit reached after {terms} terms (last term norm {last_norm:e})")]
    TruncationLimit { terms: usize, last_norm: f64 },

    #[error("permanent impact b = {b:e} is not below the admissibility bound {bound:e}")]
    BAboveBound { b: f64, bound: f64 },

    #[error("N = {n} is too small: {reason}")]
    NTooSmall { n: usize, reason: String },

    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("price simulation requires a volatility `sigma`")]
    MissingSigma,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config: {0}")]
    ConfigParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
