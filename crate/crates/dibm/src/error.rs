use thiserror::Error;

/// Errors produced by the model numerics.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("coordinate {coord} = {value} outside grid domain [{min}, {max}]")]
    OutOfRange {
        coord: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("profile has {got} samples, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("profile sample at index {index} is not finite")]
    NonFiniteSample { index: usize },

    #[error(
        "preimage iteration did not converge at eta = {eta} after {iterations} iterations \
         (last update {residual:e}); the displacement map is not a contraction here"
    )]
    PreimageDiverged {
        eta: f64,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "graph transform fixed point not reached after {iterations} iterations \
         (residual {residual:e}, tail ratio {ratio})"
    )]
    FixedPointDiverged {
        iterations: usize,
        residual: f64,
        ratio: f64,
    },

    #[error("state became non-finite at step {step}; the time step is too large for stability")]
    NonFiniteState { step: usize },

    #[error("interior root count is {count_lo} at Q = {q_lo} and {count_hi} at Q = {q_hi}; a fold bracket needs differing counts")]
    FoldBracket {
        q_lo: f64,
        q_hi: f64,
        count_lo: usize,
        count_hi: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Errors from configuration files, flags, and parameter validation.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown key `{key}` on line {line} (valid keys: Q, A, B, C, T_c, M, eps, dt, y_min, y_max, n_points)")]
    UnknownKey { key: String, line: usize },

    #[error("line {line} is not of the form `key = value`: {text:?}")]
    Malformed { line: usize, text: String },

    #[error("key `{key}`: cannot parse {value:?} as a number")]
    BadNumber { key: String, value: String },

    #[error("key `{key}` = {value}: {constraint}")]
    InvalidValue {
        key: &'static str,
        value: f64,
        constraint: String,
    },
}

pub type Result<T> = std::result::Result<T, ModelError>;
