use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid fading model: {0}")]
    InvalidModel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("relay index {index} out of range for {num_relays} relays")]
    RelayIndex { index: usize, num_relays: usize },

    #[error("quadrature did not converge: estimate {estimate}, error estimate {error_estimate}")]
    Quadrature { estimate: f64, error_estimate: f64 },

    #[error("mu solver did not converge after {iterations} iterations (residual {residual}); last iterate {last:?}")]
    Solver {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("closed form not supported for M = {num_relays} (supported up to {max})")]
    Range { num_relays: usize, max: usize },

    #[error("average delay undefined: total arrival rate is zero")]
    UndefinedDelay,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
