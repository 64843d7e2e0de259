use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration for `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("invalid piecewise-linear function: {0}")]
    InvalidPwl(String),

    #[error("neuron {index} has a zero input weight and no knot")]
    DegenerateNeuron { index: usize },

    #[error("layer {layer} has a nonzero bias; zero-bias analysis requires all biases to be 0")]
    NonzeroBias { layer: usize },

    #[error("fit window [{lo}, {hi}] holds {points} usable points, at least 3 are required")]
    DegenerateWindow { lo: f64, hi: f64, points: usize },

    #[error("decomposition mismatch: {0}")]
    Inconsistent(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
