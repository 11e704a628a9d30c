use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("predictor column {0} is constant and cannot be scaled")]
    ConstantColumn(usize),

    #[error("input contains non-finite values ({0})")]
    NonFiniteInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("coordinate descent did not converge after {sweeps} sweeps (KKT residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },

    #[error("quadrature grid too coarse: refinement changed {quantity} by {change:e}")]
    GridTooCoarse { quantity: String, change: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the supplied data rather than by the
    /// configuration or the numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::ConstantColumn(_)
                | Error::NonFiniteInput(_)
                | Error::InvalidData(_)
                | Error::DimensionMismatch(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure(_)
                | Error::NonConvergence { .. }
                | Error::GridTooCoarse { .. }
                | Error::Degenerate(_)
        )
    }
}
