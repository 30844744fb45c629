use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("coefficient must be positive, got {0}")]
    NonPositiveCoefficient(f64),

    #[error("field has {got} values but grid has {expected} cells")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("temperature {value} at cell {cell} is below the floor {floor}")]
    BelowTemperatureFloor { cell: usize, value: f64, floor: f64 },

    #[error("inadmissible test function: {0}")]
    InadmissibleTestFunction(String),

    #[error("empty trajectory")]
    EmptyTrajectory,
}

pub type Result<T> = std::result::Result<T, Error>;
