use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model, distribution or numerical parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The operation is not defined for the given configuration.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("index {index} out of range for a grid with {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("window [{lo}, {hi}] is not covered by the grid ending at {x_max}")]
    WindowOutOfRange { lo: f64, hi: f64, x_max: f64 },

    /// Picard iteration on a window failed to reach the fixed-point tolerance.
    #[error(
        "Picard iteration on window starting at x = {x:.6} (index {start}) did not converge \
         after {iterations} iterations; last sup-norm change {last_change:.3e}"
    )]
    NonConvergence {
        start: usize,
        x: f64,
        iterations: usize,
        last_change: f64,
    },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be a positive finite number, got {value}")))
    }
}
