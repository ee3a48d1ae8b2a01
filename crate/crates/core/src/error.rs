use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("minimizer did not converge after {iterations} cycles (best value {best_value})")]
    OptimizationFailure {
        iterations: usize,
        best_point: [f64; 2],
        best_value: f64,
    },
    #[error("degenerate encoding: a_r * a_i must be non-zero")]
    DegenerateEncoding,
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    NumericDivergence { epoch: usize },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, actual })
        }
    }
}
