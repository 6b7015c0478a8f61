use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for {what} of length {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("negative density {0}")]
    NegativeDensity(f64),

    #[error("point target coincides with the evaluation point")]
    CoincidentTarget,

    #[error("CFL violation: |courant| = {courant} > 1")]
    CflViolation { courant: f64 },

    #[error(
        "positivity violation at t = {time}: f[group {group}][dir {direction}][speed {speed}] \
         at cell ({ix}, {iy}) = {value}"
    )]
    PositivityViolation {
        time: f64,
        group: usize,
        direction: usize,
        speed: usize,
        ix: usize,
        iy: usize,
        value: f64,
    },

    #[error("{path}: {message}")]
    Validation { path: String, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors raised while checking inputs, as opposed to failures
    /// during time integration.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. } | Error::InvalidArgument(_) | Error::IndexOutOfRange { .. }
        )
    }
}
