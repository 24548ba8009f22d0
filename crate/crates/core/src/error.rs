use alloc::string::String;

/// Errors raised by the core numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("temperature {0} is outside the open interval (0, 2)")]
    InvalidTemperature(f64),

    #[error("{what}: argument {value} is outside the function domain")]
    Domain { what: &'static str, value: f64 },

    /// A caller-side precondition did not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The scalar root finder failed to bracket or converge. Treated as a bug.
    #[error("internal solver failure: {0}")]
    Solver(String),

    /// The target-class probability is exactly zero and the gradient has no finite limit.
    #[error("saturated example: target probability is 0 and the gradient limit is undefined")]
    Saturated,
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! contract {
    ($($arg:tt)*) => {
        $crate::error::Error::Contract(alloc::format!($($arg)*))
    };
}
pub(crate) use contract;
