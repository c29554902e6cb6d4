use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("singular {context} (pivot magnitude {pivot:e}, condition estimate {condition:e})")]
    Singular {
        context: String,
        pivot: f64,
        condition: f64,
    },

    #[error(
        "fixed point did not converge after {iterations} iterations \
         (last residual {residual:e}, x in [{lo:e}, {hi:e}], damping {damping})"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        lo: f64,
        hi: f64,
        damping: f64,
    },

    #[error("integrator step size underflow at t = {t:e} s (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("trajectory not settled: fit residual {ratio:e} of signal norm exceeds {limit:e}")]
    Unsettled { ratio: f64, limit: f64 },

    #[error("spectrum shape: {0}")]
    Shape(String),

    #[error(
        "group delay unstable at delta_p = {delta_p:e}: tau(h) = {coarse:e}, tau(h/2) = {fine:e}"
    )]
    StepInstability {
        delta_p: f64,
        coarse: f64,
        fine: f64,
    },

    #[error("at delta_p = {delta_p:e}: {source}")]
    AtPoint {
        delta_p: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("at spin rate {omega:e}: {source}")]
    AtSpin {
        omega: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }

    /// True for input errors, false for solver failures.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation { .. } | Error::Domain(_) | Error::Config { .. } => true,
            Error::AtPoint { source, .. } | Error::AtSpin { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
