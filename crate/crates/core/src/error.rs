use alloc::string::String;

/// Errors raised by the model and estimators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An input violated a domain constraint (simplex, weight sum, positivity).
    #[error("domain error at index {index}: {reason}")]
    Domain { index: usize, reason: String },

    /// A price component fell below the configured floor.
    #[error(
        "price singularity at step {step}: component {component} = {value:e} below floor {floor:e}"
    )]
    Singularity {
        step: usize,
        component: usize,
        value: f64,
        floor: f64,
    },

    /// A state update left its admissible range.
    #[error("invariant violated at step {step}: {reason}")]
    Invariant { step: usize, reason: String },

    /// The series carries no variation (constant prices, all-zero returns).
    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("insufficient data: need at least {required}, got {got} ({what})")]
    InsufficientData {
        what: &'static str,
        required: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Attach a simulation step index to step-less singularity/invariant errors.
    pub fn at_step(self, t: usize) -> Self {
        match self {
            Error::Singularity {
                component,
                value,
                floor,
                ..
            } => Error::Singularity {
                step: t,
                component,
                value,
                floor,
            },
            Error::Invariant { reason, .. } => Error::Invariant { step: t, reason },
            other => other,
        }
    }

    /// True for errors that stem from numerics of the price recursion.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singularity { .. } | Error::Invariant { .. } | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
