use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A sampler gave up (rejection cap, degenerate table, ...).
    #[error("sampler error: {0}")]
    Sampler(String),

    #[error("divergence at step {step} (t = {time}): {detail}")]
    Divergence { step: usize, time: f64, detail: String },

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("numerical error: {0}")]
    Numeric(String),

    #[error("no convergence after {iterations} iterations (last distance {last_distance:e})")]
    NonConvergence {
        iterations: usize,
        last_distance: f64,
        decay: Vec<f64>,
    },

    /// A declared structural assumption failed a spot check.
    #[error("assumption {assumption} violated: {detail}")]
    Assumption { assumption: &'static str, detail: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
