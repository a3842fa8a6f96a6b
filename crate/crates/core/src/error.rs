use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("{what} index {index} out of range (len {len})")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("degenerate identification amplitudes: {0}")]
    Amplitude(String),

    #[error("identification plan incomplete: {0}")]
    Plan(String),

    #[error("sNNLS stopped after {activations} activations with relative residual {relative_residual:.3e} (target {target:.3e})")]
    NonConvergence {
        activations: usize,
        relative_residual: f64,
        target: f64,
    },

    #[error("Newton iteration failed at step {step}: residual history {residuals:?}")]
    NewtonDivergence { step: usize, residuals: Vec<f64> },
}

impl Error {
    pub(crate) fn index(what: &'static str, index: usize, len: usize) -> Self {
        Error::Index { what, index, len }
    }
}
