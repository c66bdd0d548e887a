use thiserror::Error;

/// Errors raised by the numerical lab.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("root finder did not converge for mode {mode} after {sweeps} sweeps (max residual {residual:.3e})")]
    Convergence {
        mode: usize,
        sweeps: usize,
        residual: f64,
    },

    #[error("cannot classify roots of mode {mode}: {reason}")]
    Classification { mode: usize, reason: String },

    #[error("ill-conditioned system ({what}): {detail}")]
    Conditioning { what: String, detail: String },

    #[error("Gram operator not positive definite: min eigenvalue {min_eig:.3e}, max eigenvalue {max_eig:.3e}")]
    NotControllable { min_eig: f64, max_eig: f64 },

    #[error("integration diverged at step {step} (t = {time:.4})")]
    Divergence { step: usize, time: f64 },

    #[error("mode {mode}: {source}")]
    Mode {
        mode: usize,
        #[source]
        source: Box<LabError>,
    },
}

impl LabError {
    pub(crate) fn at_mode(self, mode: usize) -> Self {
        match self {
            e @ LabError::Mode { .. } => e,
            e => LabError::Mode {
                mode,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
