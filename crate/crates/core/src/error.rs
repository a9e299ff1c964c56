use thiserror::Error;

/// Errors raised by the solvers, the inversion pipeline and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("parameter `{field}` must be strictly positive, got {value} at node {node:?}")]
    NonPositive {
        field: &'static str,
        node: [usize; 3],
        value: f64,
    },

    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    #[error("CFL condition violated: dt = {dt:e} exceeds the limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite or exploding field detected at step {step}")]
    BlowUp { step: usize },

    #[error("initial data not divergence-free: relative residual {residual:e}")]
    Divergence { residual: f64 },

    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics themselves (blow-up, stalled
    /// iterations) as opposed to rejected inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. } | Error::NoConvergence(_) | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
