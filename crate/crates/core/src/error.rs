use thiserror::Error;

pub type Result<T, E = HawkesError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HawkesError {
    #[error("invalid observation window [{start}, {end}]")]
    InvalidWindow { start: f64, end: f64 },

    #[error("event times must be strictly increasing and inside the window (offending index {index}, time {time})")]
    InvalidEvents { index: usize, time: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dominating bound {bound} is below rate {rate} observed at t = {at}")]
    BoundViolated { bound: f64, rate: f64, at: f64 },

    #[error("cascade exceeded the size guard of {cap} events")]
    CascadeTooLarge { cap: usize },

    #[error("time {0} lies outside the basis domain [0, pi]")]
    OutsideDomain(f64),

    #[error("parent distribution undefined for event {0}: zero background rate and no admissible parent")]
    UndefinedRow(usize),

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:.3e}, objective {objective:.6e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        objective: f64,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<HawkesError>,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HawkesError {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        HawkesError::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            HawkesError::NonConvergence { .. }
            | HawkesError::NotPositiveDefinite(_)
            | HawkesError::UndefinedRow(_)
            | HawkesError::CascadeTooLarge { .. } => true,
            HawkesError::AtIteration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
