//! Error type shared by every module of the engine.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad indices, self-loops, nonpositive weights, shape mismatches.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("graph is not connected: {0}")]
    Connectivity(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("derivative mismatch for {cost} at x = {point:?}, component {component}: {detail}")]
    Derivative {
        cost: String,
        point: Vec<f64>,
        component: String,
        detail: String,
    },

    #[error("convexity violated: {0}")]
    Convexity(String),

    #[error("Hessian of agent {agent} is not positive definite at t = {time}")]
    SingularHessian { agent: usize, time: f64 },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("state diverged at t = {time} (agent {agent})")]
    Divergence { agent: usize, time: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Attach a time stamp to errors raised from inside a simulation step.
    pub fn at_time(self, t: f64) -> Self {
        match self {
            Error::SingularHessian { agent, .. } => Error::SingularHessian { agent, time: t },
            Error::Divergence { agent, .. } => Error::Divergence { agent, time: t },
            other => other,
        }
    }
}
