use thiserror::Error;

/// Domain errors raised by the geometry, energy, constraint and flow modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid reference surface: {0}")]
    InvalidSurface(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid resolution {n_u}x{n_v} rejected: {reason}")]
    Resolution {
        n_u: usize,
        n_v: usize,
        reason: String,
    },

    #[error("grid mismatch: field has {got} values, grid has {expected} nodes")]
    GridMismatch { expected: usize, got: usize },

    #[error("height field leaves the admissible chart: |h| = {value:e} >= {bound:e} at node {node}")]
    ReachViolation { value: f64, bound: f64, node: usize },

    #[error("degenerate geometry at node {node}: det g = {det:e}")]
    DegenerateGeometry { node: usize, det: f64 },

    #[error("infeasible constraint targets: {0}")]
    InfeasibleTargets(String),

    #[error("constraint restoration did not converge in {iterations} Newton iterations (relative residual {residual:e})")]
    NewtonNonConvergence { iterations: usize, residual: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("time step rejected after {halvings} halvings: {reason}")]
    StepFailure { halvings: usize, reason: String },

    #[error("decay fit: {0}")]
    DecayFit(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("{context}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input in {context}: {message}")]
    Parse { context: String, message: String },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
