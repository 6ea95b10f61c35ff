use thiserror::Error;

/// Everything that can go wrong inside the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("interval endpoint {value} is not a grid node (nearest node {nearest}, spacing {h})")]
    EndpointNotOnGrid { value: f64, nearest: f64, h: f64 },
    #[error("well intervals overlap, touch, or are out of order: {0}")]
    OverlappingIntervals(String),
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("problem specification violated at node {node}: {reason}")]
    SpecViolation { node: usize, reason: String },
    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),
    #[error("physical lambda must be >= 1, got {0}")]
    LambdaBelowOne(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("nodal signature changed: expected {expected}, found {found}")]
    SignatureChanged { expected: String, found: String },
    #[error("iteration converged to the trivial solution")]
    ConvergedToZero,
    #[error("shooting bracket failed: {0}")]
    BracketingFailed(String),
    #[error("solution is degenerate (nondegeneracy margin {margin:e} <= {threshold:e})")]
    SingularL { margin: f64, threshold: f64 },
    #[error("branch failed at lambda = {lambda}: {reason}")]
    BranchFailed { lambda: f64, reason: String },
    #[error("too few exterior nodes beyond R = {r}: {count}")]
    TooFewExteriorNodes { r: f64, count: usize },
    #[error("eigen-solver breakdown: {0}")]
    EigenBreakdown(String),
    #[error("config error:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Failures of the banded direct solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("matrix singular (zero pivot at row {0})")]
    Singular(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;
