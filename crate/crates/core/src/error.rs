use thiserror::Error;

/// Errors raised by the geometry, optimization and scenario layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the chart domain on axis {axis}")]
    Domain { point: Vec<f64>, axis: usize },

    #[error("metric is degenerate: {0}")]
    Degenerate(String),

    #[error("metric is not symmetric: |g_{i}{j} - g_{j}{i}| = {violation:e}")]
    Symmetry { i: usize, j: usize, violation: f64 },

    #[error("vectors are linearly dependent (residual {residual:e} at vector {index})")]
    Dependency { index: usize, residual: f64 },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("quaternionic structure error: {0}")]
    Structure(String),

    #[error("frame error: {0}")]
    Frame(String),

    #[error("rank mismatch: declared {expected}, differential has numerical rank {found}")]
    Rank { expected: usize, found: usize },

    #[error("not a Riemannian map: isometry violation {violation:e}")]
    NotRiemannian { violation: f64 },

    #[error("Tripathi proviso violated: {0}")]
    Proviso(String),

    #[error("hyperplane optimizer did not converge (best value {best}, gradient norm {grad_norm:e})")]
    Optimization { best: f64, grad_norm: f64 },

    #[error("space-form mismatch: {0}")]
    Oracle(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
