//! Error type shared by every stage of the pipeline.

use thiserror::Error;

/// Failures surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate basis: gram determinant {det:e} below threshold {threshold:e}")]
    DegenerateBasis { det: f64, threshold: f64 },

    #[error("null pivot: remaining vectors are lightlike or dependent (step {step})")]
    NullPivot { step: usize },

    #[error("stencil order {order} is not supported (use 2, 4 or 6)")]
    StencilOrderUnsupported { order: usize },

    #[error("grid too coarse on axis {axis}: {count} nodes, need at least {needed}")]
    GridTooCoarse { axis: usize, count: usize, needed: usize },

    #[error("grid is incompatible with the surface: {0}")]
    GridIncompatible(String),

    #[error("degenerate metric at {nodes} node(s)")]
    DegenerateMetric { nodes: usize },

    #[error("variance mismatch: {0}")]
    VarianceMismatch(String),

    #[error("invalid signature: {0}")]
    InvalidSignature(String),

    #[error("immersion leaves its space form: residual {residual:e}")]
    NotOnSpaceForm { residual: f64 },

    #[error("point at infinity at node(s) {nodes:?}")]
    PointAtInfinity { nodes: Vec<usize> },

    #[error("unknown surface '{0}'")]
    UnknownSurface(String),

    #[error("surface immersion is degenerate at {nodes} node(s)")]
    DegenerateImmersion { nodes: usize },

    #[error("fewer than 10% of nodes are conformally regular ({regular} of {total})")]
    InsufficientRegularity { regular: usize, total: usize },

    #[error("expression error: {0}")]
    Expression(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("task failed: {0}")]
    TaskFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
