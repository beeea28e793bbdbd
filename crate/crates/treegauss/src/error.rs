use thiserror::Error;

/// Library error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem in a tree document or construction request.
    #[error("invalid tree: {0}")]
    InvalidTree(String),

    /// A node reference was used with a tree it does not belong to.
    #[error("node reference out of range: {0}")]
    BadNodeRef(String),

    /// Weight validation failed (sign, monotonicity, or shape).
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// The requested operation needs an explicitly materialized tree that
    /// would exceed the node cap.
    #[error("tree too large to materialize: {nodes} nodes exceeds cap {cap}")]
    MaterializeCap { nodes: u64, cap: u64 },

    /// Operation restricted to a smaller instance than the one supplied.
    #[error("instance too large for {op}: {nodes} nodes exceeds limit {limit}")]
    TooLarge {
        op: &'static str,
        nodes: u64,
        limit: u64,
    },

    /// Traversal depth budget exceeded.
    #[error("depth too large for {op}: {depth} exceeds cap {cap}")]
    DepthCap {
        op: &'static str,
        depth: u32,
        cap: u32,
    },

    /// Operation defined only for homogeneous (level) weights.
    #[error("operation requires homogeneous level weights: {0}")]
    NotHomogeneous(String),

    /// Operation defined only for a specific tree shape.
    #[error("unsupported tree shape: {0}")]
    UnsupportedShape(String),

    /// Bad scalar parameter (grid bounds, truncation, tolerance, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Malformed JSON input.
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
