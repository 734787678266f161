use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("not a rotation: orthogonality error {orth:e}, determinant {det}")]
    NotARotation { orth: f64, det: f64 },
    #[error("degenerate projection")]
    DegenerateProjection,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolytopeError {
    #[error("not a polytope")]
    NotAPolytope,
    #[error("empty set")]
    EmptySet,
    #[error("degenerate hull")]
    DegenerateHull,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported template kind: {0}")]
    UnsupportedTemplate(String),
    #[error("negative inflation {0}")]
    NegativeInflation(f64),
    #[error("invalid polytope data: {0}")]
    Invalid(String),
    #[error("linear program failed: {0}")]
    Lp(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UqError {
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sdp(#[from] crate::sdp::SdpError),
    #[error("facet {facet}: {source}")]
    Facet { facet: usize, source: crate::sdp::SdpError },
    #[error("set too thin to sample")]
    TooThin,
    #[error("invalid input: {0}")]
    Invalid(String),
}
