use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("algebra dimensions differ: {0} vs {1}")]
    DimensionMismatch(u32, u32),
    #[error("blade mask {mask:#x} does not fit in dimension {dim}")]
    DimensionOverflow { mask: u16, dim: u32 },
    #[error("algebra dimension {0} outside supported range 1..=12")]
    DimensionRange(u32),
    #[error("matrix is not special-orthogonal (residual {0:.3e})")]
    NotARotation(f64),
    #[error("element is not a valid Spin element: {0}")]
    NotASpinElement(String),
    #[error("expected a grade-1 multivector")]
    NotAVector,
    #[error("element does not lie in the claimed ideal (residual {0:.3e})")]
    NotInIdeal(f64),
    #[error("matrix shape does not match the representation")]
    ShapeMismatch,
    #[error("degenerate triangle {0}")]
    DegenerateTriangle(usize),
    #[error("non-manifold edge ({0}, {1})")]
    NonManifold(usize, usize),
    #[error("mesh is not edge-connected")]
    Disconnected,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
