use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("vertex index {index} out of range on line {line} ({count} vertices defined)")]
    IndexOutOfRange { line: usize, index: i64, count: usize },
    #[error("no curves")]
    NoCurves,
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: &'static str, found: [u8; 4] },
    #[error("truncated payload: {0}")]
    Truncated(String),
    #[error("invalid format: {0}")]
    Format(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate bounding box: all extents are zero")]
    DegenerateBounds,
    #[error("point is {distance:.3e} away from face {face}")]
    OffFace { face: u8, distance: f64 },
    #[error("field {field} value {value} does not fit in {bits} bits")]
    FieldOverflow { field: &'static str, value: u64, bits: u32 },
    #[error("voxel model needs {needed} bytes, budget is {budget}")]
    MemoryBudget { needed: u64, budget: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}
