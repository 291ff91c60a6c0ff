//! Voxel-based encoding and CPU ray-casting of large 3D line sets.

mod bytes;
pub mod error;
pub mod illumination;
pub mod image_io;
pub mod lod;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod par;
pub mod raycast;
pub mod scene;
mod timer;
pub mod voxelizer;
pub mod vxl;

pub use error::{Error, Result};
pub use model::{TransferTable, VoxelModel};
pub use scene::{CurveSet, GridSpec};
