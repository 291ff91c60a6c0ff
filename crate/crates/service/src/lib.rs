//! Streams ray-cast frames of a voxelized line set over WebSocket and serves
//! the static viewer bundle.

pub mod error;
pub mod protocol;
pub mod scenes;
pub mod server;
pub mod session;

pub use error::{Result, ServiceError};
pub use server::{bind, serve, ServiceConfig};
pub use session::{Session, SessionConfig};
