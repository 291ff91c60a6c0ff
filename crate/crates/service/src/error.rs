use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] linevox_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown scene {0:?}")]
    UnknownScene(String),
    #[error("bad message: {0}")]
    Protocol(String),
    #[error("no scene loaded")]
    NoScene,
}

pub type Result<T> = std::result::Result<T, ServiceError>;
