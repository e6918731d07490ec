use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("world has no candidate gaps")]
    NoGaps,
    #[error("unknown agent {0}")]
    UnknownAgent(u32),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed manifest: {0}")]
    Manifest(String),
}

pub type Result<T> = std::result::Result<T, Error>;
