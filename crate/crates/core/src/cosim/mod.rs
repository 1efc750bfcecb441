//! Newline-delimited JSON protocol for hosting a surrogate in another process.
//!
//! A session is `hello` -> `hello_ack`, then any number of `predict` ->
//! `prediction` exchanges with increasing `seq`, then `shutdown`. Matrices
//! travel normalized with the statistics from the model file; both ends hold
//! the same file. Any error reply ends the session.

mod client;
mod message;
mod server;

pub use client::RemoteModel;
pub use message::{decode, encode, Message};
pub use server::{serve_model, serve_one, Phase, Session};

use thiserror::Error;

use crate::hybrid::HybridError;
use crate::surrogate::SurrogateError;

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_PORT: u16 = 7878;
pub const DEFAULT_TIMEOUT_SECS: u64 = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CosimError {
    #[error("PROTO_MALFORMED: at byte {offset}: {detail}")]
    Malformed { offset: usize, detail: String },
    #[error("PROTO_TIMEOUT: no reply within {0:?}")]
    Timeout(std::time::Duration),
    #[error("CONNECTION_ERROR: {0}")]
    Connection(String),
    /// Error message sent by the peer, code kept verbatim.
    #[error("{code}: {detail}")]
    Remote { code: String, detail: String },
    #[error(transparent)]
    Model(#[from] SurrogateError),
}

impl CosimError {
    pub fn code(&self) -> &str {
        match self {
            Self::Malformed { .. } => "PROTO_MALFORMED",
            Self::Timeout(_) => "PROTO_TIMEOUT",
            Self::Connection(_) => "CONNECTION_ERROR",
            Self::Remote { code, .. } => code,
            Self::Model(e) => e.code(),
        }
    }

    pub(crate) fn malformed(offset: usize, detail: impl Into<String>) -> Self {
        Self::Malformed {
            offset,
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for CosimError {
    fn from(e: std::io::Error) -> Self {
        Self::Connection(e.to_string())
    }
}

impl From<CosimError> for HybridError {
    fn from(e: CosimError) -> Self {
        match e {
            CosimError::Model(m) => HybridError::Surrogate(m),
            CosimError::Remote { code, detail } => HybridError::Remote { code, detail },
            other => HybridError::Remote {
                code: other.code().to_string(),
                detail: other.to_string(),
            },
        }
    }
}
