//! Evaluation applications running over SAP sockets in a simulated world.

pub mod streamer;
pub mod trace;
pub mod tracker;
pub mod tracker_app;
pub mod xfer;

use thiserror::Error;

use crate::sap::SapError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AppError {
    #[error(transparent)]
    Sap(#[from] SapError),
    #[error("malformed request: {0}")]
    MalformedRequest(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("timestamps must strictly increase")]
    NonMonotonicTime,
    #[error("i/o: {0}")]
    Io(String),
}

/// How long a receiving application waits on an idle socket, in simulated µs.
pub(crate) const RECV_WAIT_US: u64 = 1_000_000;
