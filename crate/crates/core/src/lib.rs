//! Selectively approximate datagram transport over a simulated lossy wireless
//! link.
//!
//! Applications choose per socket, and per datagram, whether data must arrive
//! intact (precise: checksummed, acknowledged, retransmitted, in order) or may
//! arrive damaged (approximate: minimal checksum coverage, sent once at the
//! link layer, delivered even when the frame check fails).

pub mod apps;
pub mod channel;
pub mod harness;
pub mod mac;
pub mod sap;
pub mod scalar;
pub mod time;
pub mod transport;

pub use scalar::Real;

pub type TrackPoint = apps::tracker::TrackPoint<f64>;
pub type TrackPointF32 = apps::tracker::TrackPoint<f32>;
pub type TrackerState = apps::tracker::TrackerState<f64>;
pub type TrackerStateF32 = apps::tracker::TrackerState<f32>;
pub type Stats = harness::stats::Stats<f64>;
