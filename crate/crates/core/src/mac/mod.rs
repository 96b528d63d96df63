//! 802.11-style link layer.
//!
//! Frames carry a CRC-32 FCS and are acknowledged individually. A sender
//! retries an unacknowledged frame up to its retry limit, except that frames
//! whose payload is a partially covered UDP-Lite datagram go out exactly once.
//! A receiver with the approximate switch on hands frames with a failed FCS
//! upward instead of dropping them; address filtering still applies.

mod frame;

pub use frame::{compute_fcs, encode_frame, FrameType, MacAddr, MacFrame, FCS_LEN, HEADER_LEN, MIN_FRAME_LEN, MTU};

use thiserror::Error;

use crate::time::{Micros, SimClock};
use crate::transport;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MacError {
    #[error("payload of {0} bytes exceeds the {MTU}-byte MTU")]
    PayloadTooLarge(usize),
    #[error("frame of {0} bytes is shorter than the {MIN_FRAME_LEN}-byte minimum")]
    TooShort(usize),
}

/// Airtime model. A try costs `overhead_us + bits / bitrate`; an ACK costs
/// `ack_us`; retry `k` (1-based) first waits `backoff_us * k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Airtime {
    pub overhead_us: Micros,
    pub ack_us: Micros,
    pub backoff_us: Micros,
}

impl Default for Airtime {
    fn default() -> Self {
        Self { overhead_us: 100, ack_us: 50, backoff_us: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacConfig {
    pub retry_limit: u8,
    pub approx_rx_switch: bool,
    /// Mbps, so `bits / bitrate` is in microseconds.
    pub bitrate: f64,
    pub airtime: Airtime,
}

impl Default for MacConfig {
    fn default() -> Self {
        Self { retry_limit: 7, approx_rx_switch: false, bitrate: 54.0, airtime: Airtime::default() }
    }
}

impl MacConfig {
    pub fn with_bitrate(bitrate: f64) -> Self {
        assert!(bitrate > 0.0, "bitrate must be positive");
        Self { bitrate, ..Self::default() }
    }

    pub fn approximate_receiver(mut self, on: bool) -> Self {
        self.approx_rx_switch = on;
        self
    }

    pub fn frame_airtime(&self, encoded_len: usize) -> Micros {
        self.airtime.overhead_us + ((encoded_len * 8) as f64 / self.bitrate).ceil() as Micros
    }

    /// Retry limit for an outgoing payload: zero when the payload is a UDP-Lite
    /// datagram with partial checksum coverage, the configured limit otherwise.
    pub fn retry_limit_for(&self, payload: &[u8]) -> u8 {
        match transport::peek_cscov(payload) {
            Some(cscov) if cscov != 0 => 0,
            _ => self.retry_limit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    NotForMe,
    BadFcs,
    UnknownType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RxDecision {
    Accept { frame: MacFrame, fcs_ok: bool },
    Drop(DropReason),
}

/// Receive-side filtering of raw bytes.
pub fn rx_filter(bytes: &[u8], my_addr: MacAddr, config: &MacConfig) -> Result<RxDecision, MacError> {
    let decoded = frame::decode_raw(bytes)?;
    if frame::peek_dst(bytes) != Some(my_addr) {
        return Ok(RxDecision::Drop(DropReason::NotForMe));
    }
    let Some((frame, fcs_ok)) = decoded else {
        return Ok(RxDecision::Drop(DropReason::UnknownType));
    };
    if fcs_ok || config.approx_rx_switch {
        Ok(RxDecision::Accept { frame, fcs_ok })
    } else {
        Ok(RxDecision::Drop(DropReason::BadFcs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Sender to receiver.
    Forward,
    /// Receiver back to sender (ACKs).
    Reverse,
}

/// A bidirectional medium between one sender and one receiver.
pub trait Link {
    /// Carries encoded frame bytes one way. `None` means nothing arrived.
    fn carry(&mut self, dir: Direction, frame: &[u8]) -> Option<Vec<u8>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendResult {
    Delivered(u32),
    Exhausted(u32),
}

impl SendResult {
    pub fn tries(self) -> u32 {
        match self {
            Self::Delivered(n) | Self::Exhausted(n) => n,
        }
    }
}

/// A frame the receiver accepted and passes to the layer above.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrival {
    pub frame: MacFrame,
    pub fcs_ok: bool,
    pub at: Micros,
}

/// Everything observable about one `send_over_link` call.
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub result: SendResult,
    /// One entry per on-air arrival accepted by the receiver, duplicates included.
    pub handed_up: Vec<Arrival>,
    /// Arrivals that reached the receiver but were filtered out.
    pub filtered: Vec<DropReason>,
    /// Tries that never reached the receiver.
    pub lost: u32,
    pub acks_sent: u32,
    pub data_fcs_ok: u32,
}

/// Sends `frame` from the station configured by `tx` to the station at
/// `rx_addr` configured by `rx`, retrying on missing ACKs.
pub fn send_over_link(
    frame: &MacFrame,
    tx: &MacConfig,
    rx_addr: MacAddr,
    rx: &MacConfig,
    link: &mut dyn Link,
    clock: &mut SimClock,
) -> Result<Exchange, MacError> {
    let bytes = encode_frame(frame)?;
    let retry_limit = tx.retry_limit_for(&frame.payload);
    let data_airtime = tx.frame_airtime(bytes.len());
    let mut ex = Exchange {
        result: SendResult::Exhausted(0),
        handed_up: Vec::new(),
        filtered: Vec::new(),
        lost: 0,
        acks_sent: 0,
        data_fcs_ok: 0,
    };

    for attempt in 0..=u32::from(retry_limit) {
        if attempt > 0 {
            clock.advance(tx.airtime.backoff_us * Micros::from(attempt));
        }
        clock.advance(data_airtime);
        let tries = attempt + 1;
        ex.result = SendResult::Exhausted(tries);

        let Some(received) = link.carry(Direction::Forward, &bytes) else {
            ex.lost += 1;
            continue;
        };
        let (arrived, fcs_ok) = match rx_filter(&received, rx_addr, rx) {
            Ok(RxDecision::Accept { frame, fcs_ok }) => (frame, fcs_ok),
            Ok(RxDecision::Drop(reason)) => {
                ex.filtered.push(reason);
                continue;
            }
            Err(_) => unreachable!("channel preserves frame length"),
        };
        let is_data = arrived.frame_type == FrameType::Data;
        let ack_to = arrived.src;
        let ack_seq = arrived.seq;
        ex.handed_up.push(Arrival { frame: arrived, fcs_ok, at: clock.now() });
        if !(fcs_ok && is_data) {
            continue;
        }

        ex.data_fcs_ok += 1;
        ex.acks_sent += 1;
        let ack = MacFrame::ack(ack_to, rx_addr, ack_seq);
        let ack_bytes = encode_frame(&ack)?;
        clock.advance(tx.airtime.ack_us);
        let acked = link
            .carry(Direction::Reverse, &ack_bytes)
            .map(|b| rx_filter(&b, frame.src, &MacConfig { approx_rx_switch: false, ..tx.clone() }))
            .is_some_and(|d| {
                matches!(d, Ok(RxDecision::Accept { frame: ref a, fcs_ok: true })
                    if a.frame_type == FrameType::Ack && a.seq == frame.seq)
            });
        if acked {
            ex.result = SendResult::Delivered(tries);
            break;
        }
    }
    Ok(ex)
}
