//! Streamer: sends a stream both ends can predict, so the receiver can count
//! every damaged bit.
//!
//! The sender first sends, precisely, a 12-byte setup message (seed, datagram
//! count, words per datagram, all big-endian u32). Datagram `i` then carries
//! the words `streamer_word(seed + i * words + j)` for `j in 0..words`.

use crate::sap::{Mode, MsgType, SapError, StationId, Timeouts, World};

use super::{AppError, RECV_WAIT_US};

pub const STREAMER_PORT: u16 = 7000;

/// 32-bit avalanche mixer (xor-shift / multiply, wrapping).
pub fn streamer_word(counter: u32) -> u32 {
    let mut x = counter;
    x ^= x >> 16;
    x = x.wrapping_mul(0x7FEB_352D);
    x ^= x >> 15;
    x = x.wrapping_mul(0x846C_A68B);
    x ^= x >> 16;
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamerConfig {
    pub seed32: u32,
    pub total_bytes: u64,
    pub words_per_datagram: u32,
}

impl StreamerConfig {
    pub fn new(seed32: u32, total_bytes: u64) -> Self {
        Self { seed32, total_bytes, words_per_datagram: 256 }
    }

    fn datagram_bytes(&self) -> u64 {
        4 * u64::from(self.words_per_datagram)
    }

    pub fn datagrams(&self) -> Result<u32, AppError> {
        let size = self.datagram_bytes();
        if self.words_per_datagram == 0 || !self.total_bytes.is_multiple_of(size) {
            return Err(AppError::InvalidConfig(format!(
                "total bytes {} not a multiple of the {size}-byte datagram",
                self.total_bytes
            )));
        }
        u32::try_from(self.total_bytes / size).map_err(|_| AppError::InvalidConfig("too many datagrams".into()))
    }
}

/// Contents of datagram `index`.
pub fn streamer_payload(seed32: u32, words: u32, index: u32) -> Vec<u8> {
    let base = seed32.wrapping_add(index.wrapping_mul(words));
    (0..words).flat_map(|j| streamer_word(base.wrapping_add(j)).to_be_bytes()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StreamerReport {
    pub datagrams_sent: u64,
    pub delivered: u64,
    pub damaged: u64,
    pub lost: u64,
    pub bits_delivered: u64,
    pub bit_errors: u64,
    pub bits_in_damaged: u64,
    /// Damaged datagrams over datagrams sent.
    pub damaged_frame_fraction: f64,
    pub ber_in_damaged: f64,
    pub ber_overall: f64,
    /// Lost or damaged, over sent.
    pub flr: f64,
    /// Lost only, over sent.
    pub flr_b: f64,
    pub correct_bit_fraction: f64,
    /// Data frames whose first link-layer try went unacknowledged.
    pub retransmit_fraction: f64,
}

impl StreamerReport {
    fn finish(mut self) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        self.lost = self.datagrams_sent - self.delivered;
        self.damaged_frame_fraction = ratio(self.damaged, self.datagrams_sent);
        self.ber_in_damaged = ratio(self.bit_errors, self.bits_in_damaged);
        self.ber_overall = ratio(self.bit_errors, self.bits_delivered);
        self.flr = ratio(self.lost + self.damaged, self.datagrams_sent);
        self.flr_b = ratio(self.lost, self.datagrams_sent);
        self.correct_bit_fraction = if self.bits_delivered == 0 {
            0.0
        } else {
            1.0 - ratio(self.bit_errors, self.bits_delivered)
        };
        self
    }
}

/// Runs one stream from `sender` to `receiver` and scores what arrived.
pub fn streamer_run(
    world: &mut World,
    sender: StationId,
    receiver: StationId,
    cfg: &StreamerConfig,
    mode: Mode,
) -> Result<StreamerReport, AppError> {
    let n = cfg.datagrams()?;
    let listener = world.sap_listen(receiver, STREAMER_PORT)?;
    let sock = world.sap_connect(sender, world.endpoint(receiver, STREAMER_PORT), Timeouts::default())?;

    let mut setup = Vec::with_capacity(12);
    for v in [cfg.seed32, n, cfg.words_per_datagram] {
        setup.extend_from_slice(&v.to_be_bytes());
    }
    world.sap_send(sock, &setup, 0)?;

    let before = world.stats().clone();
    world.set_mode(sock, mode)?;
    for i in 0..n {
        world.sap_send(sock, &streamer_payload(cfg.seed32, cfg.words_per_datagram, i), 0)?;
    }
    let data = MsgType::Data as usize - 1;
    let exchanges = world.stats().exchanges[data] - before.exchanges[data];
    let failures = world.stats().first_try_failures[data] - before.first_try_failures[data];
    world.sap_close(sock);

    let mut report = receive(world, listener)?;
    report.retransmit_fraction = if exchanges == 0 { 0.0 } else { failures as f64 / exchanges as f64 };
    world.sap_close(listener);
    Ok(report)
}

/// Receiver side. Expected contents come only from the precisely delivered
/// setup message.
fn receive(world: &mut World, listener: crate::sap::SocketId) -> Result<StreamerReport, AppError> {
    let (setup, meta) = world.sap_recv(listener, RECV_WAIT_US)?;
    if meta.approximate || setup.len() != 12 {
        return Err(AppError::Protocol("first streamer message must be the precise setup".into()));
    }
    let word = |k: usize| u32::from_be_bytes(setup[4 * k..4 * k + 4].try_into().unwrap());
    let (seed32, n, words) = (word(0), word(1), word(2));

    let mut seen = vec![false; n as usize];
    let mut report = StreamerReport { datagrams_sent: u64::from(n), ..Default::default() };
    loop {
        let (payload, meta) = match world.sap_recv(listener, RECV_WAIT_US) {
            Ok(x) => x,
            Err(SapError::PeerClosed | SapError::RecvTimeout) => break,
            Err(e) => return Err(e.into()),
        };
        // precise data follows the setup message in the precise sequence space
        let index = if meta.approximate { meta.seq } else { meta.seq.wrapping_sub(1) };
        let Some(slot) = seen.get_mut(index as usize) else {
            continue;
        };
        if std::mem::replace(slot, true) {
            continue;
        }
        let expected = streamer_payload(seed32, words, index);
        let bits = 8 * expected.len() as u64;
        let errors: u64 = payload
            .iter()
            .zip(&expected)
            .map(|(a, b)| u64::from((a ^ b).count_ones()))
            .sum::<u64>()
            + 8 * expected.len().abs_diff(payload.len()) as u64;
        report.delivered += 1;
        report.bits_delivered += bits;
        if errors > 0 {
            report.damaged += 1;
            report.bits_in_damaged += bits;
            report.bit_errors += errors;
        }
    }
    Ok(report.finish())
}
