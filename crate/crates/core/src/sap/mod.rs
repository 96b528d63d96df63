//! SAP sockets.
//!
//! Sockets start precise. A precise send is stop-and-wait: one DATA with full
//! checksum coverage, retransmitted every `rto` until its DATA_ACK arrives. An
//! approximate send covers only the transport and SAP headers, goes out once
//! at the link layer and is never acknowledged. An approximate send with a
//! precise prefix covers the headers plus the prefix and is acknowledged and
//! retransmitted like precise data. Connection setup and teardown (PING, FIN)
//! and all acknowledgments are precise.

mod message;
mod socket;
mod world;

pub use message::{MsgType, SapMessage, WireError, FLAG_ACK_REQUESTED, FLAG_APPROX, SAP_HEADER_LEN};
pub use socket::{Endpoint, Mode, RecvMeta, SapSocket, SocketCounters, SocketId, SocketState, StationId, Timeouts};
pub use world::{AirFrame, AirStats, Ledger, Tap, World};

use thiserror::Error;

use crate::mac::MTU;
use crate::time::Micros;
use crate::transport;

/// Transport plus SAP header: the minimum coverage of any datagram.
pub const COVERED_HEADERS: usize = transport::HEADER_LEN + SAP_HEADER_LEN;
/// Largest payload one `sap_send` can carry.
pub const MAX_PAYLOAD: usize = MTU - COVERED_HEADERS;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SapError {
    #[error("no acknowledgment for PING before the connect timeout")]
    ConnectTimeout,
    #[error("DATA not acknowledged within the retry budget")]
    SendTimeout,
    #[error("nothing received before the timeout")]
    RecvTimeout,
    #[error("peer closed the connection")]
    PeerClosed,
    #[error("socket is not connected")]
    NotConnected,
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD}-byte maximum")]
    TooLarge(usize),
    #[error("precise prefix of {prefix} bytes is longer than the {len}-byte payload")]
    PrefixTooLong { prefix: usize, len: usize },
    #[error("port {0} already bound")]
    PortInUse(u16),
}

impl World {
    /// Binds a listening socket on `port`.
    pub fn sap_listen(&mut self, station: StationId, port: u16) -> Result<SocketId, SapError> {
        let st = &mut self.stations[station.0];
        if st.sockets.contains_key(&port) {
            return Err(SapError::PortInUse(port));
        }
        st.sockets.insert(port, SapSocket::new(SocketState::Listening, port, None, Timeouts::default()));
        Ok(SocketId { station, port })
    }

    /// Like [`World::sap_listen`] with non-default timers.
    pub fn sap_listen_with(&mut self, station: StationId, port: u16, timeouts: Timeouts) -> Result<SocketId, SapError> {
        let id = self.sap_listen(station, port)?;
        self.socket_mut(id).unwrap().timeouts = timeouts;
        Ok(id)
    }

    /// Opens a connection from an ephemeral port of `local` to `peer`.
    pub fn sap_connect(&mut self, local: StationId, peer: Endpoint, timeouts: Timeouts) -> Result<SocketId, SapError> {
        let port = self.ephemeral_port(local);
        let id = SocketId { station: local, port };
        self.stations[local.0]
            .sockets
            .insert(port, SapSocket::new(SocketState::Connecting, port, Some(peer), timeouts));

        let start = self.now();
        let deadline = start + timeouts.connect_timeout;
        let ping = SapMessage::control(MsgType::Ping, 0);
        let connected = self.exchange(id, peer, &ping, deadline, |s| s.state == SocketState::Connected);
        if connected {
            return Ok(id);
        }
        self.clock.advance_to(deadline);
        self.stations[local.0].sockets.remove(&port);
        Err(SapError::ConnectTimeout)
    }

    pub fn set_mode(&mut self, sock: SocketId, mode: Mode) -> Result<(), SapError> {
        match self.socket_mut(sock) {
            Some(s) if s.state == SocketState::Connected => {
                s.mode = mode;
                Ok(())
            }
            _ => Err(SapError::NotConnected),
        }
    }

    /// Sends one datagram. `precise_prefix_len` only matters in approximate
    /// mode, where that many leading bytes are checksummed and delivered
    /// reliably while the rest may arrive damaged.
    pub fn sap_send(&mut self, sock: SocketId, data: &[u8], precise_prefix_len: usize) -> Result<(), SapError> {
        let s = self.socket(sock).ok_or(SapError::NotConnected)?;
        if s.state != SocketState::Connected {
            return Err(SapError::NotConnected);
        }
        if data.len() > MAX_PAYLOAD {
            return Err(SapError::TooLarge(data.len()));
        }
        let peer = s.peer.expect("connected socket has a peer");
        let timeouts = s.timeouts;
        let (mode, tx_seq, approx_seq) = (s.mode, s.next_tx_seq, s.next_approx_seq);

        let (msg, cscov) = match mode {
            Mode::Precise => (SapMessage::data(tx_seq, 0, data.to_vec()), 0),
            Mode::Approximate if precise_prefix_len == 0 => {
                let msg = SapMessage::data(approx_seq, FLAG_APPROX, data.to_vec());
                self.transmit(sock.station, sock.port, peer, &msg, COVERED_HEADERS as u16);
                self.pump();
                if let Some(s) = self.socket_mut(sock) {
                    s.next_approx_seq = s.next_approx_seq.wrapping_add(1);
                }
                return Ok(());
            }
            Mode::Approximate => {
                if precise_prefix_len > data.len() {
                    return Err(SapError::PrefixTooLong { prefix: precise_prefix_len, len: data.len() });
                }
                let msg = SapMessage::data(tx_seq, FLAG_APPROX | FLAG_ACK_REQUESTED, data.to_vec());
                (msg, (COVERED_HEADERS + precise_prefix_len) as u16)
            }
        };

        for _ in 0..=timeouts.retry_budget {
            let sent_at = self.now();
            self.transmit(sock.station, sock.port, peer, &msg, cscov);
            self.pump();
            let s = self.socket_mut(sock).ok_or(SapError::NotConnected)?;
            if s.acked_seq == Some(tx_seq) {
                s.next_tx_seq = tx_seq.wrapping_add(1);
                return Ok(());
            }
            self.clock.advance_to(sent_at + timeouts.rto);
        }
        Err(SapError::SendTimeout)
    }

    /// Takes the next delivered datagram. Approximate datagrams come in
    /// arrival order; precise ones in sequence order, exactly once.
    pub fn sap_recv(&mut self, sock: SocketId, timeout: Micros) -> Result<(Vec<u8>, RecvMeta), SapError> {
        let s = self.socket_mut(sock).ok_or(SapError::NotConnected)?;
        if let Some(item) = s.rx_queue.pop_front() {
            return Ok(item);
        }
        if s.peer_closed_at.is_some() {
            return Err(SapError::PeerClosed);
        }
        if s.state == SocketState::Closed {
            return Err(SapError::NotConnected);
        }
        // nothing else is running, so nothing can arrive while we wait
        self.clock.advance(timeout);
        Err(SapError::RecvTimeout)
    }

    /// Sends FIN and waits up to the FIN timeout for FIN_ACK, then releases
    /// the socket. Closing an already closed socket does nothing.
    pub fn sap_close(&mut self, sock: SocketId) {
        let Some(s) = self.socket_mut(sock) else {
            return;
        };
        let needs_fin = matches!(s.state, SocketState::Connected | SocketState::FinWait) && s.peer_closed_at.is_none();
        if needs_fin {
            s.state = SocketState::FinWait;
            let (peer, fin_timeout, seq) = (s.peer.expect("connected socket has a peer"), s.timeouts.fin_timeout, s.next_tx_seq);
            let deadline = self.now() + fin_timeout;
            let fin = SapMessage::control(MsgType::Fin, seq);
            if !self.exchange(sock, peer, &fin, deadline, |s| s.fin_acked) {
                self.clock.advance_to(deadline);
            }
        }
        if let Some(mut s) = self.stations[sock.station.0].sockets.remove(&sock.port) {
            s.state = SocketState::Closed;
        }
    }

    /// Sends a precise control message every `rto`, at most `1 + retry_budget`
    /// times and never past `deadline`, until `done` holds for the socket.
    fn exchange(
        &mut self,
        sock: SocketId,
        peer: Endpoint,
        msg: &SapMessage,
        deadline: Micros,
        done: impl Fn(&SapSocket) -> bool,
    ) -> bool {
        let timeouts = match self.socket(sock) {
            Some(s) => s.timeouts,
            None => return false,
        };
        for _ in 0..=timeouts.retry_budget {
            if self.now() >= deadline {
                break;
            }
            let sent_at = self.now();
            self.transmit(sock.station, sock.port, peer, msg, 0);
            self.pump();
            if self.socket(sock).is_some_and(&done) {
                return true;
            }
            self.clock.advance_to((sent_at + timeouts.rto).min(deadline));
        }
        false
    }
}

#[cfg(test)]
mod tests;
