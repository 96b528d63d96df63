use std::collections::VecDeque;

use crate::mac::MacAddr;
use crate::time::Micros;

use super::message::{MsgType, SapMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StationId(pub usize);

/// Handle to a socket owned by a station of a [`super::World`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SocketId {
    pub station: StationId,
    pub port: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Endpoint {
    pub addr: MacAddr,
    pub port: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocketState {
    Closed,
    Listening,
    Connecting,
    Connected,
    FinWait,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Precise,
    Approximate,
}

/// Protocol timers, in simulated microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timeouts {
    pub rto: Micros,
    pub retry_budget: u32,
    pub connect_timeout: Micros,
    pub fin_timeout: Micros,
}

impl Default for Timeouts {
    fn default() -> Self {
        Self { rto: 2_000, retry_budget: 8, connect_timeout: 1_000_000, fin_timeout: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecvMeta {
    /// Precise sequence number, or the approximate counter for approximate
    /// datagrams.
    pub seq: u32,
    pub approximate: bool,
    pub arrived_at: Micros,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SocketCounters {
    pub delivered_precise: u64,
    pub delivered_approx: u64,
    pub duplicates: u64,
    /// Precise DATA ahead of the expected sequence number.
    pub out_of_order: u64,
    /// Precise messages that arrived with a failed frame check.
    pub unverified: u64,
    pub ignored: u64,
}

/// Per-connection state. All protocol bookkeeping lives here.
#[derive(Debug, Clone)]
pub struct SapSocket {
    pub state: SocketState,
    pub local_port: u16,
    pub peer: Option<Endpoint>,
    pub mode: Mode,
    pub next_tx_seq: u32,
    pub next_expected_rx_seq: u32,
    pub next_approx_seq: u32,
    pub timeouts: Timeouts,
    pub counters: SocketCounters,
    pub(crate) rx_queue: VecDeque<(Vec<u8>, RecvMeta)>,
    pub(crate) acked_seq: Option<u32>,
    pub(crate) fin_acked: bool,
    pub(crate) peer_closed_at: Option<Micros>,
}

/// A reply the socket wants sent, always precise.
pub(crate) struct Reply {
    pub to: Endpoint,
    pub msg: SapMessage,
}

impl SapSocket {
    pub(crate) fn new(state: SocketState, local_port: u16, peer: Option<Endpoint>, timeouts: Timeouts) -> Self {
        Self {
            state,
            local_port,
            peer,
            mode: Mode::Precise,
            next_tx_seq: 0,
            next_expected_rx_seq: 0,
            next_approx_seq: 0,
            timeouts,
            counters: SocketCounters::default(),
            rx_queue: VecDeque::new(),
            acked_seq: None,
            fin_acked: false,
            peer_closed_at: None,
        }
    }

    pub fn pending(&self) -> usize {
        self.rx_queue.len()
    }

    /// When the peer's FIN arrived, if it has.
    pub fn peer_closed_at(&self) -> Option<Micros> {
        self.peer_closed_at
    }

    fn is_peer(&self, from: Endpoint, addr_trusted: bool) -> bool {
        match self.peer {
            Some(p) => p.port == from.port && (!addr_trusted || p.addr == from.addr),
            None => false,
        }
    }

    /// Processes one incoming message. `fcs_ok` is the link layer's verdict;
    /// only approximate DATA is accepted without it.
    pub(crate) fn handle(&mut self, from: Endpoint, msg: SapMessage, fcs_ok: bool, now: Micros) -> Option<Reply> {
        let approx_data = msg.msg_type == MsgType::Data && msg.is_approximate();
        if !fcs_ok && !approx_data {
            self.counters.unverified += 1;
            return None;
        }
        let ack = |to: Endpoint, ty: MsgType, seq: u32| Some(Reply { to, msg: SapMessage::control(ty, seq) });

        match msg.msg_type {
            MsgType::Ping => match self.state {
                SocketState::Listening => {
                    self.peer = Some(from);
                    self.state = SocketState::Connected;
                    self.next_expected_rx_seq = 0;
                    ack(from, MsgType::PingAck, msg.seq)
                }
                SocketState::Connected if self.is_peer(from, true) => ack(from, MsgType::PingAck, msg.seq),
                _ => self.ignore(),
            },
            MsgType::PingAck => {
                if self.state == SocketState::Connecting && self.is_peer(from, true) {
                    self.state = SocketState::Connected;
                }
                None
            }
            MsgType::Data => {
                if !matches!(self.state, SocketState::Connected | SocketState::FinWait) || !self.is_peer(from, fcs_ok) {
                    return self.ignore();
                }
                let peer = self.peer.expect("connected socket has a peer");
                if !msg.wants_ack() {
                    let meta = RecvMeta { seq: msg.seq, approximate: true, arrived_at: now };
                    self.rx_queue.push_back((msg.payload, meta));
                    self.counters.delivered_approx += 1;
                    return None;
                }
                if msg.seq == self.next_expected_rx_seq {
                    let meta = RecvMeta { seq: msg.seq, approximate: msg.is_approximate(), arrived_at: now };
                    self.rx_queue.push_back((msg.payload, meta));
                    self.next_expected_rx_seq = self.next_expected_rx_seq.wrapping_add(1);
                    self.counters.delivered_precise += 1;
                    ack(peer, MsgType::DataAck, msg.seq)
                } else if msg.seq < self.next_expected_rx_seq {
                    self.counters.duplicates += 1;
                    ack(peer, MsgType::DataAck, msg.seq)
                } else {
                    self.counters.out_of_order += 1;
                    None
                }
            }
            MsgType::DataAck => {
                if self.is_peer(from, true) && msg.seq == self.next_tx_seq {
                    self.acked_seq = Some(msg.seq);
                }
                None
            }
            MsgType::Fin => {
                if !self.is_peer(from, true) {
                    return self.ignore();
                }
                self.peer_closed_at.get_or_insert(now);
                ack(from, MsgType::FinAck, msg.seq)
            }
            MsgType::FinAck => {
                if self.is_peer(from, true) {
                    self.fin_acked = true;
                }
                None
            }
        }
    }

    fn ignore(&mut self) -> Option<Reply> {
        self.counters.ignored += 1;
        None
    }
}
