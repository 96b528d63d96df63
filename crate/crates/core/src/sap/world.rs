//! A simulated world: stations sharing one wireless channel and one clock.
//!
//! Everything runs on the caller's thread. A send drives the link-layer
//! exchange to completion, then the world processes what arrived, which may
//! trigger replies (acknowledgments), until nothing is pending. Blocking
//! socket calls therefore block in simulated time only.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::channel::{link_rng, ChannelParams, LinkConditions, LinkRng};
use crate::mac::{self, Arrival, Direction, FrameType, Link, MacAddr, MacConfig, MacFrame, SendResult};
use crate::time::{Micros, SimClock};
use crate::transport::{self, LiteDatagram};

use super::message::{MsgType, SapMessage};
use super::socket::{Endpoint, SapSocket, SocketId, StationId};

/// What a tap sees about a frame on the air.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AirFrame {
    pub from: StationId,
    pub to: StationId,
    pub dir: Direction,
    pub frame_type: FrameType,
    /// Type of the SAP message inside the DATA frame being exchanged.
    pub msg: MsgType,
    pub msg_seq: u32,
    /// 1-based link-layer try of the DATA frame this belongs to.
    pub attempt: u32,
}

/// Test hook applied to every frame that survives the channel. It may damage
/// the bytes in place; returning `false` drops the frame.
pub type Tap = Box<dyn FnMut(&AirFrame, &mut Vec<u8>) -> bool + Send>;

/// Per directional link accounting of datagrams put on the air.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Ledger {
    pub on_air: u64,
    pub lost: u64,
    pub filtered: u64,
    pub checksum_dropped: u64,
    pub delivered: u64,
}

impl Ledger {
    pub fn balanced(&self) -> bool {
        self.on_air == self.lost + self.filtered + self.checksum_dropped + self.delivered
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct AirStats {
    /// On-air tries per SAP message type.
    pub on_air: [u64; 6],
    /// Control messages put on the air with partial checksum coverage.
    pub control_partial_coverage: u64,
    /// Link-layer exchanges (one per frame, however many tries) per type.
    pub exchanges: [u64; 6],
    /// Exchanges whose first try was not acknowledged, per type.
    pub first_try_failures: [u64; 6],
    pub mac_acks_sent: u64,
    pub mac_data_fcs_ok: u64,
}

impl AirStats {
    pub fn on_air(&self, ty: MsgType) -> u64 {
        self.on_air[ty.index()]
    }
}

pub(crate) struct Station {
    pub addr: MacAddr,
    pub mac: MacConfig,
    pub sockets: BTreeMap<u16, SapSocket>,
    mac_seq: u16,
    next_ephemeral: u16,
}

pub struct World {
    pub(crate) clock: SimClock,
    bitrate: f64,
    distance: f64,
    conditions: LinkConditions,
    seed: u64,
    pub(crate) stations: Vec<Station>,
    rngs: HashMap<(usize, usize), LinkRng>,
    pending: VecDeque<(StationId, StationId, Arrival)>,
    tap: Option<Tap>,
    stats: AirStats,
    ledgers: BTreeMap<(usize, usize), Ledger>,
}

struct WorldLink<'a> {
    conditions: LinkConditions,
    fwd: &'a mut LinkRng,
    rev: &'a mut LinkRng,
    tap: Option<&'a mut Tap>,
    info: AirFrame,
}

impl Link for WorldLink<'_> {
    fn carry(&mut self, dir: Direction, frame: &[u8]) -> Option<Vec<u8>> {
        let rng = match dir {
            Direction::Forward => {
                self.info.attempt += 1;
                &mut *self.fwd
            }
            Direction::Reverse => &mut *self.rev,
        };
        let mut bytes = self.conditions.carry(rng, frame)?;
        if let Some(tap) = self.tap.as_mut() {
            let info = AirFrame {
                dir,
                frame_type: if dir == Direction::Forward { FrameType::Data } else { FrameType::Ack },
                ..self.info
            };
            if !tap(&info, &mut bytes) {
                return None;
            }
        }
        Some(bytes)
    }
}

impl World {
    /// A world whose links all run at `bitrate` Mbps over `distance` meters of
    /// the given channel.
    pub fn new(channel: &ChannelParams, bitrate: f64, distance: f64) -> Self {
        assert!(bitrate > 0.0, "bitrate must be positive");
        Self {
            clock: SimClock::new(),
            bitrate,
            distance,
            conditions: channel.conditions(bitrate, distance),
            seed: channel.seed,
            stations: Vec::new(),
            rngs: HashMap::new(),
            pending: VecDeque::new(),
            tap: None,
            stats: AirStats::default(),
            ledgers: BTreeMap::new(),
        }
    }

    /// Adds a station with the default link configuration at the world's
    /// bitrate.
    pub fn add_station(&mut self, approx_rx_switch: bool) -> StationId {
        self.add_station_with(MacConfig::with_bitrate(self.bitrate).approximate_receiver(approx_rx_switch))
    }

    pub fn add_station_with(&mut self, mac: MacConfig) -> StationId {
        let index = self.stations.len();
        let addr = MacAddr::station(u8::try_from(index + 1).expect("at most 255 stations"));
        self.stations.push(Station { addr, mac, sockets: BTreeMap::new(), mac_seq: 0, next_ephemeral: 49152 });
        StationId(index)
    }

    pub fn addr(&self, station: StationId) -> MacAddr {
        self.stations[station.0].addr
    }

    pub fn endpoint(&self, station: StationId, port: u16) -> Endpoint {
        Endpoint { addr: self.addr(station), port }
    }

    pub fn now(&self) -> Micros {
        self.clock.now()
    }

    /// Lets simulated time pass with nothing on the air.
    pub fn idle_until(&mut self, t: Micros) {
        self.clock.advance_to(t);
    }

    pub fn bitrate(&self) -> f64 {
        self.bitrate
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn conditions(&self) -> LinkConditions {
        self.conditions
    }

    pub fn set_tap(&mut self, tap: impl FnMut(&AirFrame, &mut Vec<u8>) -> bool + Send + 'static) {
        self.tap = Some(Box::new(tap));
    }

    pub fn clear_tap(&mut self) {
        self.tap = None;
    }

    pub fn stats(&self) -> &AirStats {
        &self.stats
    }

    pub fn ledger(&self, from: StationId, to: StationId) -> Ledger {
        self.ledgers.get(&(from.0, to.0)).copied().unwrap_or_default()
    }

    pub fn ledgers(&self) -> impl Iterator<Item = ((StationId, StationId), Ledger)> + '_ {
        self.ledgers.iter().map(|(&(a, b), &l)| ((StationId(a), StationId(b)), l))
    }

    pub fn socket(&self, id: SocketId) -> Option<&SapSocket> {
        self.stations.get(id.station.0)?.sockets.get(&id.port)
    }

    pub(crate) fn socket_mut(&mut self, id: SocketId) -> Option<&mut SapSocket> {
        self.stations.get_mut(id.station.0)?.sockets.get_mut(&id.port)
    }

    pub(crate) fn ephemeral_port(&mut self, station: StationId) -> u16 {
        let st = &mut self.stations[station.0];
        loop {
            let p = st.next_ephemeral;
            st.next_ephemeral = if p == u16::MAX { 49152 } else { p + 1 };
            if !st.sockets.contains_key(&p) {
                return p;
            }
        }
    }

    fn station_by_addr(&self, addr: MacAddr) -> Option<usize> {
        self.stations.iter().position(|s| s.addr == addr)
    }

    /// Puts one SAP message on the air and records what happened to it. The
    /// receiver's side is processed later by [`World::pump`].
    pub(crate) fn transmit(&mut self, from: StationId, src_port: u16, to: Endpoint, msg: &SapMessage, cscov: u16) -> SendResult {
        if msg.msg_type.is_control() && cscov != 0 {
            self.stats.control_partial_coverage += 1;
        }
        let dgram = LiteDatagram::new(src_port, to.port, cscov, msg.encode());
        let payload = transport::lite_encode(&dgram).expect("SAP always builds valid coverage");

        let station = &mut self.stations[from.0];
        let seq = station.mac_seq;
        station.mac_seq = station.mac_seq.wrapping_add(1);
        let frame = MacFrame::data(to.addr, station.addr, seq, payload);
        let tx_cfg = station.mac.clone();

        let Some(rx) = self.station_by_addr(to.addr) else {
            // nobody there: every try goes unanswered
            let limit = tx_cfg.retry_limit_for(&frame.payload);
            let tries = u32::from(limit) + 1;
            let airtime = tx_cfg.frame_airtime(frame.encoded_len());
            for k in 0..tries {
                self.clock.advance(airtime + tx_cfg.airtime.backoff_us * Micros::from(k));
            }
            self.stats.on_air[msg.msg_type.index()] += u64::from(tries);
            self.stats.exchanges[msg.msg_type.index()] += 1;
            self.stats.first_try_failures[msg.msg_type.index()] += 1;
            return SendResult::Exhausted(tries);
        };
        let rx_cfg = self.stations[rx].mac.clone();

        let mut fwd = self.rngs.remove(&(from.0, rx)).unwrap_or_else(|| link_rng(self.seed, stream_id(from.0, rx)));
        let mut rev = self.rngs.remove(&(rx, from.0)).unwrap_or_else(|| link_rng(self.seed, stream_id(rx, from.0)));
        let mut link = WorldLink {
            conditions: self.conditions,
            fwd: &mut fwd,
            rev: &mut rev,
            tap: self.tap.as_mut(),
            info: AirFrame {
                from,
                to: StationId(rx),
                dir: Direction::Forward,
                frame_type: FrameType::Data,
                msg: msg.msg_type,
                msg_seq: msg.seq,
                attempt: 0,
            },
        };
        let ex = mac::send_over_link(&frame, &tx_cfg, to.addr, &rx_cfg, &mut link, &mut self.clock)
            .expect("frames built here fit the MTU");
        self.rngs.insert((from.0, rx), fwd);
        self.rngs.insert((rx, from.0), rev);

        let tries = ex.result.tries();
        self.stats.on_air[msg.msg_type.index()] += u64::from(tries);
        self.stats.exchanges[msg.msg_type.index()] += 1;
        if ex.result != SendResult::Delivered(1) {
            self.stats.first_try_failures[msg.msg_type.index()] += 1;
        }
        self.stats.mac_acks_sent += u64::from(ex.acks_sent);
        self.stats.mac_data_fcs_ok += u64::from(ex.data_fcs_ok);

        let ledger = self.ledgers.entry((from.0, rx)).or_default();
        ledger.on_air += u64::from(tries);
        ledger.lost += u64::from(ex.lost);
        ledger.filtered += ex.filtered.len() as u64;
        self.pending.extend(ex.handed_up.into_iter().map(|a| (from, StationId(rx), a)));
        ex.result
    }

    /// Processes everything that has arrived, including replies it triggers.
    pub(crate) fn pump(&mut self) {
        while let Some((sender, station, arrival)) = self.pending.pop_front() {
            let ledger = self.ledgers.entry((sender.0, station.0)).or_default();
            let dgram = match transport::lite_decode(&arrival.frame.payload) {
                Ok(d) => d,
                Err(_) => {
                    ledger.checksum_dropped += 1;
                    continue;
                }
            };
            ledger.delivered += 1;
            let Ok(msg) = SapMessage::decode(&dgram.payload) else {
                continue;
            };
            let from = Endpoint { addr: arrival.frame.src, port: dgram.src_port };
            let Some(sock) = self.stations[station.0].sockets.get_mut(&dgram.dst_port) else {
                continue;
            };
            if let Some(reply) = sock.handle(from, msg, arrival.fcs_ok, arrival.at) {
                let port = sock.local_port;
                self.transmit(station, port, reply.to, &reply.msg, 0);
            }
        }
    }
}

fn stream_id(from: usize, to: usize) -> u64 {
    ((from as u64) << 32) | to as u64
}
