use std::sync::{Arc, Mutex};

use proptest::prelude::*;

use super::*;
use crate::channel::ChannelParams;
use crate::mac::{Direction, FrameType, HEADER_LEN as MAC_HEADER_LEN};

const PORT: u16 = 5000;
/// Offset of the SAP payload inside a MAC frame.
const PAYLOAD_AT: usize = MAC_HEADER_LEN + COVERED_HEADERS;

fn world_with(channel: ChannelParams, switch: bool) -> (World, StationId, StationId) {
    let mut w = World::new(&channel, 54.0, 6.0);
    let a = w.add_station(switch);
    let b = w.add_station(switch);
    (w, a, b)
}

fn quiet() -> (World, StationId, StationId) {
    world_with(ChannelParams::noiseless(1), true)
}

fn connected(w: &mut World, a: StationId, b: StationId) -> (SocketId, SocketId) {
    let l = w.sap_listen(b, PORT).unwrap();
    let s = w.sap_connect(a, w.endpoint(b, PORT), Timeouts::default()).unwrap();
    (s, l)
}

fn drain(w: &mut World, sock: SocketId) -> Vec<(Vec<u8>, RecvMeta)> {
    let mut out = Vec::new();
    while let Ok(x) = w.sap_recv(sock, 1_000) {
        out.push(x);
    }
    out
}

#[test]
fn connect_on_quiet_channel() {
    let (mut w, a, b) = quiet();
    let (s, l) = connected(&mut w, a, b);
    assert_eq!(w.socket(s).unwrap().state, SocketState::Connected);
    assert_eq!(w.socket(l).unwrap().state, SocketState::Connected);
    assert_eq!(w.socket(s).unwrap().mode, Mode::Precise);
    assert_eq!(w.stats().on_air(MsgType::Ping), 1);
    assert_eq!(w.stats().on_air(MsgType::PingAck), 1);
}

#[test]
fn connect_without_listener_times_out() {
    let (mut w, a, b) = quiet();
    let t = Timeouts::default();
    let err = w.sap_connect(a, w.endpoint(b, PORT), t).unwrap_err();
    assert_eq!(err, SapError::ConnectTimeout);
    assert_eq!(w.now(), t.connect_timeout);
}

#[test]
fn lost_ping_ack_is_recovered_by_retry() {
    let (mut w, a, b) = quiet();
    let dropped = Arc::new(Mutex::new(0));
    let d = dropped.clone();
    // drop every link-level try of the first PING_ACK exchange
    w.set_tap(move |f, _| {
        if f.msg == MsgType::PingAck && f.dir == Direction::Forward && *d.lock().unwrap() < 8 {
            *d.lock().unwrap() += 1;
            return false;
        }
        true
    });
    let (s, _) = connected(&mut w, a, b);
    assert_eq!(w.socket(s).unwrap().state, SocketState::Connected);
    assert_eq!(w.stats().on_air(MsgType::Ping), 2);
}

#[test]
fn duplicate_ping_is_reacknowledged() {
    let (mut w, a, b) = quiet();
    let l = w.sap_listen(b, PORT).unwrap();
    let peer = w.endpoint(b, PORT);
    let s = w.sap_connect(a, peer, Timeouts::default()).unwrap();
    // replay the PING as a retransmission would
    w.transmit(a, s.port, peer, &SapMessage::control(MsgType::Ping, 0), 0);
    w.pump();
    assert_eq!(w.stats().on_air(MsgType::PingAck), 2);
    assert_eq!(w.socket(l).unwrap().state, SocketState::Connected);
}

#[test]
fn listen_twice_on_one_port_fails() {
    let (mut w, _, b) = quiet();
    w.sap_listen(b, PORT).unwrap();
    assert_eq!(w.sap_listen(b, PORT), Err(SapError::PortInUse(PORT)));
}

#[test]
fn fin_signals_peer_closed() {
    let (mut w, a, b) = quiet();
    let (s, l) = connected(&mut w, a, b);
    w.sap_send(s, b"last", 0).unwrap();
    w.sap_close(s);
    assert!(w.socket(s).is_none());
    assert_eq!(w.stats().on_air(MsgType::FinAck), 1);
    assert_eq!(w.sap_recv(l, 10).unwrap().0, b"last");
    assert_eq!(w.sap_recv(l, 10), Err(SapError::PeerClosed));
    assert!(w.socket(l).unwrap().peer_closed_at().is_some());
}

#[test]
fn close_unresponsive_peer_after_fin_timeout() {
    let (mut w, a, b) = quiet();
    let (s, _) = connected(&mut w, a, b);
    w.set_tap(|_, _| false);
    let t0 = w.now();
    w.sap_close(s);
    assert!(w.socket(s).is_none());
    assert_eq!(w.now() - t0, Timeouts::default().fin_timeout);
}

#[test]
fn close_twice_is_noop() {
    let (mut w, a, b) = quiet();
    let (s, _) = connected(&mut w, a, b);
    w.sap_close(s);
    let (t, fins) = (w.now(), w.stats().on_air(MsgType::Fin));
    w.sap_close(s);
    assert_eq!((w.now(), w.stats().on_air(MsgType::Fin)), (t, fins));
}

#[test]
fn mode_changes() {
    let (mut w, a, b) = quiet();
    let (s, l) = connected(&mut w, a, b);
    let other = w.sap_connect(a, w.endpoint(b, PORT), Timeouts::default());
    // the listener is taken, so a second connection needs a second listener
    assert!(other.is_err() || w.socket(other.unwrap()).is_some());
    w.sap_listen(b, PORT + 1).unwrap();
    let s2 = w.sap_connect(a, w.endpoint(b, PORT + 1), Timeouts::default()).unwrap();

    w.sap_send(s, b"p0", 0).unwrap();
    w.set_mode(s, Mode::Approximate).unwrap();
    assert_eq!(w.socket(s2).unwrap().mode, Mode::Precise);
    w.sap_send(s, b"a0", 0).unwrap();
    w.set_mode(s, Mode::Precise).unwrap();
    w.sap_send(s, b"p1", 0).unwrap();
    let got: Vec<_> = drain(&mut w, l).into_iter().map(|(d, m)| (d, m.seq, m.approximate)).collect();
    assert_eq!(got, vec![(b"p0".to_vec(), 0, false), (b"a0".to_vec(), 0, true), (b"p1".to_vec(), 1, false)]);

    w.sap_close(s);
    assert_eq!(w.set_mode(s, Mode::Approximate), Err(SapError::NotConnected));
}

#[test]
fn precise_sends_use_consecutive_seqs() {
    let (mut w, a, b) = quiet();
    let (s, l) = connected(&mut w, a, b);
    for i in 0..3u8 {
        w.sap_send(s, &[i], 0).unwrap();
    }
    assert_eq!(w.socket(s).unwrap().next_tx_seq, 3);
    assert_eq!(w.stats().on_air(MsgType::Data), 3);
    assert_eq!(w.stats().on_air(MsgType::DataAck), 3);
    let got: Vec<_> = drain(&mut w, l).into_iter().map(|(d, m)| (d[0], m.seq)).collect();
    assert_eq!(got, vec![(0, 0), (1, 1), (2, 2)]);
}

#[test]
fn precise_send_times_out_on_dead_link() {
    let (mut w, a, b) = quiet();
    let (s, _) = connected(&mut w, a, b);
    w.set_tap(|_, _| false);
    assert_eq!(w.sap_send(s, b"x", 0), Err(SapError::SendTimeout));
    let budget = u64::from(Timeouts::default().retry_budget);
    assert_eq!(w.stats().exchanges[MsgType::Data.index()], budget + 1);
    assert_eq!(w.socket(s).unwrap().next_tx_seq, 0);
}

#[test]
fn approximate_damage_is_delivered_without_retransmission() {
    let (mut w, a, b) = quiet();
    let (s, l) = connected(&mut w, a, b);
    w.set_mode(s, Mode::Approximate).unwrap();
    w.set_tap(|f, bytes| {
        if f.msg == MsgType::Data && f.dir == Direction::Forward {
            for bit in [3usize, 17, 40] {
                bytes[PAYLOAD_AT + bit / 8] ^= 0x80 >> (bit % 8);
            }
        }
        true
    });
    let sent = vec![0u8; 16];
    w.sap_send(s, &sent, 0).unwrap();
    assert_eq!(w.stats().on_air(MsgType::Data), 1);
    let (got, meta) = w.sap_recv(l, 10).unwrap();
    assert!(meta.approximate);
    let diff: u32 = got.iter().zip(&sent).map(|(x, y)| (x ^ y).count_ones()).sum();
    assert_eq!(diff, 3);
}

#[test]
fn mixed_prefix_damage_triggers_sap_retransmission() {
    let (mut w, a, b) = quiet();
    let (s, l) = connected(&mut w, a, b);
    w.set_mode(s, Mode::Approximate).unwrap();
    let first = Arc::new(Mutex::new(true));
    let f1 = first.clone();
    w.set_tap(move |f, bytes| {
        if f.msg == MsgType::Data && f.dir == Direction::Forward && std::mem::take(&mut *f1.lock().unwrap()) {
            bytes[PAYLOAD_AT + 1] ^= 0x04;
        }
        true
    });
    let sent: Vec<u8> = (0..32).collect();
    w.sap_send(s, &sent, 4).unwrap();
    assert_eq!(w.stats().on_air(MsgType::Data), 2);
    let (got, meta) = w.sap_recv(l, 10).unwrap();
    assert_eq!(got, sent);
    assert_eq!(meta.seq, 0);
    assert!(meta.approximate);
    assert!(w.sap_recv(l, 10).is_err());
}

#[test]
fn prefix_longer_than_payload_is_rejected() {
    let (mut w, a, b) = quiet();
    let (s, _) = connected(&mut w, a, b);
    w.set_mode(s, Mode::Approximate).unwrap();
    assert_eq!(w.sap_send(s, b"abc", 4), Err(SapError::PrefixTooLong { prefix: 4, len: 3 }));
    assert_eq!(w.sap_send(s, &vec![0; MAX_PAYLOAD + 1], 0), Err(SapError::TooLarge(MAX_PAYLOAD + 1)));
}

#[test]
fn lost_data_ack_causes_no_redelivery() {
    let (mut w, a, b) = quiet();
    let (s, l) = connected(&mut w, a, b);
    let seen = Arc::new(Mutex::new(0));
    let n = seen.clone();
    // kill the first DATA_ACK exchange entirely
    w.set_tap(move |f, _| {
        if f.msg == MsgType::DataAck && f.dir == Direction::Forward {
            let mut n = n.lock().unwrap();
            *n += 1;
            return *n > 8;
        }
        true
    });
    w.sap_send(s, b"once", 0).unwrap();
    assert_eq!(w.stats().on_air(MsgType::Data), 2);
    assert_eq!(w.socket(l).unwrap().counters.duplicates, 1);
    assert_eq!(drain(&mut w, l).len(), 1);
}

#[test]
fn precise_without_valid_fcs_is_not_accepted() {
    let (mut w, a, b) = quiet();
    let (s, l) = connected(&mut w, a, b);
    let first = Arc::new(Mutex::new(true));
    let f1 = first.clone();
    // a flip the transport checksum cannot see: swap two covered 16-bit words
    w.set_tap(move |f, bytes| {
        if f.msg == MsgType::Data && f.dir == Direction::Forward && std::mem::take(&mut *f1.lock().unwrap()) {
            bytes.swap(PAYLOAD_AT, PAYLOAD_AT + 2);
            bytes.swap(PAYLOAD_AT + 1, PAYLOAD_AT + 3);
        }
        true
    });
    w.sap_send(s, &[1, 2, 3, 4], 0).unwrap();
    assert_eq!(w.sap_recv(l, 10).unwrap().0, vec![1, 2, 3, 4]);
}

#[test]
fn control_messages_are_fully_covered() {
    let (mut w, a, b) = world_with(ChannelParams::uniform(1e-4, 0.05, 3).unwrap(), true);
    let (s, l) = connected(&mut w, a, b);
    w.set_mode(s, Mode::Approximate).unwrap();
    for i in 0..50u32 {
        w.sap_send(s, &i.to_be_bytes().repeat(64), if i % 2 == 0 { 0 } else { 8 }).unwrap();
    }
    w.sap_close(s);
    drain(&mut w, l);
    assert_eq!(w.stats().control_partial_coverage, 0);
    for ((_, _), ledger) in w.ledgers() {
        assert!(ledger.balanced(), "{ledger:?}");
    }
}

#[test]
fn fire_and_forget_counts() {
    let (mut w, a, b) = world_with(ChannelParams::uniform(3e-5, 0.02, 9).unwrap(), true);
    let (s, _) = connected(&mut w, a, b);
    w.set_mode(s, Mode::Approximate).unwrap();
    let before = w.stats().on_air(MsgType::Data);
    for _ in 0..200 {
        w.sap_send(s, &[0xAB; 1024], 0).unwrap();
    }
    assert_eq!(w.stats().on_air(MsgType::Data) - before, 200);
    assert_eq!(w.stats().on_air(MsgType::DataAck), 0);
}

#[test]
fn mixed_prefix_integrity_exhaustive() {
    let sent: Vec<u8> = (0..12).map(|i| 0xA0 | i).collect();
    let prefix = 4;
    let bits = (COVERED_HEADERS + sent.len()) * 8;
    for bit in 0..bits {
        let (mut w, a, b) = quiet();
        let (s, l) = connected(&mut w, a, b);
        w.set_mode(s, Mode::Approximate).unwrap();
        let first = Arc::new(Mutex::new(true));
        let f1 = first.clone();
        w.set_tap(move |f, bytes| {
            if f.frame_type == FrameType::Data && f.msg == MsgType::Data && std::mem::take(&mut *f1.lock().unwrap()) {
                bytes[MAC_HEADER_LEN + bit / 8] ^= 0x80 >> (bit % 8);
            }
            true
        });
        if w.sap_send(s, &sent, prefix).is_err() {
            continue;
        }
        for (got, _) in drain(&mut w, l) {
            assert_eq!(&got[..prefix], &sent[..prefix], "bit {bit}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn precise_delivery_is_exact(
        seed in any::<u64>(),
        ber in 0.0f64..1e-3,
        p_loss in 0.0f64..0.05,
        sizes in proptest::collection::vec(1usize..400, 1..30),
    ) {
        let (mut w, a, b) = world_with(ChannelParams::uniform(ber, p_loss, seed).unwrap(), false);
        let ample = Timeouts { retry_budget: 200, ..Timeouts::default() };
        let l = w.sap_listen_with(b, PORT, ample).unwrap();
        let s = w.sap_connect(a, w.endpoint(b, PORT), ample).unwrap();
        let msgs: Vec<Vec<u8>> = sizes.iter().enumerate().map(|(i, n)| vec![i as u8; *n]).collect();
        for m in &msgs {
            w.sap_send(s, m, 0).unwrap();
        }
        let got: Vec<Vec<u8>> = drain(&mut w, l).into_iter().map(|(d, _)| d).collect();
        prop_assert_eq!(got, msgs);
        for (_, ledger) in w.ledgers() {
            prop_assert!(ledger.balanced());
        }
    }
}
