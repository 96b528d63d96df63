//! Tracker over the network: the sender emits one 16-byte fix (latitude and
//! longitude as big-endian IEEE-754 doubles) per `send_interval`; the receiver
//! feeds whatever arrives into a [`TrackerState`].
//!
//! Fixes are sampled on a schedule both ends know, so the receiver recovers a
//! fix's timestamp from its sequence number rather than from the payload.

use crate::sap::{Mode, SapError, StationId, Timeouts, World};
use crate::time::Micros;

use super::tracker::{ground_truth_speed, TrackPoint, TrackerState};
use super::{AppError, RECV_WAIT_US};

pub const TRACKER_PORT: u16 = 7100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerReport {
    pub cma: f64,
    pub ground_truth: f64,
    pub rel_error: f64,
    pub delivered: u64,
    pub n_missing: u64,
    pub n_rejected: u64,
    pub interarrival_mean_us: f64,
    pub interarrival_var_us2: f64,
}

pub fn encode_fix(p: &TrackPoint<f64>) -> [u8; 16] {
    let mut out = [0u8; 16];
    out[..8].copy_from_slice(&p.lat.to_be_bytes());
    out[8..].copy_from_slice(&p.lon.to_be_bytes());
    out
}

pub fn decode_fix(bytes: &[u8]) -> Option<(f64, f64)> {
    let lat = f64::from_be_bytes(bytes.get(..8)?.try_into().ok()?);
    let lon = f64::from_be_bytes(bytes.get(8..16)?.try_into().ok()?);
    Some((lat, lon))
}

pub fn tracker_run(
    world: &mut World,
    sender: StationId,
    receiver: StationId,
    trace: &[TrackPoint<f64>],
    send_interval: Micros,
    mode: Mode,
    v_max: f64,
) -> Result<TrackerReport, AppError> {
    let ground_truth = ground_truth_speed(trace)?;
    let listener = world.sap_listen(receiver, TRACKER_PORT)?;
    let sock = world.sap_connect(sender, world.endpoint(receiver, TRACKER_PORT), Timeouts::default())?;
    world.set_mode(sock, mode)?;

    let start = world.now();
    for (i, p) in trace.iter().enumerate() {
        world.idle_until(start + i as Micros * send_interval);
        world.sap_send(sock, &encode_fix(p), 0)?;
    }
    world.sap_close(sock);

    let mut state = TrackerState::<f64>::new();
    let mut arrivals = Vec::new();
    let mut delivered = 0u64;
    loop {
        let (payload, meta) = match world.sap_recv(listener, RECV_WAIT_US) {
            Ok(x) => x,
            Err(SapError::PeerClosed | SapError::RecvTimeout) => break,
            Err(e) => return Err(e.into()),
        };
        delivered += 1;
        arrivals.push(meta.arrived_at);
        let Some(sample) = trace.get(meta.seq as usize) else {
            state.n_rejected += 1;
            continue;
        };
        match decode_fix(&payload) {
            Some((lat, lon)) => {
                state.update(TrackPoint::new(lat, lon, sample.t), v_max);
            }
            None => state.n_rejected += 1,
        }
    }
    world.sap_close(listener);
    state.n_missing = (trace.len() as u64).saturating_sub(delivered);

    let gaps: Vec<f64> = arrivals.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let (mean, var) = mean_var(&gaps);
    Ok(TrackerReport {
        cma: state.cma,
        ground_truth,
        rel_error: (state.cma - ground_truth).abs() / ground_truth,
        delivered,
        n_missing: state.n_missing,
        n_rejected: state.n_rejected,
        interarrival_mean_us: mean,
        interarrival_var_us2: var,
    })
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
