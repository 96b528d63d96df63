//! Sweeps: one fresh world per (grid point, mode, trial).

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::apps::streamer::{streamer_run, StreamerConfig};
use crate::apps::trace::{synthetic_walk, SYNTHETIC_POINTS};
use crate::apps::tracker::DEFAULT_V_MAX;
use crate::apps::tracker_app::tracker_run;
use crate::apps::xfer::{xfer_fetch, MemoryStore, XferRequest};
use crate::apps::AppError;
use crate::channel::{default_calibration, ChannelParams};
use crate::sap::{Mode, World};

pub const CSV_HEADER: [&str; 7] = ["app", "bitrate", "distance", "mode", "trial", "metric", "value"];

/// Port the xfer client listens on for the server's back-connection.
const XFER_CLIENT_PORT: u16 = 9000;
const TRACKER_INTERVAL_US: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum App {
    Streamer,
    Xfer,
    Tracker,
}

impl App {
    pub fn name(self) -> &'static str {
        match self {
            App::Streamer => "streamer",
            App::Xfer => "xfer",
            App::Tracker => "tracker",
        }
    }

    /// Full-length trial counts (defaults are scaled down).
    pub fn full_trials(self) -> u32 {
        match self {
            App::Streamer => 5,
            App::Xfer => 100,
            App::Tracker => 20,
        }
    }

    pub fn default_bytes(self) -> u64 {
        match self {
            App::Streamer => 1 << 20,
            App::Xfer => 2 << 20,
            App::Tracker => 0,
        }
    }
}

impl fmt::Display for App {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for App {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "streamer" => Ok(App::Streamer),
            "xfer" => Ok(App::Xfer),
            "tracker" => Ok(App::Tracker),
            other => Err(format!("unknown app {other:?}")),
        }
    }
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Precise => "precise",
        Mode::Approximate => "approximate",
    }
}

pub fn parse_mode(s: &str) -> Result<Mode, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "precise" => Ok(Mode::Precise),
        "approximate" | "approx" => Ok(Mode::Approximate),
        other => Err(format!("unknown mode {other:?}")),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub app: App,
    pub bitrates: Vec<f64>,
    pub distances: Vec<f64>,
    pub modes: Vec<Mode>,
    pub trials: u32,
    /// Stream length (streamer) or file size (xfer); unused by the tracker.
    pub payload_bytes: u64,
    pub seed: u64,
    /// Replaces the default calibration.
    pub channel: Option<ChannelParams>,
}

impl ExperimentSpec {
    pub fn new(app: App, bitrate: f64, distance: f64, mode: Mode) -> Self {
        Self {
            app,
            bitrates: vec![bitrate],
            distances: vec![distance],
            modes: vec![mode],
            trials: 1,
            payload_bytes: app.default_bytes(),
            seed: 0,
            channel: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        if self.bitrates.is_empty() || self.distances.is_empty() || self.modes.is_empty() {
            return Err("bitrates, distances and modes must be non-empty".into());
        }
        if self.bitrates.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err("bitrates must be positive".into());
        }
        if self.distances.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err("distances must be non-negative".into());
        }
        if self.app == App::Streamer {
            StreamerConfig::new(0, self.payload_bytes).datagrams().map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub app: App,
    pub bitrate: f64,
    pub distance: f64,
    pub mode: Mode,
    pub trial: u32,
    pub metric: String,
    pub value: f64,
}

impl ExperimentRecord {
    fn sort_key(&self, other: &Self) -> std::cmp::Ordering {
        self.app
            .name()
            .cmp(other.app.name())
            .then(self.bitrate.total_cmp(&other.bitrate))
            .then(self.distance.total_cmp(&other.distance))
            .then(mode_name(self.mode).cmp(mode_name(other.mode)))
            .then(self.trial.cmp(&other.trial))
            .then(self.metric.cmp(&other.metric))
    }
}

/// splitmix64 over the seed, grid index and trial. The mode is left out so
/// both modes see the same channel draws.
pub fn derive_seed(seed: u64, grid_index: u64, trial: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(seed) ^ grid_index) ^ trial)
}

/// Runs the app once in a fresh two-station world and returns its metrics.
pub fn run_trial(
    app: App,
    channel: &ChannelParams,
    bitrate: f64,
    distance: f64,
    mode: Mode,
    payload_bytes: u64,
    sub_seed: u64,
) -> Result<Vec<(&'static str, f64)>, AppError> {
    let channel = channel.clone().with_seed(sub_seed);
    let mut world = World::new(&channel, bitrate, distance);
    let approx = mode == Mode::Approximate;
    let a = world.add_station(approx);
    let b = world.add_station(approx);
    let mut content_rng = ChaCha8Rng::seed_from_u64(sub_seed ^ 0xC0FF_EE00_D15E_A5E5);

    match app {
        App::Streamer => {
            let cfg = StreamerConfig::new(content_rng.next_u32(), payload_bytes);
            let r = streamer_run(&mut world, a, b, &cfg, mode)?;
            Ok(vec![
                ("damaged_frame_fraction", r.damaged_frame_fraction),
                ("ber_in_damaged", r.ber_in_damaged),
                ("flr", r.flr),
                ("flr_b", r.flr_b),
                ("correct_bit_fraction", r.correct_bit_fraction),
                ("retransmit_fraction", r.retransmit_fraction),
            ])
        }
        App::Xfer => {
            let mut body = vec![0u8; payload_bytes as usize];
            content_rng.fill_bytes(&mut body);
            let mut store = MemoryStore::new();
            store.insert("/image.jpg", body);
            let req = match mode {
                Mode::Approximate => XferRequest::approximate("/image.jpg", &["image/jpeg"], XFER_CLIENT_PORT),
                Mode::Precise => XferRequest {
                    force_precise: true,
                    sap_port: Some(XFER_CLIENT_PORT),
                    ..XferRequest::plain("/image.jpg")
                },
            };
            // client a, server b
            let out = xfer_fetch(&mut world, a, b, &store, &req)?;
            Ok(vec![("transfer_time", out.transfer_time_us as f64 / 1e6)])
        }
        App::Tracker => {
            let trace = synthetic_walk(SYNTHETIC_POINTS, content_rng.next_u64());
            let r = tracker_run(&mut world, a, b, &trace, TRACKER_INTERVAL_US, mode, DEFAULT_V_MAX)?;
            Ok(vec![
                ("cma", r.cma),
                ("rel_error", r.rel_error),
                ("interarrival_mean", r.interarrival_mean_us / 1e6),
                ("interarrival_var", r.interarrival_var_us2 / 1e12),
            ])
        }
    }
}

/// Every (bitrate, distance, mode, trial) of the spec, in parallel; records
/// come back sorted. A failed trial yields a single `error = 1` record.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ExperimentRecord>, String> {
    spec.validate()?;
    let channel = spec.channel.clone().unwrap_or_else(default_calibration);
    let mut jobs = Vec::new();
    for (bi, &bitrate) in spec.bitrates.iter().enumerate() {
        for (di, &distance) in spec.distances.iter().enumerate() {
            let grid_index = (bi * spec.distances.len() + di) as u64;
            for &mode in &spec.modes {
                for trial in 0..spec.trials {
                    jobs.push((grid_index, bitrate, distance, mode, trial));
                }
            }
        }
    }

    let mut records: Vec<ExperimentRecord> = jobs
        .into_par_iter()
        .flat_map_iter(|(grid_index, bitrate, distance, mode, trial)| {
            let sub_seed = derive_seed(spec.seed, grid_index, u64::from(trial));
            let metrics = run_trial(spec.app, &channel, bitrate, distance, mode, spec.payload_bytes, sub_seed)
                .unwrap_or_else(|_| vec![("error", 1.0)]);
            metrics.into_iter().map(move |(metric, value)| ExperimentRecord {
                app: spec.app,
                bitrate,
                distance,
                mode,
                trial,
                metric: metric.to_string(),
                value: if value.is_finite() { value } else { 0.0 },
            })
        })
        .collect();
    records.sort_by(|a, b| a.sort_key(b));
    Ok(records)
}

pub fn write_csv(out: impl Write, records: &[ExperimentRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.app.name().to_string(),
            r.bitrate.to_string(),
            r.distance.to_string(),
            mode_name(r.mode).to_string(),
            r.trial.to_string(),
            r.metric.clone(),
            r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
