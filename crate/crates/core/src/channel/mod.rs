//! Simulated wireless medium.
//!
//! A channel loses whole frames with probability `p_loss` and otherwise flips
//! every bit independently with probability `ber`. Both rates come from tables
//! keyed by (bitrate in Mbps, distance in meters) and are bilinearly
//! interpolated over the grid, clamping outside it.

mod calibration;
mod config;

pub use calibration::{default_calibration, CALIBRATION_BITRATES, CALIBRATION_DISTANCES};
pub use config::{load_channel_file, parse_channel_config, write_channel_config};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Per-link random stream. ChaCha with 8 rounds, seeded from a 64-bit value;
/// each directional link uses its own stream number of the same key so links
/// never share draws.
pub type LinkRng = ChaCha8Rng;

pub fn link_rng(seed: u64, stream: u64) -> LinkRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("channel table is empty")]
    EmptyTable,
    #[error("bit error rate {0} outside [0, 0.5]")]
    BerOutOfRange(f64),
    #[error("frame loss probability {0} outside [0, 1]")]
    LossOutOfRange(f64),
    #[error("duplicate grid point ({bitrate} Mbps, {distance} m)")]
    DuplicatePoint { bitrate: f64, distance: f64 },
    #[error("table is not a full grid: missing ({bitrate} Mbps, {distance} m)")]
    IncompleteGrid { bitrate: f64, distance: f64 },
    #[error("non-finite grid coordinate")]
    BadCoordinate,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("reading channel file: {0}")]
    Io(String),
}

/// One table entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub bitrate: f64,
    pub distance: f64,
    pub value: f64,
}

impl GridPoint {
    pub fn new(bitrate: f64, distance: f64, value: f64) -> Self {
        Self { bitrate, distance, value }
    }
}

/// Rectilinear grid over (bitrate, distance) with bilinear lookup.
#[derive(Debug, Clone, PartialEq)]
struct Grid {
    bitrates: Vec<f64>,
    distances: Vec<f64>,
    // row-major: values[b * distances.len() + d]
    values: Vec<f64>,
}

impl Grid {
    fn build(points: &[GridPoint]) -> Result<Self, ChannelError> {
        if points.is_empty() {
            return Err(ChannelError::EmptyTable);
        }
        if points.iter().any(|p| !p.bitrate.is_finite() || !p.distance.is_finite()) {
            return Err(ChannelError::BadCoordinate);
        }
        let mut bitrates: Vec<f64> = points.iter().map(|p| p.bitrate).collect();
        let mut distances: Vec<f64> = points.iter().map(|p| p.distance).collect();
        for axis in [&mut bitrates, &mut distances] {
            axis.sort_by(f64::total_cmp);
            axis.dedup();
        }
        let mut values = vec![f64::NAN; bitrates.len() * distances.len()];
        for p in points {
            let b = bitrates.iter().position(|&x| x == p.bitrate).unwrap();
            let d = distances.iter().position(|&x| x == p.distance).unwrap();
            let slot = &mut values[b * distances.len() + d];
            if !slot.is_nan() {
                return Err(ChannelError::DuplicatePoint { bitrate: p.bitrate, distance: p.distance });
            }
            *slot = p.value;
        }
        for (i, v) in values.iter().enumerate() {
            if v.is_nan() {
                return Err(ChannelError::IncompleteGrid {
                    bitrate: bitrates[i / distances.len()],
                    distance: distances[i % distances.len()],
                });
            }
        }
        Ok(Self { bitrates, distances, values })
    }

    fn at(&self, b: usize, d: usize) -> f64 {
        self.values[b * self.distances.len() + d]
    }

    fn lookup(&self, bitrate: f64, distance: f64) -> f64 {
        let (b0, b1, tb) = bracket(&self.bitrates, bitrate);
        let (d0, d1, td) = bracket(&self.distances, distance);
        let lo = lerp(self.at(b0, d0), self.at(b0, d1), td);
        let hi = lerp(self.at(b1, d0), self.at(b1, d1), td);
        lerp(lo, hi, tb)
    }

    fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        self.bitrates.iter().enumerate().flat_map(move |(b, &br)| {
            self.distances
                .iter()
                .enumerate()
                .map(move |(d, &dist)| GridPoint::new(br, dist, self.at(b, d)))
        })
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}

/// Indices of the cell bracketing `x` on a sorted axis, and the fractional
/// position inside it. Outside the axis the nearest edge is returned with t = 0.
fn bracket(axis: &[f64], x: f64) -> (usize, usize, f64) {
    let last = axis.len() - 1;
    if x.is_nan() || x <= axis[0] {
        return (0, 0, 0.0);
    }
    if x >= axis[last] {
        return (last, last, 0.0);
    }
    let hi = axis.partition_point(|&a| a <= x);
    let lo = hi - 1;
    if axis[lo] == x {
        return (lo, lo, 0.0);
    }
    (lo, hi, (x - axis[lo]) / (axis[hi] - axis[lo]))
}

/// Channel model: bit error and frame loss tables plus the RNG seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    ber: Grid,
    loss: Grid,
    pub seed: u64,
}

impl ChannelParams {
    pub fn new(ber_table: &[GridPoint], frame_loss_table: &[GridPoint], seed: u64) -> Result<Self, ChannelError> {
        for p in ber_table {
            if !(0.0..=0.5).contains(&p.value) {
                return Err(ChannelError::BerOutOfRange(p.value));
            }
        }
        for p in frame_loss_table {
            if !(0.0..=1.0).contains(&p.value) {
                return Err(ChannelError::LossOutOfRange(p.value));
            }
        }
        Ok(Self {
            ber: Grid::build(ber_table)?,
            loss: Grid::build(frame_loss_table)?,
            seed,
        })
    }

    /// Same rates everywhere.
    pub fn uniform(ber: f64, p_loss: f64, seed: u64) -> Result<Self, ChannelError> {
        Self::new(&[GridPoint::new(1.0, 1.0, ber)], &[GridPoint::new(1.0, 1.0, p_loss)], seed)
    }

    pub fn noiseless(seed: u64) -> Self {
        Self::uniform(0.0, 0.0, seed).expect("zero rates are valid")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn ber_table(&self) -> Vec<GridPoint> {
        self.ber.points().collect()
    }

    pub fn frame_loss_table(&self) -> Vec<GridPoint> {
        self.loss.points().collect()
    }

    pub fn loss_lookup(&self, bitrate: f64, distance: f64) -> f64 {
        self.loss.lookup(bitrate, distance)
    }

    pub fn conditions(&self, bitrate: f64, distance: f64) -> LinkConditions {
        LinkConditions {
            ber: self.ber.lookup(bitrate, distance),
            p_loss: self.loss.lookup(bitrate, distance),
        }
    }
}

/// Interpolated bit error rate at (bitrate, distance).
///
/// A `ChannelParams` can only be constructed from non-empty tables, so this
/// never fails on a built value; `EmptyTable` is reported for raw tables by
/// [`ber_lookup_table`].
pub fn ber_lookup(params: &ChannelParams, bitrate: f64, distance: f64) -> f64 {
    params.ber.lookup(bitrate, distance)
}

pub fn ber_lookup_table(table: &[GridPoint], bitrate: f64, distance: f64) -> Result<f64, ChannelError> {
    Ok(Grid::build(table)?.lookup(bitrate, distance))
}

/// Resolved rates for one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConditions {
    pub ber: f64,
    pub p_loss: f64,
}

impl LinkConditions {
    /// Carries one frame. Loss is decided first; a frame that survives has
    /// each bit flipped independently.
    pub fn carry(&self, rng: &mut LinkRng, frame: &[u8]) -> Option<Vec<u8>> {
        let lost = rng.random::<f64>() < self.p_loss;
        if lost {
            return None;
        }
        let mut out = frame.to_vec();
        flip_bits(rng, &mut out, self.ber);
        Some(out)
    }
}

/// Transmits `frame` over the channel at (bitrate, distance). `None` means the
/// frame was lost.
pub fn transmit(
    params: &ChannelParams,
    rng: &mut LinkRng,
    frame: &[u8],
    bitrate: f64,
    distance: f64,
) -> Option<Vec<u8>> {
    params.conditions(bitrate, distance).carry(rng, frame)
}

/// Flips each bit of `bytes` with probability `ber` and returns the number of
/// flips. Bits are numbered MSB-first within each byte.
///
/// Gaps between flips are drawn from the geometric distribution, which is
/// equivalent to one Bernoulli draw per bit but costs one draw per flip.
pub fn flip_bits(rng: &mut LinkRng, bytes: &mut [u8], ber: f64) -> usize {
    if ber <= 0.0 || bytes.is_empty() {
        return 0;
    }
    let nbits = bytes.len() as u64 * 8;
    if ber >= 1.0 {
        bytes.iter_mut().for_each(|b| *b = !*b);
        return nbits as usize;
    }
    let log_q = (-ber).ln_1p();
    let mut flips = 0;
    let mut pos = 0u64;
    loop {
        // u in (0, 1]
        let u = 1.0 - rng.random::<f64>();
        let gap = (u.ln() / log_q).floor();
        if gap >= (nbits - pos) as f64 {
            break;
        }
        pos += gap as u64;
        bytes[(pos / 8) as usize] ^= 0x80 >> (pos % 8);
        flips += 1;
        pos += 1;
        if pos >= nbits {
            break;
        }
    }
    flips
}
