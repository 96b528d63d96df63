//! GPS traces: a synthetic walking trace and `lat,lon,t` CSV files.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tracker::{TrackPoint, EARTH_RADIUS_M};
use super::AppError;

pub const SYNTHETIC_POINTS: usize = 945;

/// A 1 Hz walk with a wandering heading and per-step speeds drawn uniformly
/// from 0.8..2.2 m/s.
pub fn synthetic_walk(points: usize, seed: u64) -> Vec<TrackPoint<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lat, mut lon) = (47.6553_f64, -122.3035_f64);
    let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mut out = Vec::with_capacity(points);
    for i in 0..points {
        out.push(TrackPoint::new(lat, lon, i as f64));
        heading += rng.random_range(-0.35..0.35);
        let step = rng.random_range(0.8..2.2);
        let dlat = step * heading.cos() / EARTH_RADIUS_M;
        let dlon = step * heading.sin() / (EARTH_RADIUS_M * lat.to_radians().cos());
        lat += dlat.to_degrees();
        lon += dlon.to_degrees();
    }
    out
}

pub fn read_trace_csv(reader: impl Read) -> Result<Vec<TrackPoint<f64>>, AppError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| AppError::InvalidConfig(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["lat", "lon", "t"] {
        return Err(AppError::InvalidConfig("trace header must be lat,lon,t".into()));
    }
    let mut out: Vec<TrackPoint<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| AppError::InvalidConfig(e.to_string()))?;
        let field = |k: usize| -> Result<f64, AppError> {
            rec.get(k)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| AppError::InvalidConfig(format!("trace row {}: bad field {k}", i + 1)))
        };
        let p = TrackPoint::new(field(0)?, field(1)?, field(2)?);
        if !p.is_plausible() {
            return Err(AppError::InvalidConfig(format!("trace row {}: coordinates out of range", i + 1)));
        }
        if out.last().is_some_and(|q| q.t >= p.t) {
            return Err(AppError::NonMonotonicTime);
        }
        out.push(p);
    }
    Ok(out)
}

pub fn write_trace_csv(writer: impl Write, trace: &[TrackPoint<f64>]) -> Result<(), AppError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| AppError::Io(e.to_string());
    w.write_record(["lat", "lon", "t"]).map_err(io)?;
    for p in trace {
        w.write_record([p.lat.to_string(), p.lon.to_string(), p.t.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| AppError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::tracker::haversine_speed;

    #[test]
    fn synthetic_speeds_in_walking_range() {
        let trace = synthetic_walk(SYNTHETIC_POINTS, 3);
        assert_eq!(trace.len(), 945);
        for w in trace.windows(2) {
            let v = haversine_speed(&w[0], &w[1]).unwrap();
            assert!((0.79..2.21).contains(&v), "{v}");
        }
        assert_eq!(trace, synthetic_walk(SYNTHETIC_POINTS, 3));
    }

    #[test]
    fn csv_round_trip() {
        let trace = synthetic_walk(20, 1);
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        assert!(buf.starts_with(b"lat,lon,t\n"));
        assert_eq!(read_trace_csv(&buf[..]).unwrap(), trace);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(read_trace_csv(&b"x,y,z\n1,2,3\n"[..]).is_err());
        assert!(read_trace_csv(&b"lat,lon,t\n1,2,3\n1,2,3\n"[..]).is_err());
        assert!(read_trace_csv(&b"lat,lon,t\n100,2,3\n"[..]).is_err());
    }
}
