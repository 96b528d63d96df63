//! Location tracker: a running average of walking speed computed from GPS
//! fixes that may arrive damaged, with a plausibility bound on speed.

use crate::scalar::Real;

use super::AppError;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
/// Average speed over a 100 m world-record sprint.
pub const DEFAULT_V_MAX: f64 = 10.44;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint<T> {
    pub lat: T,
    pub lon: T,
    pub t: T,
}

impl<T: Real> TrackPoint<T> {
    pub fn new(lat: T, lon: T, t: T) -> Self {
        Self { lat, lon, t }
    }

    /// Finite coordinates within the usual latitude/longitude ranges.
    pub fn is_plausible(&self) -> bool {
        let ninety = T::lit(90.0);
        let one_eighty = T::lit(180.0);
        self.lat.is_finite()
            && self.lon.is_finite()
            && self.t.is_finite()
            && self.lat.abs() <= ninety
            && self.lon.abs() <= one_eighty
    }
}

/// Great-circle distance in meters.
pub fn haversine_distance<T: Real>(a: &TrackPoint<T>, b: &TrackPoint<T>) -> T {
    let half = T::lit(0.5);
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat * half).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon * half).sin().powi(2);
    T::lit(2.0 * EARTH_RADIUS_M) * h.sqrt().min(T::one()).asin()
}

pub fn haversine_speed<T: Real>(a: &TrackPoint<T>, b: &TrackPoint<T>) -> Result<T, AppError> {
    let dt = b.t - a.t;
    if dt.is_nan() || dt <= T::zero() {
        return Err(AppError::NonMonotonicTime);
    }
    Ok(haversine_distance(a, b) / dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Update {
    /// First accepted point; no speed yet.
    Initialized,
    Accepted { speed: f64 },
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerState<T> {
    /// Cumulative moving average of accepted speed samples, m/s.
    pub cma: T,
    pub n_accepted: u64,
    pub n_rejected: u64,
    pub n_missing: u64,
    pub last_accepted: Option<TrackPoint<T>>,
}

impl<T: Real> Default for TrackerState<T> {
    fn default() -> Self {
        Self { cma: T::zero(), n_accepted: 0, n_rejected: 0, n_missing: 0, last_accepted: None }
    }
}

impl<T: Real> TrackerState<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Speed samples folded into `cma`.
    pub fn samples(&self) -> u64 {
        self.n_accepted.saturating_sub(1)
    }

    /// Feeds one fix. A fix implying a speed above `v_max` (or an impossible
    /// fix) is rejected and leaves the average untouched; the next accepted
    /// fix is measured against the last accepted one.
    pub fn update(&mut self, p: TrackPoint<T>, v_max: T) -> Update {
        if !p.is_plausible() {
            self.n_rejected += 1;
            return Update::Rejected;
        }
        let Some(last) = self.last_accepted else {
            self.last_accepted = Some(p);
            self.n_accepted = 1;
            return Update::Initialized;
        };
        let speed = match haversine_speed(&last, &p) {
            Ok(v) if v <= v_max => v,
            _ => {
                self.n_rejected += 1;
                return Update::Rejected;
            }
        };
        self.n_accepted += 1;
        let n = T::from_u64(self.samples()).expect("count representable");
        self.cma = self.cma + (speed - self.cma) / n;
        self.last_accepted = Some(p);
        Update::Accepted { speed: speed.to_f64().unwrap_or(f64::NAN) }
    }
}

pub fn tracker_update<T: Real>(mut state: TrackerState<T>, p: TrackPoint<T>, v_max: T) -> TrackerState<T> {
    state.update(p, v_max);
    state
}

/// Mean of the per-segment speeds of a clean trace.
pub fn ground_truth_speed<T: Real>(trace: &[TrackPoint<T>]) -> Result<T, AppError> {
    if trace.len() < 2 {
        return Err(AppError::InvalidConfig("trace needs at least two points".into()));
    }
    let mut sum = T::zero();
    for w in trace.windows(2) {
        sum = sum + haversine_speed(&w[0], &w[1])?;
    }
    Ok(sum / T::from_count(trace.len() - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(lat: f64, lon: f64, t: f64) -> TrackPoint<f64> {
        TrackPoint::new(lat, lon, t)
    }

    /// Point `meters` north of the equator origin at time `t`.
    fn north(meters: f64, t: f64) -> TrackPoint<f64> {
        pt((meters / EARTH_RADIUS_M).to_degrees(), 0.0, t)
    }

    #[test]
    fn speed_examples() {
        assert_eq!(haversine_speed(&pt(1.0, 2.0, 0.0), &pt(1.0, 2.0, 10.0)).unwrap(), 0.0);
        let a = pt(0.0, 0.0, 0.0);
        let v = haversine_speed(&a, &pt(0.001, 0.0, 100.0)).unwrap();
        assert!((v - 1.112).abs() < 0.001, "{v}");
        let v = haversine_speed(&a, &pt(0.001, 0.0, 10.0)).unwrap();
        assert!((v - 11.12).abs() < 0.01 && v > DEFAULT_V_MAX, "{v}");
        assert_eq!(haversine_speed(&a, &pt(0.0, 0.0, 0.0)), Err(AppError::NonMonotonicTime));
    }

    #[test]
    fn single_precision_agrees() {
        let a = TrackPoint::<f32>::new(0.0, 0.0, 0.0);
        let b = TrackPoint::<f32>::new(0.001, 0.0, 100.0);
        assert!((haversine_speed(&a, &b).unwrap() - 1.112).abs() < 0.002);
    }

    #[test]
    fn cma_is_running_mean() {
        let mut s = TrackerState::new();
        assert_eq!(s.update(north(0.0, 0.0), DEFAULT_V_MAX), Update::Initialized);
        s.update(north(1.0, 1.0), DEFAULT_V_MAX);
        s.update(north(3.0, 2.0), DEFAULT_V_MAX);
        s.update(north(6.0, 3.0), DEFAULT_V_MAX);
        assert!((s.cma - 2.0).abs() < 1e-9, "{}", s.cma);
        assert_eq!(s.samples(), 3);
    }

    #[test]
    fn fast_point_is_rejected_without_effect() {
        let mut s = TrackerState::new();
        s.update(north(0.0, 0.0), DEFAULT_V_MAX);
        s.update(north(1.0, 1.0), DEFAULT_V_MAX);
        let before = s;
        assert_eq!(s.update(north(16.0, 2.0), DEFAULT_V_MAX), Update::Rejected);
        assert_eq!(s.cma, before.cma);
        assert_eq!(s.last_accepted, before.last_accepted);
        assert_eq!(s.n_rejected, 1);
        // next fix measured against the last accepted one, over the gap
        s.update(north(5.0, 3.0), DEFAULT_V_MAX);
        assert!((s.cma - 1.5).abs() < 1e-9);
    }

    #[test]
    fn garbage_is_rejected() {
        let mut s = TrackerState::new();
        for p in [pt(f64::NAN, 0.0, 0.0), pt(91.0, 0.0, 0.0), pt(0.0, 1e300, 0.0)] {
            assert_eq!(s.update(p, DEFAULT_V_MAX), Update::Rejected);
        }
        assert_eq!(s.n_rejected, 3);
        assert!(s.last_accepted.is_none());
        s.update(north(0.0, 5.0), DEFAULT_V_MAX);
        assert_eq!(s.update(north(1.0, 5.0), DEFAULT_V_MAX), Update::Rejected);
    }
}
