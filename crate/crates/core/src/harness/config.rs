//! Sweep configuration: `key = value` lines, lists comma-separated, `#`
//! comments.
//!
//! ```text
//! app = streamer
//! bitrates = 1, 11, 54
//! distances = 2, 6, 12.2
//! modes = precise, approximate   # default: both
//! trials = 5                     # default: 5
//! payload_bytes = 1048576        # default: per app
//! seed = 7                       # default: 0
//! channel = lab.channel          # relative to the config file
//! ```

use std::path::Path;

use thiserror::Error;

use super::experiment::{parse_mode, App, ExperimentSpec};
use crate::channel::load_channel_file;
use crate::sap::Mode;

pub const DEFAULT_TRIALS: u32 = 5;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("missing required key {0:?}")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
}

fn list<T>(value: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(parse).collect()
}

fn number<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("not a number: {s:?}"))
}

/// Parses a sweep. A `channel` path is resolved against `base_dir`.
pub fn parse_spec(text: &str, base_dir: &Path) -> Result<ExperimentSpec, SpecError> {
    let mut app = None;
    let mut bitrates = None;
    let mut distances = None;
    let mut modes = vec![Mode::Precise, Mode::Approximate];
    let mut trials = DEFAULT_TRIALS;
    let mut payload_bytes = None;
    let mut seed = 0u64;
    let mut channel_path = None;

    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| SpecError::Line { line: i + 1, msg };
        let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
        let value = value.trim();
        match key.trim() {
            "app" => app = Some(value.parse::<App>().map_err(err)?),
            "bitrates" | "bitrate" => bitrates = Some(list(value, number::<f64>).map_err(err)?),
            "distances" | "distance" => distances = Some(list(value, number::<f64>).map_err(err)?),
            "modes" | "mode" => modes = list(value, parse_mode).map_err(err)?,
            "trials" => trials = number(value).map_err(err)?,
            "payload_bytes" | "bytes" => payload_bytes = Some(number(value).map_err(err)?),
            "seed" => seed = number(value).map_err(err)?,
            "channel" => channel_path = Some(base_dir.join(value)),
            other => return Err(err(format!("unknown key {other:?}"))),
        }
    }

    let app = app.ok_or(SpecError::Missing("app"))?;
    let channel = match channel_path {
        Some(p) => Some(load_channel_file(&p, seed).map_err(|e| SpecError::Invalid(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let spec = ExperimentSpec {
        app,
        bitrates: bitrates.ok_or(SpecError::Missing("bitrates"))?,
        distances: distances.ok_or(SpecError::Missing("distances"))?,
        modes,
        trials,
        payload_bytes: payload_bytes.unwrap_or_else(|| app.default_bytes()),
        seed,
        channel,
    };
    spec.validate().map_err(SpecError::Invalid)?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_config() {
        let text = "# sweep\napp = xfer\nbitrates = 54\ndistances = 6, 8,10\nmodes = approximate\ntrials = 20\nbytes = 4096\nseed = 9\n";
        let s = parse_spec(text, Path::new(".")).unwrap();
        assert_eq!(s.app, App::Xfer);
        assert_eq!(s.distances, vec![6.0, 8.0, 10.0]);
        assert_eq!(s.modes, vec![Mode::Approximate]);
        assert_eq!((s.trials, s.payload_bytes, s.seed), (20, 4096, 9));
        assert!(s.channel.is_none());
    }

    #[test]
    fn defaults() {
        let s = parse_spec("app=tracker\nbitrates=54\ndistances=2\n", Path::new(".")).unwrap();
        assert_eq!(s.modes.len(), 2);
        assert_eq!(s.trials, DEFAULT_TRIALS);
    }

    #[test]
    fn channel_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c.txt"), "54 1 1e-5 0.01\n").unwrap();
        let s = parse_spec("app=xfer\nbitrates=54\ndistances=1\nchannel = c.txt\n", dir.path()).unwrap();
        assert_eq!(s.channel.unwrap().conditions(54.0, 1.0).p_loss, 0.01);
    }

    #[test]
    fn errors() {
        let p = Path::new(".");
        assert!(matches!(parse_spec("bitrates=1\ndistances=1\n", p), Err(SpecError::Missing("app"))));
        assert!(matches!(parse_spec("app=xfer\ncolour=red\n", p), Err(SpecError::Line { line: 2, .. })));
        assert!(matches!(parse_spec("app=xfer\nbitrates=x\n", p), Err(SpecError::Line { .. })));
        assert!(matches!(parse_spec("app=xfer\nbitrates=1\ndistances=1\ntrials=0\n", p), Err(SpecError::Invalid(_))));
        assert!(matches!(parse_spec("app=xfer\nbitrates=1\ndistances=1\nchannel=nope\n", p), Err(SpecError::Invalid(_))));
    }
}
