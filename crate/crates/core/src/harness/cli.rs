//! `sap-sim`: run one app or a configured sweep and write CSV.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::parse_spec;
use super::experiment::{parse_mode, run_experiment, write_csv, App, ExperimentSpec};
use super::summary::{geometric_mean_speedup, summarize, write_summary_csv};
use crate::channel::load_channel_file;
use crate::sap::Mode;

#[derive(Parser, Debug)]
#[command(name = "sap-sim", about = "Selectively approximate transport simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Counter-hash stream; link quality metrics.
    Streamer(RunArgs),
    /// File transfer; transfer time.
    Xfer(RunArgs),
    /// GPS speed tracker; estimate quality.
    Tracker(RunArgs),
    /// Sweep described by a config file.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct Output {
    /// Records CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-group summary CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Full-length trial counts: streamer 5, xfer 100, tracker 20.
    #[arg(long)]
    full_trials: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Mbps; comma-separated for several.
    #[arg(long, value_delimiter = ',', default_value = "54")]
    bitrate: Vec<f64>,
    /// Meters; comma-separated for several.
    #[arg(long, value_delimiter = ',', default_value = "6")]
    distance: Vec<f64>,
    /// precise, approximate, or both comma-separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_mode, default_value = "precise,approximate")]
    mode: Vec<Mode>,
    #[arg(long, default_value_t = 1)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stream or file size; defaults per app.
    #[arg(long)]
    bytes: Option<u64>,
    /// Channel table replacing the default calibration.
    #[arg(long)]
    channel: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's trial count.
    #[arg(long)]
    trials: Option<u32>,
    #[command(flatten)]
    output: Output,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

/// Runs the command line; returns the process exit code (0 ok, 2 usage, 1
/// runtime failure).
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (spec, output) = match cli.command {
        Command::Streamer(a) => single(App::Streamer, a)?,
        Command::Xfer(a) => single(App::Xfer, a)?,
        Command::Tracker(a) => single(App::Tracker, a)?,
        Command::Sweep(a) => {
            let text = std::fs::read_to_string(&a.config)
                .map_err(|e| Failure::Usage(format!("{}: {e}", a.config.display())))?;
            let base = a.config.parent().unwrap_or(Path::new("."));
            let mut spec = parse_spec(&text, base).map_err(|e| Failure::Usage(format!("{}: {e}", a.config.display())))?;
            if let Some(seed) = a.seed {
                spec.seed = seed;
                spec.channel = spec.channel.map(|c| c.with_seed(seed));
            }
            if let Some(t) = a.trials {
                spec.trials = t;
            }
            (spec, a.output)
        }
    };
    execute(spec, &output)
}

fn single(app: App, a: RunArgs) -> Result<(ExperimentSpec, Output), Failure> {
    let channel = match &a.channel {
        Some(p) => Some(load_channel_file(p, a.seed).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let spec = ExperimentSpec {
        app,
        bitrates: a.bitrate,
        distances: a.distance,
        modes: a.mode,
        trials: a.trials,
        payload_bytes: a.bytes.unwrap_or_else(|| app.default_bytes()),
        seed: a.seed,
        channel,
    };
    Ok((spec, a.output))
}

fn execute(mut spec: ExperimentSpec, output: &Output) -> Result<(), Failure> {
    if output.full_trials {
        spec.trials = spec.app.full_trials();
    }
    spec.validate().map_err(Failure::Usage)?;
    let records = run_experiment(&spec).map_err(Failure::Runtime)?;

    let io_err = |p: &dyn std::fmt::Display, e: &dyn std::fmt::Display| Failure::Runtime(format!("{p}: {e}"));
    match &output.out {
        Some(path) => {
            let f = File::create(path).map_err(|e| io_err(&path.display(), &e))?;
            write_csv(BufWriter::new(f), &records).map_err(|e| io_err(&path.display(), &e))?;
        }
        None => write_csv(io::stdout().lock(), &records).map_err(|e| io_err(&"stdout", &e))?,
    }
    if let Some(path) = &output.summary {
        let rows = summarize(&records);
        let f = File::create(path).map_err(|e| io_err(&path.display(), &e))?;
        write_summary_csv(BufWriter::new(f), &rows).map_err(|e| io_err(&path.display(), &e))?;
        if let Some(g) = geometric_mean_speedup(&rows) {
            let _ = writeln!(io::stderr(), "geometric mean speedup: {g:.3}");
        }
    }
    let failed = records.iter().filter(|r| r.metric == "error").count();
    if failed > 0 {
        eprintln!("warning: {failed} trial(s) failed");
    }
    Ok(())
}
