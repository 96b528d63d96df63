//! Experiment sweeps over bitrate × distance × mode, CSV output, summaries
//! and the `sap-sim` command line.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod stats;
pub mod summary;

pub use config::{parse_spec, SpecError};
pub use experiment::{derive_seed, run_experiment, run_trial, write_csv, App, ExperimentRecord, ExperimentSpec, CSV_HEADER};
pub use summary::{geometric_mean_speedup, summarize, SummaryRow};
