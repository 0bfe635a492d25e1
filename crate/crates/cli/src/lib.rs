//! Command-line front end for the fockwise simulator.
//!
//! `simulate` runs one configured experiment and writes a scan CSV plus a
//! JSON result document; `fit` fits the dip model to a scan CSV.

pub mod config;
pub mod csvio;
pub mod error;
pub mod run;

pub use config::{ExperimentKind, RunConfig};
pub use error::CliError;
pub use run::{fit_file, simulate, Outcome, SimulateOptions, OUT_DIR_ENV};
