//! Std companion to `uncolorable-core`: image and model file formats, the
//! synthetic training corpus, dataset ingestion, the TOML experiment config
//! and the evaluation matrix, plus the `uncolorable` binary built on top.

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod io;
pub mod model_io;
pub mod synth;

pub use error::{CliError, Result};
