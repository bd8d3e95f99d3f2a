//! Experiment harness for `ropo-core`: TOML configs, seeded parallel runs,
//! CSV and SVG outputs, run metadata and checkpoints. The `ropo` binary is
//! a thin command-line layer over this library.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod format;
pub mod inner;
pub mod metadata;
pub mod output;
pub mod plot;
pub mod report;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use runner::{run_experiment, PreparedRun, Row, RunResult};
