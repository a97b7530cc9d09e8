//! Configuration-driven experiment runs and their CSV artifacts.
//!
//! Every run is split into a computation (`run_*`, returning plain data) and
//! a rendering step (`*_tables`) that turns the result into CSV tables.
//! Per-node work is spread over a rayon pool and collected in node order, so
//! the tables do not depend on the number of workers.

mod config;
mod output;
mod runner;
mod table;

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use config::{
    parse_config, parse_config_with_preset, CollocationConfig, ExperimentConfig, FluxConfig, GridConfig, InitialConfig,
    OutputConfig, ProblemConfig, RegularityConfig, TimeConfig, PRESETS,
};
pub use output::{compare_tables, detect_tables, regularity_tables, solve_tables, track_tables, validate_tables};
pub use runner::{
    pool, run_compare, run_detect, run_regularity, run_solve, run_track, run_validate, sample_times, solve_at,
    surface_times, track_at, CompareOutcome, DecayEntry, DetectOutcome, DetectionSample, NodeRecord, NodeSurface,
    QueryOutcome, RegularityOutcome, SolveOutcome, Timings, TrackOutcome, VALIDATION_POINTS,
};
pub use table::{format_float, Cell, CsvTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl ExperimentError {
    pub(crate) fn config(path: &str, message: impl Into<String>) -> Self {
        Self::Config { path: path.into(), message: message.into() }
    }
}

/// A named CSV table ready to be written.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub table: CsvTable,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    workers: usize,
    files: Vec<&'a str>,
    runtime_seconds: serde_json::Map<String, serde_json::Value>,
    config: &'a ExperimentConfig,
}

/// Write the artifacts into `dir` together with `manifest.json`.
///
/// Runtimes and the worker count only go into the manifest, keeping the
/// CSV bytes reproducible.
pub fn write_run(
    dir: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    artifacts: &[Artifact],
    timings: &Timings,
    workers: usize,
) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for a in artifacts {
        let path = dir.join(&a.name);
        a.table.write(&path, cfg.output.precision)?;
        written.push(path);
    }
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        workers,
        files: artifacts.iter().map(|a| a.name.as_str()).collect(),
        runtime_seconds: timings.iter().map(|(k, v)| (k.clone(), serde_json::json!(v))).collect(),
        config: cfg,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    written.push(path);
    Ok(written)
}
