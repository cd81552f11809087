//! Config files, regime presets, grid search, the quadratic race, and the
//! CSV / `.dat` writers.

mod config;
mod grid;
mod race;
mod regimes;

pub use config::{
    ConfigError, DataSource, ExperimentConfig, GammaSetting, HyperGrid, IntSetting, ProblemConfig, StopConfig,
};
pub use grid::{
    expand_grid, loss_area, run_cell, run_grid, stop_for, Cell, GridResult, GridRow, HyperCols, RunResult,
    RunStatus, Setup, TopEntry, CSV_COLUMNS,
};
pub use race::{quadratic_race, RaceOptions, RaceResult};
pub use regimes::{regime_preset, Regime};

use std::path::Path;

use thiserror::Error;

use crate::problems::ProblemError;
use crate::sim::SimError;
use crate::timing::TimingError;
use crate::tree::TreeError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("grid: {0}")]
    Grid(String),
    #[error("writing {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<(), ExperimentError> {
    let path = dir.join(name);
    let io = |source| ExperimentError::Io {
        path: path.clone(),
        source,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(&path, contents).map_err(io)
}
