//! Experiment drivers, configuration and CSV output.

pub mod config;
pub mod drivers;
pub mod records;
pub mod system;

use std::path::{Path, PathBuf};

pub use config::{ConstructionChoice, ExperimentConfig};
pub use drivers::{
    fit_slope, normalized_norm_slope, run_ensemble, run_singular_spectrum, run_threshold_sweep,
    CellSummary, Driver, EnsembleRun, SpectrumRecord, SpectrumRun, SpectrumSummary, SweepRecord,
    SweepRun, SweepSummary,
};
pub use records::{summary_path, RunMeta};
pub use system::{evaluate_trial, prepare_systems, Cell, PreparedSystem, TrialRecord};

use crate::error::{QksdError, Result};
use drivers::*;
use records::write_table_to_path;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Paths written by [`run_driver`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub trials_path: PathBuf,
    pub summary_path: PathBuf,
    pub rows: usize,
}

/// Runs `f` on a dedicated pool with `workers` threads (0 = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| QksdError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs a driver and writes its trial CSV to `out` and the summary CSV next to it.
pub fn run_driver(driver: Driver, cfg: &ExperimentConfig, out: &Path, workers: usize) -> Result<RunOutput> {
    let meta = RunMeta { config_hash: cfg.hash(), seed: cfg.seed, version: VERSION };
    let summary = summary_path(out);
    let rows = with_workers(workers, || -> Result<usize> {
        match driver {
            Driver::ErrorNorms | Driver::OptimalThreshold | Driver::PerturbationBound => {
                let run = run_ensemble(cfg)?;
                let (trial_cols, summary_cols) = match driver {
                    Driver::ErrorNorms => (ERROR_NORM_TRIAL_COLUMNS, ERROR_NORM_SUMMARY_COLUMNS),
                    Driver::OptimalThreshold => {
                        (OPTIMAL_THRESHOLD_TRIAL_COLUMNS, OPTIMAL_THRESHOLD_SUMMARY_COLUMNS)
                    }
                    _ => (PERTURBATION_TRIAL_COLUMNS, PERTURBATION_SUMMARY_COLUMNS),
                };
                write_table_to_path(out, &meta, trial_cols, &run.records)?;
                write_table_to_path(&summary, &meta, summary_cols, &run.summaries)?;
                Ok(run.records.len())
            }
            Driver::SingularSpectrum => {
                let run = run_singular_spectrum(cfg)?;
                write_table_to_path(out, &meta, SPECTRUM_TRIAL_COLUMNS, &run.records)?;
                write_table_to_path(&summary, &meta, SPECTRUM_SUMMARY_COLUMNS, &run.summaries)?;
                Ok(run.records.len())
            }
            Driver::ThresholdSweep => {
                let run = run_threshold_sweep(cfg)?;
                write_table_to_path(out, &meta, SWEEP_TRIAL_COLUMNS, &run.records)?;
                write_table_to_path(&summary, &meta, SWEEP_SUMMARY_COLUMNS, &run.summaries)?;
                Ok(run.records.len())
            }
        }
    })??;
    Ok(RunOutput { trials_path: out.to_path_buf(), summary_path: summary, rows })
}
