use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use qksd_core::harness::{run_driver, ConstructionChoice, Driver, ExperimentConfig};
use qksd_core::sampling::NoiseMode;
use qksd_core::QksdError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DriverArg {
    ErrorNorms,
    SingularSpectrum,
    ThresholdSweep,
    OptimalThreshold,
    PerturbationBound,
}

impl From<DriverArg> for Driver {
    fn from(d: DriverArg) -> Self {
        match d {
            DriverArg::ErrorNorms => Driver::ErrorNorms,
            DriverArg::SingularSpectrum => Driver::SingularSpectrum,
            DriverArg::ThresholdSweep => Driver::ThresholdSweep,
            DriverArg::OptimalThreshold => Driver::OptimalThreshold,
            DriverArg::PerturbationBound => Driver::PerturbationBound,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Binomial,
    Gaussian,
    Noiseless,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConstructionArg {
    Toeplitz,
    Nontoeplitz,
    Both,
}

/// Sampling-error experiments for quantum Krylov subspace diagonalization.
#[derive(Debug, Parser)]
#[command(name = "qksd", version)]
struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    driver: DriverArg,
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Trial CSV path; the summary goes to `<stem>.summary.csv` beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    construction: Option<ConstructionArg>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

fn exit_code(err: &QksdError) -> u8 {
    match err {
        QksdError::InfeasibleBudget { .. } => 3,
        QksdError::IllPosed(_)
        | QksdError::EmptyBasis { .. }
        | QksdError::InvalidProbability(_)
        | QksdError::DimensionMismatch { .. } => 4,
        QksdError::Io(_) => 1,
        _ => 2,
    }
}

fn run(args: Args) -> Result<(), QksdError> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(mode) = args.mode {
        cfg.mode = match mode {
            ModeArg::Binomial => NoiseMode::Binomial,
            ModeArg::Gaussian => NoiseMode::Gaussian,
            ModeArg::Noiseless => NoiseMode::Noiseless,
        };
    }
    if let Some(c) = args.construction {
        cfg.construction = match c {
            ConstructionArg::Toeplitz => ConstructionChoice::Toeplitz,
            ConstructionArg::Nontoeplitz => ConstructionChoice::NonToeplitz,
            ConstructionArg::Both => ConstructionChoice::Both,
        };
    }
    cfg.validate()?;
    let driver = Driver::from(args.driver);
    let out = args
        .out
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", driver.name())));
    let written = run_driver(driver, &cfg, &out, args.workers)?;
    eprintln!(
        "{}: {} rows -> {} (summary {})",
        driver.name(),
        written.rows,
        written.trials_path.display(),
        written.summary_path.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_failures_map_to_four() {
        assert_eq!(exit_code(&QksdError::IllPosed("singular".into())), 4);
        assert_eq!(exit_code(&QksdError::EmptyBasis { epsilon: 0.1 }), 4);
        assert_eq!(exit_code(&QksdError::InvalidProbability(1.5)), 4);
        assert_eq!(exit_code(&QksdError::DimensionMismatch { expected: 2, found: 3 }), 4);
        assert_eq!(exit_code(&QksdError::InfeasibleBudget { budget: 1, required: 6 }), 3);
        assert_eq!(exit_code(&QksdError::Config("bad".into())), 2);
        assert_eq!(exit_code(&QksdError::Io("denied".into())), 1);
    }
}
