//! Command-line front door: matrix construction and inspection, single
//! detection runs, threshold sweeps, recovery studies and the
//! massive-random-access experiment.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure,
//! 4 capacity or unsupported construction.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sparsecd::harness::{self, ExperimentConfig, Harness};
use sparsecd::matrices::SensingMatrix;
use sparsecd::seeding::{derive_seed, trial_rng};
use sparsecd::Error;

#[derive(Parser)]
#[command(
    name = "sparsecd",
    about = "Quickest change detection of sparse signals under compressive measurements",
    version
)]
struct Cli {
    /// Worker threads for Monte Carlo trials (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonRun {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build or inspect sensing matrices.
    Matrix {
        #[command(subcommand)]
        action: MatrixAction,
    },
    /// Run one detection and print the stopping report as JSON.
    Detect {
        #[command(flatten)]
        common: CommonRun,
        /// Record the per-step metric trace in the report.
        #[arg(long)]
        trace: bool,
    },
    /// Sweep the threshold grid and write a T_r/D_w tradeoff curve.
    Sweep {
        #[command(flatten)]
        common: CommonRun,
        /// Output CSV path (a .json sidecar is written next to it).
        #[arg(long)]
        out: PathBuf,
    },
    /// Support-recovery study at the configured run-length target.
    Recovery {
        #[command(flatten)]
        common: CommonRun,
        #[arg(long)]
        out: PathBuf,
    },
    /// Massive-random-access experiment over the [ra] section.
    Ra {
        #[command(flatten)]
        common: CommonRun,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum MatrixAction {
    /// Construct the [matrix] in the config and write it to a file.
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Write the lossless text format instead of binary.
        #[arg(long)]
        text: bool,
    },
    /// Print dimensions, construction kind and coherence of a matrix file.
    Info { path: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(common: &CommonRun) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.experiment.master_seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.experiment.trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Matrix { action } => match action {
            MatrixAction::Build {
                config,
                seed,
                out,
                text,
            } => {
                let mut cfg = ExperimentConfig::load(&config)?;
                if let Some(seed) = seed {
                    cfg.experiment.master_seed = seed;
                }
                let spec = cfg
                    .matrix
                    .ok_or_else(|| Error::Config("config is missing [matrix]".into()))?;
                let mut rng = trial_rng(derive_seed(cfg.experiment.master_seed, "matrix", 0), 0);
                let matrix = spec.build(&mut rng)?;
                if text {
                    matrix.write_text(&out)?;
                } else {
                    matrix.write_binary(&out)?;
                }
                println!(
                    "wrote {} ({}x{}, kind {}, coherence {:.6})",
                    out.display(),
                    matrix.m(),
                    matrix.n(),
                    matrix.kind(),
                    matrix.coherence()
                );
                Ok(())
            }
            MatrixAction::Info { path } => {
                let matrix = if path.extension().and_then(|e| e.to_str()) == Some("txt") {
                    SensingMatrix::read_text(&path)?
                } else {
                    SensingMatrix::read_binary(&path)?
                };
                println!(
                    "{}: {}x{} kind={} coherence={:.6}",
                    path.display(),
                    matrix.m(),
                    matrix.n(),
                    matrix.kind(),
                    matrix.coherence()
                );
                Ok(())
            }
        },
        Command::Detect { common, trace } => {
            let cfg = load_config(&common)?;
            let harness = Harness::from_config(&cfg)?;
            if cfg.detectors.is_empty() {
                return Err(Error::Config("config has no [[detector]] entries".into()));
            }
            for spec in &cfg.detectors {
                let report = harness.detect_once(*spec, trace)?;
                let json = serde_json::to_string_pretty(&report)
                    .map_err(|e| Error::Parse(e.to_string()))?;
                println!("{} {}", spec.label(), json);
            }
            Ok(())
        }
        Command::Sweep { common, out } => {
            let cfg = load_config(&common)?;
            let harness = Harness::from_config(&cfg)?;
            if cfg.detectors.is_empty() {
                return Err(Error::Config("config has no [[detector]] entries".into()));
            }
            let curves = harness.sweep(&cfg.detectors)?;
            harness::write_curves(&out, &cfg, &curves)?;
            for curve in &curves {
                println!(
                    "{}: {} points in {:.1}s",
                    curve.detector,
                    curve.points.len(),
                    curve.wall_time_s
                );
            }
            println!("wrote {} and sidecar", out.display());
            Ok(())
        }
        Command::Recovery { common, out } => {
            let cfg = load_config(&common)?;
            let params = cfg
                .recovery
                .ok_or_else(|| Error::Config("config is missing [recovery]".into()))?;
            let harness = Harness::from_config(&cfg)?;
            let results = harness.recovery_study(&cfg.detectors, params)?;
            harness::write_recovery(&out, &cfg, &results)?;
            for r in &results {
                println!(
                    "{}: tau {:.4}, T_r {:.0}, recovery {:.1}%",
                    r.detector, r.tau, r.achieved_t_r, r.recovery_pct
                );
            }
            Ok(())
        }
        Command::Ra { common, out } => {
            let cfg = load_config(&common)?;
            let harness = Harness::from_config_ra(&cfg)?;
            if cfg.detectors.is_empty() {
                return Err(Error::Config("config has no [[detector]] entries".into()));
            }
            let curves = harness.sweep(&cfg.detectors)?;
            harness::write_curves(&out, &cfg, &curves)?;
            for curve in &curves {
                println!(
                    "{}: {} points in {:.1}s",
                    curve.detector,
                    curve.points.len(),
                    curve.wall_time_s
                );
            }
            println!("wrote {} and sidecar", out.display());
            Ok(())
        }
    }
}
