//! Command-line front end: seeded simulation benchmarks, train/test split
//! evaluation of user CSV data, one-shot estimation, and population-model
//! export.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use covjack::benchmark::{
    emit_results, run_simulation, run_split_eval, Estimator, JackknifeSection, SimulationConfig,
    SplitEvalConfig,
};
use covjack::io::{read_data_csv, write_symmetric_csv};
use covjack::simgen::{make_model, ModelSpec};

#[derive(Parser)]
#[command(
    name = "covjack",
    about = "Covariance estimation by jackknife regression: benchmarks, split evaluation, and estimation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the seeded simulation benchmark described by a config file.
    Simulate {
        /// TOML benchmark config (see configs/desk.toml for the schema).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for records.csv and summary.csv.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker thread count; defaults to the number of cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Evaluate estimators on a data CSV by repeated train/test splits.
    SplitEval {
        /// Input data CSV: header row of feature names, then one sample per
        /// row.
        #[arg(long)]
        data: PathBuf,
        /// TOML split-eval config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for records.csv and summary.csv.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker thread count; defaults to the number of cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Estimate a covariance matrix from a data CSV and write it as CSV.
    Estimate(EstimateArgs),
    /// Export a population covariance model as CSV.
    Models {
        /// Model name: sparse, hypercorrelated, dense_07, dense_09,
        /// orthogonal, or spiked.
        #[arg(long)]
        name: String,
        /// Matrix dimension.
        #[arg(long)]
        p: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Seed for the randomized models.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct EstimateArgs {
    /// Input data CSV.
    #[arg(long)]
    data: PathBuf,
    /// Estimator name: sample, linear, knn, clustered_lr, or tree.
    #[arg(long)]
    estimator: String,
    /// Center the data (divisor n - 1); off by default, matching the
    /// mean-zero convention.
    #[arg(long)]
    center: bool,
    /// Output CSV path for the p x p estimate.
    #[arg(long)]
    out: PathBuf,
    /// Seed for the jackknife estimators' splits and regressors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Jackknife group count.
    #[arg(long)]
    groups: Option<usize>,
    /// Jackknife split repetitions.
    #[arg(long)]
    repeats: Option<usize>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            threads,
        } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = SimulationConfig::from_toml(&text)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let result = run_simulation(&cfg, threads)?;
            let (records, summary) = emit_results(&result, &out)?;
            eprintln!("wrote {} and {}", records.display(), summary.display());
            if result.failures_exceed_threshold() {
                eprintln!(
                    "warning: a cell failed on more than {:.0}% of replicates",
                    100.0 * covjack::benchmark::FAILURE_EXIT_THRESHOLD
                );
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::SplitEval {
            data,
            config,
            out,
            seed,
            threads,
        } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = SplitEvalConfig::from_toml(&text)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let label = data
                .file_stem()
                .map(|stem| stem.to_string_lossy().into_owned())
                .unwrap_or_else(|| "data".to_string());
            let (_, matrix) = read_data_csv(&data)?;
            let result = run_split_eval(&matrix, &label, &cfg, threads)?;
            let (records, summary) = emit_results(&result, &out)?;
            eprintln!("wrote {} and {}", records.display(), summary.display());
            if result.failures_exceed_threshold() {
                eprintln!(
                    "warning: a cell failed on more than {:.0}% of repeats",
                    100.0 * covjack::benchmark::FAILURE_EXIT_THRESHOLD
                );
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate(args) => {
            let overrides = JackknifeSection {
                groups: args.groups,
                repeats: args.repeats,
                ..JackknifeSection::default()
            };
            let estimator = Estimator::from_name(&args.estimator, &overrides)?;
            let (names, matrix) = read_data_csv(&args.data)?;
            let estimate = estimator.estimate(&matrix, args.center, args.seed)?;
            write_symmetric_csv(&estimate, &names, &args.out)?;
            eprintln!("wrote {}", args.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Models { name, p, out, seed } => {
            let spec = ModelSpec::by_name(&name, p, seed)?;
            let matrix = make_model(&spec)?;
            let names = covjack::io::default_feature_names(p);
            write_symmetric_csv(&matrix, &names, &out)?;
            eprintln!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
