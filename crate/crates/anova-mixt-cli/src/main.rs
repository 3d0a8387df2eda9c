//! `anova-mixt` — fit, inspect, and benchmark mixed-basis ANOVA models from
//! the command line.
//!
//! Every run is seeded and reproducible: identical configuration and seed
//! yield byte-identical artifacts. Benchmark cells run in parallel; cap the
//! workers with `--threads` (`--threads 1` forces a single worker, though
//! results do not depend on the count — cells are independent).

mod bench;
mod config;
mod selftest;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use anova_mixt::experiments::DEFAULT_SEED;
use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "anova-mixt",
    version,
    about = "Interpretable function approximation with per-dimension bases",
    after_help = "Options may also come from a `key = value` file passed with \
                  --config; flags override file entries."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file with `key = value` lines (keys match flag names).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Per-dimension basis kinds, comma separated: exp, cos, or alg.
    #[arg(long, global = true, value_name = "LIST")]
    basis: Option<String>,

    /// Superposition order of the fitted family (1 or 2).
    #[arg(long, global = true, value_name = "ORDER")]
    superposition: Option<usize>,

    /// File of `u=… N=…` lines giving an explicit subset family.
    #[arg(long, global = true, value_name = "PATH")]
    family: Option<PathBuf>,

    /// Bandwidth of order-1 subsets; for `bench f1`, the grid's largest N1.
    #[arg(long, global = true, value_name = "N")]
    n1: Option<i64>,

    /// Bandwidth of order-2 subsets; for `bench f1`, the grid's largest N2.
    #[arg(long, global = true, value_name = "N")]
    n2: Option<i64>,

    /// Sensitivity threshold for truncation and the gsi cutoff column.
    #[arg(long, global = true, value_name = "THETA")]
    theta: Option<f64>,

    /// Seed for sampling, splits, and benchmark repetitions.
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,

    /// Input CSV (fit/predict) or dataset file (bench airfoil).
    #[arg(long, global = true, value_name = "PATH")]
    data: Option<PathBuf>,

    /// Model file to write (fit) or read (predict/gsi).
    #[arg(long, global = true, value_name = "PATH")]
    model: Option<PathBuf>,

    /// Output path: model file (fit), CSV (predict/gsi), directory (bench).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Worker-thread cap for parallel benchmark cells.
    #[arg(long, global = true, value_name = "COUNT")]
    threads: Option<usize>,

    /// Name of the target column (default: the last column).
    #[arg(long, global = true, value_name = "COLUMN")]
    target: Option<String>,

    /// Min-max scale the feature columns into [0,1] before fitting; the
    /// scaling is stored next to the model and reapplied on predict.
    #[arg(long, global = true)]
    normalize: bool,

    /// Run benchmarks at publication scale instead of the reduced defaults.
    #[arg(long, global = true)]
    full: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the built-in oracle suites (transform, pairing, factorization).
    Selftest,
    /// Fit a model from a CSV and write the model file.
    Fit,
    /// Evaluate a saved model on a CSV and write per-row predictions.
    Predict,
    /// Report a saved model's global sensitivity indices, largest first.
    Gsi,
    /// Reproduce one of the benchmark studies.
    Bench {
        #[arg(value_enum)]
        name: BenchName,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum BenchName {
    F1,
    F2,
    Airfoil,
}

impl Cli {
    /// The flag layer of the configuration (boolean flags count as set only
    /// when given, so file values still reach them).
    fn flag_config(&self) -> RunConfig {
        RunConfig {
            basis: self.basis.clone(),
            superposition: self.superposition,
            family: self.family.clone(),
            n1: self.n1,
            n2: self.n2,
            theta: self.theta,
            seed: self.seed,
            data: self.data.clone(),
            model: self.model.clone(),
            out: self.out.clone(),
            threads: self.threads,
            target: self.target.clone(),
            normalize: self.normalize.then_some(true),
            full: self.full.then_some(true),
        }
    }
}

fn run(cli: &Cli) -> anova_mixt::Result<bool> {
    let mut cfg = cli.flag_config();
    if let Some(path) = &cli.config {
        cfg = cfg.over(RunConfig::from_file(path)?);
    }
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| anova_mixt::Error::InvalidArgument(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Selftest => selftest::run(cfg.seed.unwrap_or(DEFAULT_SEED)),
        Command::Fit => tasks::fit(&cfg).map(|()| true),
        Command::Predict => tasks::predict(&cfg).map(|()| true),
        Command::Gsi => tasks::gsi(&cfg).map(|()| true),
        Command::Bench { name } => match name {
            BenchName::F1 => bench::f1(&cfg).map(|()| true),
            BenchName::F2 => bench::f2(&cfg).map(|()| true),
            BenchName::Airfoil => bench::airfoil(&cfg).map(|()| true),
        },
    }
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes (e.g. `anova-mixt gsi | head`)
    // instead of panicking on the failed write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
