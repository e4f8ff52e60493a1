use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use survey_fda::error::{Error, Result};
use survey_fda::harness::commands::{cmd_fit, cmd_generate, cmd_predict, cmd_simulate, cmd_summarize};
use survey_fda::harness::config::LoadedConfig;

/// Survey-weighted Bayesian scalar-on-function regression.
#[derive(Parser, Debug)]
#[command(name = "survey-fda", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the binomial or stick-breaking multinomial model.
    Fit(Common),
    /// Predict probabilities for new units from a fit artifact.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Fit artifact directory, overriding `predict.artifact`.
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Run the replicated subsampling study.
    Simulate(Common),
    /// Convergence diagnostics and trace tables for a fit artifact.
    Summarize {
        #[command(flatten)]
        common: Common,
        /// Fit artifact directory, overriding `summarize.artifact`.
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Write a synthetic data set in the ingest layout.
    Generate(Common),
}

fn load(common: &Common, required: bool) -> Result<Option<LoadedConfig>> {
    match &common.config {
        Some(path) => LoadedConfig::from_path(path).map(Some),
        None if required => Err(Error::Config("--config is required for this command".into())),
        None => Ok(None),
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Fit(c) | Command::Simulate(c) | Command::Generate(c) => c,
        Command::Predict { common, .. } | Command::Summarize { common, .. } => common,
    };
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Fit(c) => {
            let loaded = load(c, true)?.expect("required");
            let outcome = cmd_fit(&loaded, c.seed, &c.out)?;
            eprintln!(
                "fit: K = {} ({:.4} of variance), {} chain(s) × {} draws written to {}",
                outcome.meta.basis.k,
                outcome.meta.basis.var_explained.last().copied().unwrap_or(0.0),
                outcome.meta.chains,
                outcome.meta.draws_per_chain,
                c.out.display()
            );
        }
        Command::Predict { common, artifact } => {
            let loaded = load(common, true)?.expect("required");
            cmd_predict(&loaded, artifact.as_deref(), &common.out)?;
        }
        Command::Simulate(c) => {
            let loaded = load(c, true)?.expect("required");
            cmd_simulate(&loaded, c.seed, &c.out)?;
        }
        Command::Summarize { common, artifact } => {
            let loaded = load(common, false)?;
            cmd_summarize(loaded.as_ref(), artifact.as_deref(), &common.out)?;
        }
        Command::Generate(c) => {
            let loaded = load(c, false)?;
            cmd_generate(loaded.as_ref(), c.seed, &c.out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
