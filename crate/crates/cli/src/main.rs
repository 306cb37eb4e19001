use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use memi_cli::{CliError, FitArgs, Scenario, SimulateArgs, SummaryArgs};
use memi_core::Family;

/// Bayesian regression with measurement error and missing covariates.
#[derive(Parser)]
#[command(name = "memi", version)]
struct Cli {
    /// Only print warnings, errors and the masked-cell report.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the joint model and write draws, summaries, imputations and provenance.
    Fit(RunOpts),
    /// Fit the joint model and compare it with naive and true-covariate fits.
    Compare(RunOpts),
    /// Generate a dataset with known truth.
    Simulate(SimulateOpts),
    /// Re-render a summary from a draws file.
    Summary(SummaryOpts),
}

#[derive(Args)]
struct RunOpts {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// CSV data file.
    #[arg(long)]
    data: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the sampler seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of chains.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    #[value(name = "missing_mar")]
    MissingMar,
    #[value(name = "classical_repeats")]
    ClassicalRepeats,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gaussian,
    Binomial,
}

#[derive(Args)]
struct SimulateOpts {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Repeat columns for classical_repeats.
    #[arg(long, default_value_t = 2)]
    repeats: usize,
    /// Response family for classical_repeats.
    #[arg(long, value_enum, default_value = "binomial")]
    family: FamilyArg,
    /// Output CSV path; the truth is written next to it as <stem>.truth.toml.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SummaryOpts {
    /// draws.csv written by fit.
    #[arg(long)]
    draws: PathBuf,
    /// The configuration the draws were produced with.
    #[arg(long)]
    config: PathBuf,
    /// Directory for summary.txt and summary.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let quiet = cli.quiet;
    let run_args = |o: RunOpts| FitArgs {
        config: o.config,
        data: o.data,
        out: o.out,
        seed: o.seed,
        threads: o.threads,
        quiet,
    };
    match cli.command {
        Command::Fit(o) => memi_cli::fit(&run_args(o)).map(|_| ()),
        Command::Compare(o) => memi_cli::compare(&run_args(o)).map(|_| ()),
        Command::Simulate(o) => memi_cli::simulate(&SimulateArgs {
            scenario: match o.scenario {
                ScenarioArg::MissingMar => Scenario::MissingMar,
                ScenarioArg::ClassicalRepeats => Scenario::ClassicalRepeats,
            },
            seed: o.seed,
            n: o.n,
            repeats: o.repeats,
            family: match o.family {
                FamilyArg::Gaussian => Family::Gaussian,
                FamilyArg::Binomial => Family::Binomial,
            },
            out: o.out,
            quiet,
        }),
        Command::Summary(o) => {
            memi_cli::summary(&SummaryArgs { draws: o.draws, config: o.config, out: o.out, quiet }).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
