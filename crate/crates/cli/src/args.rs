use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "mumle",
    version,
    about = "Estimators and Monte Carlo experiments for nuisance-parameter model families",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Estimate the interest parameter from a data file
    Estimate(EstimateArgs),
    /// Run a Monte Carlo experiment described by a config file
    Simulate(SimulateArgs),
    /// Simulate the score diagnostics: regularity at the true nuisance
    /// value and the systematic shift after plugging in its estimate
    PathologyCheck(PathologyArgs),
    /// Merge simulation JSON outputs into one plot-ready CSV
    Report(ReportArgs),
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Data file: one observation per line, blank lines separate groups
    pub data: PathBuf,

    /// Model family (normal, neyman-scott, shifted-exponential,
    /// pareto-rate, pareto-scale, gamma-two-param)
    #[arg(long, value_name = "NAME")]
    pub family: String,

    /// Estimator to run, repeatable: mle, mumle, mml87, mml87:<exponent>,
    /// firth. Defaults to "mle" and "mumle" when no flag is given.
    #[arg(long = "estimator", value_name = "TOKEN")]
    pub estimators: Vec<String>,

    /// Run every estimator the family supports
    #[arg(long, conflicts_with = "estimators")]
    pub all: bool,

    /// Write the JSON report here instead of stdout
    #[arg(long, short = 'o', value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Flat key = value config file (keys: family, theta, psi, n, m,
    /// replicates, seed, estimators)
    pub config: PathBuf,

    /// CSV output path; a .json mirror is written with the same stem.
    /// Defaults to "<config stem>-results.csv" in the current directory.
    #[arg(long, short = 'o', value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Override the config seed (wins over the MU_SEED variable)
    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker threads; results are identical for any value
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Args)]
pub struct PathologyArgs {
    /// Model family (gamma-two-param has no score diagnostics)
    #[arg(long, value_name = "NAME")]
    pub family: String,

    /// True nuisance value, replicated across groups where applicable
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,

    /// True interest value
    #[arg(long, default_value_t = 1.0)]
    pub psi: f64,

    /// Sample size (group count for neyman-scott)
    #[arg(long)]
    pub n: usize,

    /// Observations per group, neyman-scott only
    #[arg(long)]
    pub m: Option<usize>,

    /// Monte Carlo replicates, at least 10000
    #[arg(long, default_value_t = 100_000)]
    pub replicates: u64,

    /// Generator seed; falls back to MU_SEED, then to 0
    #[arg(long)]
    pub seed: Option<u64>,

    /// Treat the nuisance as known: only the true-parameter check runs,
    /// so no plug-in shift can arise
    #[arg(long)]
    pub known_theta: bool,

    /// Worker threads; results are identical for any value
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,

    /// Write the JSON report here (PASS/FAIL lines always go to stdout)
    #[arg(long, short = 'o', value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// JSON outputs of `mumle simulate`
    #[arg(required = true, value_name = "RESULTS.json")]
    pub inputs: Vec<PathBuf>,

    /// Merge inputs even when they cover different families
    #[arg(long)]
    pub allow_mixed: bool,

    /// Write the merged CSV here instead of stdout
    #[arg(long, short = 'o', value_name = "PATH")]
    pub output: Option<PathBuf>,
}
