use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "covrank", version, about = "Estimate the rank of a covariance matrix by sequential CSV tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    pub format: Format,

    /// Relative tolerance of the adaptive quadrature.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub rel_tol: f64,

    /// Truncation of the infinite upper limit, in units of sigma.
    #[arg(long, global = true, default_value_t = 12.0)]
    pub tail_sigmas: f64,

    /// Worker threads for Monte Carlo replications.
    #[arg(long, global = true, env = "COVRANK_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Json,
    Tsv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the rank from a comma-separated data file (rows = observations).
    Rank(RankArgs),
    /// Tabulate per-step rejection rates over simulated datasets.
    Simulate(SimArgs),
    /// Sample the statistic at a null step and compare it with Unif(0, 1).
    Nullcheck(NullArgs),
}

#[derive(Debug, Args)]
pub struct RankArgs {
    pub data: PathBuf,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Subtract column means before forming the covariance (default).
    #[arg(long, overrides_with = "no_center")]
    pub center: bool,

    /// Use the raw second-moment matrix.
    #[arg(long, overrides_with = "center")]
    pub no_center: bool,
}

impl RankArgs {
    pub fn centered(&self) -> bool {
        !self.no_center
    }
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// TOML file with the simulation design.
    pub config: PathBuf,

    /// Overrides `alpha` from the config file.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Overrides `seed` from the config file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct NullArgs {
    #[command(flatten)]
    pub sim: SimArgs,

    /// Step to test; defaults to `true_rank + 1`.
    #[arg(long)]
    pub step: Option<usize>,

    /// Also emit every collected statistic.
    #[arg(long)]
    pub raw: bool,
}
