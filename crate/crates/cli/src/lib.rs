//! The `covrank` command line.
//!
//! Exit codes: 0 success, 1 statistical workflow error (invalid or degenerate
//! design), 2 I/O or parse error, 3 numerical failure. Errors are reported as
//! a single line `error: kind=<kind>: <message>` on stderr.

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use covrank::{
    collect_null_statistics, ks_distance, rank_from_data, run_rejection_table, QuadratureSettings,
    RunOptions, SimulationConfig,
};

pub mod args;
pub mod input;
pub mod output;

use args::{Cli, Command, CommonArgs, NullArgs, RankArgs, SimArgs};
use output::{NullReport, RankReport};

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Parse(String),
    Workflow(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Workflow(_) => 1,
            CliError::Io(_) | CliError::Parse(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Parse(_) => "parse",
            CliError::Workflow(_) => "workflow",
            CliError::Numerical(_) => "numerical",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Parse(m) | CliError::Workflow(m) | CliError::Numerical(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let one_line = self.message().replace('\n', " ");
        write!(f, "error: kind={}: {}", self.kind(), one_line)
    }
}

impl From<covrank::Error> for CliError {
    fn from(e: covrank::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Workflow(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(format!("writing output: {e}"))
    }
}

fn quadrature(common: &CommonArgs) -> Result<QuadratureSettings, CliError> {
    let q = QuadratureSettings {
        rel_tol: common.rel_tol,
        tail_sigmas: common.tail_sigmas,
        ..QuadratureSettings::default()
    };
    q.validate()?;
    Ok(q)
}

fn run_options(common: &CommonArgs) -> Result<RunOptions, CliError> {
    if common.threads == Some(0) {
        return Err(CliError::Parse("--threads must be at least 1".into()));
    }
    Ok(RunOptions {
        threads: common.threads,
        quadrature: quadrature(common)?,
    })
}

fn load_config(args: &SimArgs) -> Result<SimulationConfig, CliError> {
    let mut cfg = input::read_config(&args.config)?;
    if let Some(alpha) = args.alpha {
        cfg.alpha = alpha;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    // Materialize defaults so the reported config is complete.
    cfg.factor_scales = Some(cfg.resolved_factor_scales());
    cfg.validate()?;
    Ok(cfg)
}

fn rank(args: &RankArgs, common: &CommonArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let q = quadrature(common)?;
    let data = input::read_data(&args.data)?;
    let result = rank_from_data(&data, args.alpha, args.centered(), &q)?;
    let report = RankReport::new(data.nrows(), data.ncols(), args.centered(), &result);
    output::write_rank(out, common.format, &report)?;
    Ok(())
}

fn simulate(args: &SimArgs, common: &CommonArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let opts = run_options(common)?;
    let cfg = load_config(args)?;
    let table = run_rejection_table(&cfg, &opts)?;
    output::write_table(out, common.format, &table)?;
    Ok(())
}

fn nullcheck(args: &NullArgs, common: &CommonArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let opts = run_options(common)?;
    let cfg = load_config(&args.sim)?;
    let k = args.step.unwrap_or(cfg.true_rank + 1);
    let sample = collect_null_statistics(&cfg, k, &opts)?;
    if sample.statistics.is_empty() {
        return Err(CliError::Workflow("reps must be positive for nullcheck".into()));
    }
    let d = ks_distance(&sample)?;
    output::write_null(out, common.format, &NullReport::new(&sample, cfg.alpha, d, args.raw))?;
    Ok(())
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{e}");
            return code;
        }
    };
    let result = match &cli.command {
        Command::Rank(a) => rank(a, &cli.common, out),
        Command::Simulate(a) => simulate(a, &cli.common, out),
        Command::Nullcheck(a) => nullcheck(a, &cli.common, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}
