//! Rendering of results as human-readable text, JSON or TSV.
//!
//! JSON and TSV are byte-deterministic for identical inputs. Every number in
//! the human output is also present in the JSON output.

use std::io::{self, Write};

use covrank::{NullSample, RejectionTable, SequentialResult, SimulationConfig, StepOutcome};
use serde::Serialize;

use crate::args::Format;

#[derive(Debug, Serialize)]
pub struct RankReport<'a> {
    pub n: usize,
    pub p: usize,
    pub centered: bool,
    pub alpha: f64,
    pub steps: &'a [StepOutcome],
    pub rank_estimate: usize,
    pub boundary_reached: bool,
}

impl<'a> RankReport<'a> {
    pub fn new(n: usize, p: usize, centered: bool, result: &'a SequentialResult) -> Self {
        Self {
            n,
            p,
            centered,
            alpha: result.alpha,
            steps: &result.steps,
            rank_estimate: result.rank_estimate,
            boundary_reached: result.boundary_reached,
        }
    }
}

/// Rates are reported to one decimal, as percentages.
fn round_rate(rate: f64) -> f64 {
    (rate * 10.0).round() / 10.0
}

#[derive(Debug, Serialize)]
struct TableStep {
    k: usize,
    reached: usize,
    rejected: usize,
    rate_percent: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TableReport<'a> {
    config: &'a SimulationConfig,
    steps: Vec<TableStep>,
}

#[derive(Debug, Serialize)]
pub struct NullReport<'a> {
    pub k: usize,
    pub reps: usize,
    pub alpha: f64,
    pub ks_distance: f64,
    /// Asymptotic Kolmogorov approximation.
    pub ks_pvalue_approx: f64,
    pub rejection_rate: f64,
    pub config: &'a SimulationConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistics: Option<&'a [f64]>,
}

impl<'a> NullReport<'a> {
    pub fn new(sample: &'a NullSample, alpha: f64, ks_distance: f64, raw: bool) -> Self {
        Self {
            k: sample.k,
            reps: sample.statistics.len(),
            alpha,
            ks_distance,
            ks_pvalue_approx: covrank::ks_pvalue_asymptotic(ks_distance, sample.statistics.len()),
            rejection_rate: sample.rejection_rate(alpha),
            config: &sample.config,
            statistics: raw.then_some(sample.statistics.as_slice()),
        }
    }
}

fn json<T: Serialize>(out: &mut dyn Write, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(io::Error::other)?;
    writeln!(out)
}

fn decision(rejected: bool) -> &'static str {
    if rejected {
        "reject"
    } else {
        "accept"
    }
}

pub fn write_rank(out: &mut dyn Write, format: Format, report: &RankReport) -> io::Result<()> {
    match format {
        Format::Json => json(out, report),
        Format::Tsv => {
            writeln!(out, "n\t{}", report.n)?;
            writeln!(out, "p\t{}", report.p)?;
            writeln!(out, "centered\t{}", report.centered)?;
            writeln!(out, "alpha\t{}", report.alpha)?;
            writeln!(out, "rank_estimate\t{}", report.rank_estimate)?;
            writeln!(out, "boundary_reached\t{}", report.boundary_reached)?;
            writeln!(out)?;
            writeln!(out, "k\tstatistic\tdecision\tscale2\tdegenerate")?;
            for s in report.steps {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    s.k,
                    s.statistic,
                    decision(s.rejected),
                    s.scale2_used,
                    s.degenerate
                )?;
            }
            Ok(())
        }
        Format::Human => {
            writeln!(
                out,
                "n = {}, p = {}, centered = {}, alpha = {}",
                report.n, report.p, report.centered, report.alpha
            )?;
            writeln!(out, "{:>4}  {:<24}  {:<8}  {:<24}  degenerate", "k", "statistic", "decision", "scale2")?;
            for s in report.steps {
                writeln!(
                    out,
                    "{:>4}  {:<24}  {:<8}  {:<24}  {}",
                    s.k,
                    s.statistic,
                    decision(s.rejected),
                    s.scale2_used,
                    s.degenerate
                )?;
            }
            write!(out, "estimated rank: {}", report.rank_estimate)?;
            if report.boundary_reached {
                write!(out, " (every testable null rejected; rank may be {})", report.p)?;
            }
            writeln!(out)
        }
    }
}

fn rate_cell(rate: Option<f64>) -> String {
    rate.map_or_else(|| "NA".to_string(), |r| format!("{:.1}", round_rate(r)))
}

fn count_cell(reached: usize, rejected: usize) -> String {
    if reached == 0 {
        "NA".to_string()
    } else {
        format!("({rejected}/{reached})")
    }
}

fn config_line(cfg: &SimulationConfig) -> String {
    let scales: Vec<String> = cfg.resolved_factor_scales().iter().map(f64::to_string).collect();
    format!(
        "p = {}, true_rank = {}, n = {}, reps = {}, alpha = {}, t_df = {}, gap = {}, factor_scales = [{}], local_null_tau = {}, seed = {}",
        cfg.p,
        cfg.true_rank,
        cfg.n,
        cfg.reps,
        cfg.alpha,
        cfg.t_df,
        cfg.gap,
        scales.join(", "),
        cfg.local_null_tau,
        cfg.seed
    )
}

/// The table in the layout of a rejection-rate table: one column per null
/// `H0,k`, a row of rates and a row of `(rejected/reached)` counts.
pub fn write_table(out: &mut dyn Write, format: Format, table: &RejectionTable) -> io::Result<()> {
    let headers: Vec<String> = table.steps.iter().map(|s| format!("H0,{}", s.k)).collect();
    let rates: Vec<String> = table.steps.iter().map(|s| rate_cell(s.rate_percent())).collect();
    let counts: Vec<String> = table.steps.iter().map(|s| count_cell(s.reached, s.rejected)).collect();

    match format {
        Format::Json => {
            let report = TableReport {
                config: &table.config,
                steps: table
                    .steps
                    .iter()
                    .map(|s| TableStep {
                        k: s.k,
                        reached: s.reached,
                        rejected: s.rejected,
                        rate_percent: s.rate_percent().map(round_rate),
                    })
                    .collect(),
            };
            json(out, &report)
        }
        Format::Tsv => {
            writeln!(out, "\t{}", headers.join("\t"))?;
            writeln!(out, "rate_percent\t{}", rates.join("\t"))?;
            writeln!(out, "counts\t{}", counts.join("\t"))
        }
        Format::Human => {
            writeln!(out, "{}", config_line(&table.config))?;
            let width = counts.iter().chain(&headers).map(String::len).max().unwrap_or(4) + 2;
            let row = |label: &str, cells: &[String]| {
                let mut line = format!("{label:<8}");
                for c in cells {
                    line.push_str(&format!("{c:>width$}"));
                }
                line
            };
            writeln!(out, "{}", row("", &headers))?;
            writeln!(out, "{}", row("rate %", &rates))?;
            writeln!(out, "{}", row("counts", &counts))
        }
    }
}

pub fn write_null(out: &mut dyn Write, format: Format, report: &NullReport) -> io::Result<()> {
    match format {
        Format::Json => json(out, report),
        Format::Tsv => {
            writeln!(out, "k\t{}", report.k)?;
            writeln!(out, "reps\t{}", report.reps)?;
            writeln!(out, "alpha\t{}", report.alpha)?;
            writeln!(out, "ks_distance\t{}", report.ks_distance)?;
            writeln!(out, "ks_pvalue_approx\t{}", report.ks_pvalue_approx)?;
            writeln!(out, "rejection_rate\t{}", report.rejection_rate)?;
            if let Some(stats) = report.statistics {
                writeln!(out)?;
                writeln!(out, "statistic")?;
                for s in stats {
                    writeln!(out, "{s}")?;
                }
            }
            Ok(())
        }
        Format::Human => {
            writeln!(out, "{}", config_line(report.config))?;
            writeln!(out, "step k = {}, {} replications", report.k, report.reps)?;
            writeln!(out, "KS distance to Unif(0,1): {}", report.ks_distance)?;
            writeln!(out, "KS p-value (asymptotic approximation): {}", report.ks_pvalue_approx)?;
            writeln!(out, "rejection rate at alpha = {}: {}", report.alpha, report.rejection_rate)?;
            if let Some(stats) = report.statistics {
                for s in stats {
                    writeln!(out, "{s}")?;
                }
            }
            Ok(())
        }
    }
}
