//! Monte Carlo replication: per-step rejection tables and null-distribution
//! samples of the statistic.
//!
//! Replications run on a rayon pool. Each replication draws from its own
//! seed ([`replication_seed`]) and results are aggregated in index order, so
//! output does not depend on the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::dgp::{replication_seed, Generator, SimulationConfig};
use crate::error::{Error, Result};
use crate::kacrice::{csv_statistic, CsvInput, QuadratureSettings, Scale};
use crate::sequential::rank_from_data;
use crate::spectrum::{sample_covariance, symmetric_eigen};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's global pool.
    pub threads: Option<usize>,
    pub quadrature: QuadratureSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepCount {
    pub k: usize,
    pub reached: usize,
    pub rejected: usize,
}

impl StepCount {
    /// `100 · rejected / reached`, or `None` if the step was never reached.
    pub fn rate_percent(&self) -> Option<f64> {
        (self.reached > 0).then(|| 100.0 * self.rejected as f64 / self.reached as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionTable {
    pub config: SimulationConfig,
    /// Steps `k = 1..p−1`.
    pub steps: Vec<StepCount>,
}

impl RejectionTable {
    /// Builds the table from each replication's number of rejected steps.
    pub fn from_rank_estimates(config: SimulationConfig, estimates: &[usize]) -> Self {
        let steps = (1..config.p)
            .map(|k| StepCount {
                k,
                reached: estimates.iter().filter(|&&r| r + 1 >= k).count(),
                rejected: estimates.iter().filter(|&&r| r >= k).count(),
            })
            .collect();
        Self { config, steps }
    }

    pub fn step(&self, k: usize) -> Option<&StepCount> {
        self.steps.get(k.checked_sub(1)?)
    }

    /// Step 1 is reached by every replication and each later step exactly by
    /// the replications that rejected the step before it.
    pub fn is_chained(&self) -> bool {
        let Some(first) = self.steps.first() else {
            return true;
        };
        first.reached == self.config.reps
            && self.steps.iter().all(|s| s.rejected <= s.reached)
            && self.steps.windows(2).all(|w| w[1].reached == w[0].rejected)
    }
}

fn run_indexed<T, F>(reps: usize, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let work = || {
        (0..reps)
            .into_par_iter()
            .map(|i| f(i).map_err(|e| e.at_replication(i)))
            .collect::<Vec<Result<T>>>()
    };
    let results = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot build thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    // Lowest failing index wins, so errors are as deterministic as results.
    results.into_iter().collect()
}

/// Runs the sequential test on `cfg.reps` simulated datasets and tabulates
/// how often each step was reached and rejected.
pub fn run_rejection_table(cfg: &SimulationConfig, opts: &RunOptions) -> Result<RejectionTable> {
    opts.quadrature.validate()?;
    let gen = Generator::new(cfg)?;
    let estimates = run_indexed(cfg.reps, opts.threads, |i| {
        let data = gen.draw(replication_seed(cfg.seed, i as u64))?;
        Ok(rank_from_data(&data, cfg.alpha, false, &opts.quadrature)?.rank_estimate)
    })?;
    Ok(RejectionTable::from_rank_estimates(cfg.clone(), &estimates))
}

/// Values of the statistic at one fixed step across replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullSample {
    pub k: usize,
    pub statistics: Vec<f64>,
    pub config: SimulationConfig,
}

impl NullSample {
    /// Fraction of statistics `≤ alpha`.
    pub fn rejection_rate(&self, alpha: f64) -> f64 {
        if self.statistics.is_empty() {
            return f64::NAN;
        }
        self.statistics.iter().filter(|&&s| s <= alpha).count() as f64 / self.statistics.len() as f64
    }
}

/// Computes the step-`k` statistic on every replication, without sequential
/// gating. The design must be a local null for step `k`: `true_rank = k − 1`
/// and `local_null_tau > 0`.
pub fn collect_null_statistics(cfg: &SimulationConfig, k: usize, opts: &RunOptions) -> Result<NullSample> {
    opts.quadrature.validate()?;
    if k == 0 || k >= cfg.p {
        return Err(Error::InvalidConfig(format!("step k={k} outside [1, {}]", cfg.p - 1)));
    }
    if cfg.true_rank + 1 != k {
        return Err(Error::InvalidConfig(format!(
            "step {k} is a null step only for true_rank = {}, got {}",
            k - 1,
            cfg.true_rank
        )));
    }
    if cfg.local_null_tau <= 0.0 {
        return Err(Error::InvalidConfig(
            "local_null_tau must be positive: with exact rank k-1 the trailing sample eigenvalues \
             are zero and the statistic is identically 1"
                .into(),
        ));
    }
    let gen = Generator::new(cfg)?;
    let statistics = run_indexed(cfg.reps, opts.threads, |i| {
        let data = gen.draw(replication_seed(cfg.seed, i as u64))?;
        let spectrum = symmetric_eigen(&sample_covariance(&data, false), false, None)?;
        let input = CsvInput::new(spectrum.eigenvalues, k, Scale::PlugIn)?;
        csv_statistic(&input, &opts.quadrature).map_err(|e| e.at_step(k))
    })?;
    Ok(NullSample {
        k,
        statistics,
        config: cfg.clone(),
    })
}

/// Kolmogorov–Smirnov distance `sup |F_m(x) − x|` between the empirical CDF of
/// `values` and the `Unif(0, 1)` CDF.
pub fn ks_distance_uniform(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("KS distance of an empty sample".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("KS distance of a sample containing NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .fold(0.0f64, |acc, (i, &x)| {
            let cdf = x.clamp(0.0, 1.0);
            let above = (i as f64 + 1.0) / m - cdf;
            let below = cdf - i as f64 / m;
            acc.max(above).max(below)
        });
    Ok(d)
}

pub fn ks_distance(sample: &NullSample) -> Result<f64> {
    ks_distance_uniform(&sample.statistics)
}

/// Asymptotic Kolmogorov p-value for distance `d` on `m` points, with the
/// Stephens small-sample correction. Approximate.
pub fn ks_pvalue_asymptotic(d: f64, m: usize) -> f64 {
    let sm = (m as f64).sqrt();
    let lambda = (sm + 0.12 + 0.11 / sm) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}
