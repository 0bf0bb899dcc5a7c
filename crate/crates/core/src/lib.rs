//! Rank estimation for population covariance matrices.
//!
//! The pipeline is: observations → sample covariance → descending spectrum →
//! sequential conditional-singular-value (CSV) tests of `rank ≤ k−1` against
//! `rank ≥ k` for `k = 1, 2, …`. The first accepted null stops the sequence and
//! the number of rejections is the rank estimate.
//!
//! Alongside the estimator the crate ships a seeded factor-model data
//! generator and a Monte Carlo harness that tabulates per-step rejection
//! rates and checks the null distribution of the statistic against
//! `Unif(0, 1)`.

pub mod dgp;
pub mod error;
pub mod harness;
pub mod kacrice;
mod quadrature;
pub mod sequential;
pub mod spectrum;

pub use dgp::{
    generate_dataset, make_loadings, replication_seed, sample_factors_t, splitmix64, Generator,
    LoadingMatrix, SimulationConfig,
};
pub use error::{Error, Result};
pub use harness::{
    collect_null_statistics, ks_distance, ks_distance_uniform, ks_pvalue_asymptotic, run_rejection_table, NullSample,
    RejectionTable, RunOptions, StepCount,
};
pub use kacrice::{
    csv_statistic, evaluate, log_integral, log_integrand, plug_in_scale, CsvEvaluation, CsvInput,
    LogMagnitude,
    QuadratureSettings, Scale,
};
pub use sequential::{rank_from_data, run_sequence, SequentialResult, StepOutcome};
pub use spectrum::{sample_covariance, symmetric_eigen, DataMatrix, Spectrum, SymMatrix};
