//! Sequential testing of `rank ≤ k−1` against `rank ≥ k` for `k = 1, 2, …`.

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kacrice::{evaluate, CsvInput, QuadratureSettings, Scale};
use crate::spectrum::{sample_covariance, symmetric_eigen, DataMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOutcome {
    pub k: usize,
    pub statistic: f64,
    pub rejected: bool,
    pub scale2_used: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequentialResult {
    pub alpha: f64,
    /// Consecutive steps from `k = 1`; all but the last are rejections.
    pub steps: Vec<StepOutcome>,
    /// Number of rejected steps.
    pub rank_estimate: usize,
    /// Every testable null (`k = 1..p−1`) was rejected.
    pub boundary_reached: bool,
}

impl SequentialResult {
    pub fn decisions(&self) -> Vec<bool> {
        self.steps.iter().map(|s| s.rejected).collect()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Tests `k = 1, 2, …` on a descending spectrum with the plug-in scale,
/// stopping at the first acceptance or after `k = p − 1`.
pub fn run_sequence(eigenvalues: &[f64], alpha: f64, q: &QuadratureSettings) -> Result<SequentialResult> {
    check_alpha(alpha)?;
    q.validate()?;
    let p = eigenvalues.len();
    if p < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 eigenvalues, got {p}")));
    }

    let mut steps = Vec::new();
    for k in 1..p {
        let input = CsvInput::new(eigenvalues.to_vec(), k, Scale::PlugIn)?;
        let eval = evaluate(&input, q).map_err(|e| e.at_step(k))?;
        let rejected = eval.statistic <= alpha;
        steps.push(StepOutcome {
            k,
            statistic: eval.statistic,
            rejected,
            scale2_used: eval.scale2,
            degenerate: eval.degenerate,
        });
        if !rejected {
            break;
        }
    }

    let rank_estimate = steps.iter().filter(|s| s.rejected).count();
    Ok(SequentialResult {
        alpha,
        boundary_reached: rank_estimate == p - 1,
        rank_estimate,
        steps,
    })
}

/// Sample covariance, spectrum and sequential test in one call.
pub fn rank_from_data(
    data: &DataMatrix,
    alpha: f64,
    center: bool,
    q: &QuadratureSettings,
) -> Result<SequentialResult> {
    let (n, p) = (data.nrows(), data.ncols());
    if n <= p {
        warn!("n = {n} does not exceed p = {p}; the test is calibrated for p < n");
    }
    let cov = sample_covariance(data, center);
    let spectrum = symmetric_eigen(&cov, false, None)?;
    run_sequence(&spectrum.eigenvalues, alpha, q)
}
