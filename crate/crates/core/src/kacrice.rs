//! The conditional-singular-value (CSV) statistic for step `k`.
//!
//! With eigenvalues `λ₁ ≥ … ≥ λ_p` and `λ₀ = ∞`, the statistic is the ratio
//!
//! ```text
//!        ∫_{λ_k}^{λ_{k-1}}   g(u) du
//! S_k = ---------------------------,    g(u) = exp(-u²/(2σ²)) ∏_{j≠k} |u² − λ_j²|
//!        ∫_{λ_{k+1}}^{λ_{k-1}} g(u) du
//! ```
//!
//! where `σ²` is either supplied or the plug-in `Σ_{j≥k} λ_j² / (p(p−k+1))`.
//! Small values are evidence that `λ_k` is large relative to its neighbours.
//!
//! `g` spans hundreds of orders of magnitude for moderate `p`, so it is only
//! ever handled through `log g`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_log, log_sum_exp};

/// Noise scale used inside the Gaussian factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    /// Estimate `σ²` from the trailing eigenvalues.
    PlugIn,
    /// A known `σ²`; must be positive.
    Explicit(f64),
}

/// Validated input to the statistic: a descending nonnegative spectrum, a
/// 1-based step index and a scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvInput {
    eigenvalues: Vec<f64>,
    k: usize,
    scale: Scale,
}

impl CsvInput {
    pub fn new(eigenvalues: Vec<f64>, k: usize, scale: Scale) -> Result<Self> {
        let p = eigenvalues.len();
        if p < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 eigenvalues, got {p}")));
        }
        if k == 0 || k >= p {
            return Err(Error::InvalidInput(format!("step k={k} outside [1, {}]", p - 1)));
        }
        if eigenvalues.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::InvalidInput(
                "eigenvalues must be finite and nonnegative".into(),
            ));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("eigenvalues must be sorted descending".into()));
        }
        if let Scale::Explicit(s2) = scale {
            if !(s2 > 0.0 && s2.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "explicit scale must be positive and finite, got {s2}"
                )));
            }
        }
        Ok(Self {
            eigenvalues,
            k,
            scale,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    /// The `σ²` actually used: the explicit value or the plug-in estimate.
    pub fn scale2(&self) -> f64 {
        match self.scale {
            Scale::Explicit(s2) => s2,
            Scale::PlugIn => plug_in_scale(&self.eigenvalues, self.k),
        }
    }

    /// `λ_j` for 1-based `j`, with `λ₀ = ∞`.
    fn lambda(&self, j: usize) -> f64 {
        if j == 0 {
            f64::INFINITY
        } else {
            self.eigenvalues[j - 1]
        }
    }

    fn others(&self) -> impl Iterator<Item = f64> + '_ {
        let skip = self.k - 1;
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != skip)
            .map(|(_, &l)| l)
    }
}

/// A nonnegative quantity stored as its natural log; `-∞` is exact zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogMagnitude(f64);

impl LogMagnitude {
    pub const ZERO: Self = Self(f64::NEG_INFINITY);

    pub fn from_log(log_value: f64) -> Result<Self> {
        if log_value.is_nan() || log_value == f64::INFINITY {
            return Err(Error::InvalidInput(format!("invalid log magnitude {log_value}")));
        }
        Ok(Self(log_value))
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    /// The linear value; may overflow to `+∞` or underflow to `0`.
    pub fn value(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Cut-off for an infinite upper limit, in units of `σ` past the
    /// rightmost feature of the integrand.
    pub tail_sigmas: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_subdivisions: 2000,
            tail_sigmas: 12.0,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(Error::InvalidInput(format!(
                "rel_tol must lie in (0, 1e-2], got {}",
                self.rel_tol
            )));
        }
        if self.max_subdivisions < 8 {
            return Err(Error::InvalidInput(format!(
                "max_subdivisions must be at least 8, got {}",
                self.max_subdivisions
            )));
        }
        if !(self.tail_sigmas >= 6.0 && self.tail_sigmas.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "tail_sigmas must be at least 6, got {}",
                self.tail_sigmas
            )));
        }
        Ok(())
    }
}

/// `Σ_{j=k}^{p} λ_j² / (p (p − k + 1))` for 1-based `k`.
///
/// # Panics
///
/// If `k` is not in `1..=p`.
pub fn plug_in_scale(eigenvalues: &[f64], k: usize) -> f64 {
    let p = eigenvalues.len();
    assert!((1..=p).contains(&k), "step k={k} outside [1, {p}]");
    let tail: f64 = eigenvalues[k - 1..].iter().map(|l| l * l).sum();
    tail / (p * (p - k + 1)) as f64
}

/// `log g(u)`; `-∞` exactly when `u` coincides with some `λ_j`, `j ≠ k`.
///
/// The resolved scale must be positive.
pub fn log_integrand(u: f64, input: &CsvInput) -> f64 {
    log_integrand_with(u, input, input.scale2())
}

fn log_integrand_with(u: f64, input: &CsvInput, scale2: f64) -> f64 {
    debug_assert!(scale2 > 0.0);
    let mut acc = -u * u / (2.0 * scale2);
    for l in input.others() {
        // |u² − λ²| = |u − λ| (u + λ), avoiding cancellation in u² − λ².
        acc += (u - l).abs().ln() + (u + l).ln();
    }
    acc
}

/// `log ∫_lo^hi g(u) du`. `hi` may be `+∞`.
///
/// An infinite upper limit is cut at the larger of `lo`, the largest
/// eigenvalue and the mode of the polynomial-Gaussian envelope, plus
/// `tail_sigmas · σ`. Eigenvalues inside the interval are used as
/// subdivision breakpoints.
pub fn log_integral(lo: f64, hi: f64, input: &CsvInput, q: &QuadratureSettings) -> Result<LogMagnitude> {
    log_integral_with(lo, hi, input, input.scale2(), q)
}

fn log_integral_with(
    lo: f64,
    hi: f64,
    input: &CsvInput,
    scale2: f64,
    q: &QuadratureSettings,
) -> Result<LogMagnitude> {
    if !(lo >= 0.0) || lo.is_infinite() || hi.is_nan() || hi < lo {
        return Err(Error::InvalidInput(format!(
            "integration limits must satisfy 0 <= lo <= hi, got [{lo}, {hi}]"
        )));
    }
    if !(scale2 > 0.0) {
        return Err(Error::InvalidInput(format!("scale must be positive, got {scale2}")));
    }
    if lo == hi {
        return Ok(LogMagnitude::ZERO);
    }
    let sigma = scale2.sqrt();
    let hi = if hi.is_infinite() {
        let p = input.eigenvalues.len() as f64;
        let envelope_mode = (2.0 * (p - 1.0)).sqrt() * sigma;
        lo.max(input.eigenvalues[0]).max(envelope_mode) + q.tail_sigmas * sigma
    } else {
        hi
    };
    let quad = integrate_log(
        |u| log_integrand_with(u, input, scale2),
        lo,
        hi,
        input.eigenvalues(),
        q.rel_tol,
        q.max_subdivisions,
    )?;
    Ok(LogMagnitude(quad.log_value))
}

/// The statistic together with the scale it used and whether a degenerate
/// rule decided it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvEvaluation {
    pub statistic: f64,
    pub scale2: f64,
    /// `σ² = 0` or `λ_k = λ_{k+1}`; the statistic is then exactly 1.
    pub degenerate: bool,
}

/// The CSV statistic, in `[0, 1]`.
pub fn csv_statistic(input: &CsvInput, q: &QuadratureSettings) -> Result<f64> {
    evaluate(input, q).map(|e| e.statistic)
}

pub fn evaluate(input: &CsvInput, q: &QuadratureSettings) -> Result<CsvEvaluation> {
    q.validate()?;
    let k = input.k;
    let scale2 = input.scale2();
    let (upper, at, lower) = (input.lambda(k - 1), input.lambda(k), input.lambda(k + 1));

    if scale2 == 0.0 || at == lower {
        return Ok(CsvEvaluation {
            statistic: 1.0,
            scale2,
            degenerate: true,
        });
    }
    let done = |statistic| {
        Ok(CsvEvaluation {
            statistic,
            scale2,
            degenerate: false,
        })
    };
    if at == upper {
        return done(0.0);
    }

    // Denominator = numerator + ∫_{λ_{k+1}}^{λ_k}; splitting keeps num ≤ den exactly.
    let numerator = log_integral_with(at, upper, input, scale2, q)?.ln();
    let remainder = log_integral_with(lower, at, input, scale2, q)?.ln();
    let denominator = log_sum_exp([numerator, remainder]);
    if denominator == f64::NEG_INFINITY {
        return Err(Error::QuadratureBudget {
            subdivisions: 0,
            log_estimate: denominator,
            achieved_rel_tol: f64::NAN,
        });
    }
    done((numerator - denominator).exp().clamp(0.0, 1.0))
}
