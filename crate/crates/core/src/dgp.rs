//! Factor-model data generation `X = A Z` with multivariate-t factors.
//!
//! # Reproducibility
//!
//! All randomness comes from ChaCha20 streams seeded with 64-bit values:
//!
//! * replication `i` of a run with master seed `s` uses
//!   [`replication_seed`]`(s, i)`;
//! * inside one dataset seed, the loadings, the factors and the local-null
//!   disturbance each get their own stream, keyed by
//!   `splitmix64(seed ^ TAG)` with a fixed tag per component.
//!
//! The loading matrix of a simulation is drawn once from the master seed and
//! shared by every replication; only `Z` and the disturbance are redrawn.

use log::warn;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::DataMatrix;

const TAG_LOADINGS: u64 = 0x6c6f_6164_696e_6773; // "loadings"
const TAG_FACTORS: u64 = 0x6661_6374_6f72_7321; // "factors!"
const TAG_NOISE: u64 = 0x6e6f_6973_652d_2d2d; // "noise---"
const MAX_FRAME_ATTEMPTS: usize = 8;

/// SplitMix64 output function.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of replication `index` under `master`. Independent of thread count
/// and scheduling order.
pub fn replication_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

fn stream(seed: u64, tag: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(splitmix64(seed ^ tag))
}

fn default_alpha() -> f64 {
    0.05
}
fn default_t_df() -> f64 {
    5.0
}
fn default_gap() -> f64 {
    1.0
}

/// Parameters of one simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub p: usize,
    /// Number of factors; `0` gives pure local-null noise.
    pub true_rank: usize,
    pub n: usize,
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_t_df")]
    pub t_df: f64,
    /// Minimum gap between consecutive leading population eigenvalues.
    #[serde(default = "default_gap")]
    pub gap: f64,
    /// Population eigenvalues of the factor part, descending. Defaults to
    /// `(k, k−1, …, 1) · gap`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_scales: Option<Vec<f64>>,
    /// Trailing population eigenvalues are `local_null_tau / √n`.
    #[serde(default)]
    pub local_null_tau: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SimulationConfig {
    /// A config with every optional field at its default.
    pub fn new(p: usize, true_rank: usize, n: usize, reps: usize) -> Self {
        Self {
            p,
            true_rank,
            n,
            reps,
            alpha: default_alpha(),
            t_df: default_t_df(),
            gap: default_gap(),
            factor_scales: None,
            local_null_tau: 0.0,
            seed: 0,
        }
    }

    pub fn resolved_factor_scales(&self) -> Vec<f64> {
        match &self.factor_scales {
            Some(s) => s.clone(),
            None => (1..=self.true_rank).rev().map(|j| j as f64 * self.gap).collect(),
        }
    }

    /// `τ / √n`.
    pub fn trailing_eigenvalue(&self) -> f64 {
        self.local_null_tau / (self.n as f64).sqrt()
    }

    /// Population eigenvalues, descending.
    pub fn population_eigenvalues(&self) -> Vec<f64> {
        let mut eigs = self.resolved_factor_scales();
        eigs.resize(self.p, self.trailing_eigenvalue());
        eigs
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.p < 2 {
            return bad(format!("p must be at least 2, got {}", self.p));
        }
        if self.true_rank > self.p {
            return bad(format!("true_rank {} exceeds p = {}", self.true_rank, self.p));
        }
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        check_t_df(self.t_df)?;
        if !(self.gap > 0.0 && self.gap.is_finite()) {
            return bad(format!("gap must be positive, got {}", self.gap));
        }
        if !(self.local_null_tau >= 0.0 && self.local_null_tau.is_finite()) {
            return bad(format!(
                "local_null_tau must be nonnegative, got {}",
                self.local_null_tau
            ));
        }

        let scales = self.resolved_factor_scales();
        if scales.len() != self.true_rank {
            return bad(format!(
                "factor_scales has {} entries but true_rank is {}",
                scales.len(),
                self.true_rank
            ));
        }
        if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("factor_scales must be positive and finite".into());
        }
        // Small relative slack so (k, k−1, …)·gap passes with rounding.
        let slack = 1e-12 * scales.first().copied().unwrap_or(0.0);
        if let Some(w) = scales.windows(2).find(|w| w[0] - w[1] < self.gap - slack) {
            return bad(format!(
                "factor_scales must decrease by at least gap = {}: {} then {}",
                self.gap, w[0], w[1]
            ));
        }
        if let Some(&smallest) = scales.last() {
            if self.trailing_eigenvalue() >= smallest {
                return bad(format!(
                    "local_null_tau/sqrt(n) = {} must be below the smallest factor scale {smallest}",
                    self.trailing_eigenvalue()
                ));
            }
        }
        Ok(())
    }
}

fn check_t_df(t_df: f64) -> Result<()> {
    if !(t_df > 2.0) {
        return Err(Error::InvalidConfig(format!(
            "t_df must exceed 2 for finite factor variance, got {t_df}"
        )));
    }
    if t_df <= 4.0 {
        warn!("t_df = {t_df} <= 4: factors have infinite fourth moments");
    }
    Ok(())
}

/// `p × k` loadings with orthogonal columns; column `j` has squared norm
/// `scales[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingMatrix {
    pub matrix: DMatrix<f64>,
    /// The orthonormal frame the columns were scaled from.
    pub frame: DMatrix<f64>,
    pub scales: Vec<f64>,
}

impl LoadingMatrix {
    /// `A Aᵀ`.
    pub fn population_covariance(&self) -> DMatrix<f64> {
        &self.matrix * self.matrix.transpose()
    }

    /// Projector onto the orthogonal complement of the column space.
    pub fn complement_projector(&self) -> DMatrix<f64> {
        let p = self.frame.nrows();
        DMatrix::identity(p, p) - &self.frame * self.frame.transpose()
    }
}

/// Orthonormalizes the columns of `g` in place (two passes of modified
/// Gram–Schmidt). Returns false if a column loses too much norm.
fn orthonormalize(g: &mut DMatrix<f64>) -> bool {
    for j in 0..g.ncols() {
        let original = g.column(j).norm();
        for _ in 0..2 {
            for i in 0..j {
                let proj = g.column(i).dot(&g.column(j));
                let qi = g.column(i).clone_owned();
                g.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = g.column(j).norm();
        if !(norm > 1e-8 * original) || original == 0.0 {
            return false;
        }
        g.column_mut(j).unscale_mut(norm);
    }
    true
}

pub fn make_loadings(p: usize, k: usize, factor_scales: &[f64], seed: u64) -> Result<LoadingMatrix> {
    if k > p {
        return Err(Error::InvalidInput(format!("k = {k} exceeds p = {p}")));
    }
    if factor_scales.len() != k {
        return Err(Error::InvalidInput(format!(
            "expected {k} factor scales, got {}",
            factor_scales.len()
        )));
    }
    if factor_scales.iter().any(|s| !(*s > 0.0 && s.is_finite()))
        || factor_scales.windows(2).any(|w| w[0] <= w[1])
    {
        return Err(Error::InvalidInput(
            "factor scales must be positive and strictly decreasing".into(),
        ));
    }

    let mut rng = stream(seed, TAG_LOADINGS);
    for _ in 0..MAX_FRAME_ATTEMPTS {
        let mut frame = DMatrix::from_fn(p, k, |_, _| StandardNormal.sample(&mut rng));
        if !orthonormalize(&mut frame) {
            continue;
        }
        let mut matrix = frame.clone();
        for (mut col, s) in matrix.column_iter_mut().zip(factor_scales) {
            col *= s.sqrt();
        }
        return Ok(LoadingMatrix {
            matrix,
            frame,
            scales: factor_scales.to_vec(),
        });
    }
    Err(Error::DegenerateFrame {
        attempts: MAX_FRAME_ATTEMPTS,
    })
}

/// `n × k` multivariate-t draws `G / √(W/df)`, rescaled by `√((df−2)/df)`
/// so each row has identity covariance.
pub fn sample_factors_t(k: usize, n: usize, t_df: f64, seed: u64) -> Result<DMatrix<f64>> {
    check_t_df(t_df)?;
    let chi2 = ChiSquared::new(t_df).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let unit = ((t_df - 2.0) / t_df).sqrt();
    let mut rng = stream(seed, TAG_FACTORS);
    let mut z = DMatrix::zeros(n, k);
    let mut row = vec![0.0; k];
    for i in 0..n {
        for g in row.iter_mut() {
            *g = StandardNormal.sample(&mut rng);
        }
        let w: f64 = chi2.sample(&mut rng);
        let factor = unit / (w / t_df).sqrt();
        for (j, g) in row.iter().enumerate() {
            z[(i, j)] = g * factor;
        }
    }
    Ok(z)
}

/// Draws datasets for one design. The loadings are fixed at construction.
#[derive(Debug, Clone)]
pub struct Generator {
    config: SimulationConfig,
    loadings: LoadingMatrix,
    /// `√(τ/√n) · P_⊥`, present when `τ > 0`.
    disturbance: Option<DMatrix<f64>>,
}

impl Generator {
    pub fn new(config: &SimulationConfig) -> Result<Self> {
        config.validate()?;
        let loadings = make_loadings(
            config.p,
            config.true_rank,
            &config.resolved_factor_scales(),
            config.seed,
        )?;
        let disturbance = (config.local_null_tau > 0.0)
            .then(|| loadings.complement_projector() * config.trailing_eigenvalue().sqrt());
        Ok(Self {
            config: config.clone(),
            loadings,
            disturbance,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn loadings(&self) -> &LoadingMatrix {
        &self.loadings
    }

    /// Population covariance `A Aᵀ + (τ/√n) P_⊥`.
    pub fn population_covariance(&self) -> DMatrix<f64> {
        let mut cov = self.loadings.population_covariance();
        if self.config.local_null_tau > 0.0 {
            cov += self.loadings.complement_projector() * self.config.trailing_eigenvalue();
        }
        cov
    }

    /// One `n × p` dataset with rows `A zᵢ (+ eᵢ)`.
    pub fn draw(&self, seed: u64) -> Result<DataMatrix> {
        let cfg = &self.config;
        let z = sample_factors_t(cfg.true_rank, cfg.n, cfg.t_df, seed)?;
        let mut x = z * self.loadings.matrix.transpose();
        if let Some(d) = &self.disturbance {
            let mut rng = stream(seed, TAG_NOISE);
            let g = DMatrix::from_fn(cfg.n, cfg.p, |_, _| StandardNormal.sample(&mut rng));
            x += g * d;
        }
        DataMatrix::from_matrix(x)
    }
}

/// A single dataset from `cfg`, drawn with `cfg.seed`.
pub fn generate_dataset(cfg: &SimulationConfig) -> Result<DataMatrix> {
    Generator::new(cfg)?.draw(cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{sample_covariance, symmetric_eigen, SymMatrix};

    #[test]
    fn square_equal_scale_frame() {
        // equal scales are not strictly decreasing, so build from the frame directly
        let l = make_loadings(4, 4, &[4.0, 3.0, 2.0, 1.0], 1).unwrap();
        let aat = &l.frame * l.frame.transpose() * 2.5;
        assert!((aat - DMatrix::<f64>::identity(4, 4) * 2.5).amax() <= 1e-10);
    }

    #[test]
    fn gram_matrix_is_diagonal() {
        for seed in 0..20 {
            let scales = [9.0, 4.0, 1.5];
            let l = make_loadings(7, 3, &scales, seed).unwrap();
            let gram = l.matrix.transpose() * &l.matrix;
            for i in 0..3 {
                for j in 0..3 {
                    let expected = if i == j { scales[i] } else { 0.0 };
                    assert!((gram[(i, j)] - expected).abs() <= 1e-12, "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn loadings_are_deterministic() {
        let a = make_loadings(10, 3, &[3.0, 2.0, 1.0], 42).unwrap();
        let b = make_loadings(10, 3, &[3.0, 2.0, 1.0], 42).unwrap();
        assert_eq!(a, b);
        assert!(make_loadings(3, 2, &[1.0, 2.0], 0).is_err());
        assert!(make_loadings(2, 3, &[3.0, 2.0, 1.0], 0).is_err());
    }

    #[test]
    fn t_factors() {
        assert!(sample_factors_t(2, 10, 2.0, 0).is_err());
        assert!(sample_factors_t(2, 10, 1.5, 0).is_err());
        let a = sample_factors_t(3, 50, 5.0, 7).unwrap();
        assert_eq!(a, sample_factors_t(3, 50, 5.0, 7).unwrap());
        assert_ne!(a, sample_factors_t(3, 50, 5.0, 8).unwrap());
    }

    #[test]
    fn t_factor_covariance_is_identity() {
        let n = 1_000_000;
        let z = sample_factors_t(3, n, 5.0, 123).unwrap();
        let cov = z.tr_mul(&z) / n as f64;
        assert!((cov - DMatrix::<f64>::identity(3, 3)).amax() <= 0.02);
    }

    #[test]
    fn exact_low_rank_dataset() {
        let cfg = SimulationConfig {
            seed: 3,
            ..SimulationConfig::new(10, 3, 200, 1)
        };
        let data = generate_dataset(&cfg).unwrap();
        assert_eq!((data.nrows(), data.ncols()), (200, 10));
        let spec = symmetric_eigen(&sample_covariance(&data, false), false, None).unwrap();
        assert!(spec.eigenvalues[3..].iter().all(|&l| l <= 1e-10 * spec.eigenvalues[0]));
        assert!(spec.eigenvalues[2] > 0.0);
    }

    #[test]
    fn large_sample_covariance_matches_population() {
        let cfg = SimulationConfig {
            seed: 11,
            ..SimulationConfig::new(6, 2, 1_000_000, 1)
        };
        let gen = Generator::new(&cfg).unwrap();
        let data = gen.draw(99).unwrap();
        let diff = sample_covariance(&data, false).as_matrix() - gen.population_covariance();
        let diff_norm = symmetric_eigen(&SymMatrix::from_lower(diff).unwrap(), false, Some(0.0))
            .unwrap()
            .eigenvalues
            .iter()
            .fold(0.0f64, |a, l| a.max(l.abs()));
        assert!(diff_norm <= 0.05 * 2.0, "relative operator-norm error {}", diff_norm / 2.0);
    }

    #[test]
    fn local_null_population_spectrum() {
        let cfg = SimulationConfig {
            local_null_tau: 0.5,
            seed: 5,
            ..SimulationConfig::new(5, 2, 400, 1)
        };
        let gen = Generator::new(&cfg).unwrap();
        let pop = SymMatrix::from_lower(gen.population_covariance()).unwrap();
        let eigs = symmetric_eigen(&pop, false, Some(0.0)).unwrap().eigenvalues;
        let trailing = 0.5 / 20.0;
        assert!((eigs[0] - 2.0).abs() < 1e-12 && (eigs[1] - 1.0).abs() < 1e-12);
        for l in &eigs[2..] {
            assert!((l - trailing).abs() < 1e-12);
        }
        assert_eq!(cfg.population_eigenvalues(), vec![2.0, 1.0, trailing, trailing, trailing]);

        let data = gen.draw(1).unwrap();
        let spec = symmetric_eigen(&sample_covariance(&data, false), false, None).unwrap();
        assert!(spec.eigenvalues.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn config_validation() {
        let ok = SimulationConfig::new(10, 3, 100, 5);
        ok.validate().unwrap();
        assert_eq!(ok.resolved_factor_scales(), vec![3.0, 2.0, 1.0]);

        let mut c = ok.clone();
        c.t_df = 2.0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.factor_scales = Some(vec![3.0, 2.5, 1.0]);
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.local_null_tau = 10.0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.true_rank = 11;
        assert!(c.validate().is_err());
        let mut c = ok;
        c.factor_scales = Some(vec![3.0]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn replication_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| replication_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(replication_seed(7, 0), replication_seed(8, 0));
    }
}
