//! Sample covariance and symmetric eigendecomposition.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-13;

/// An `n × p` matrix of observations, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 || p < 2 {
            return Err(Error::InvalidInput(format!(
                "data matrix must be at least 2x2, got {n}x{p}"
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            // nalgebra storage is column-major
            let (row, col) = (idx % n, idx / n);
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {row}, column {col}"
            )));
        }
        Ok(Self { values })
    }

    /// Builds from a row-major slice of length `n * p`.
    pub fn from_row_slice(n: usize, p: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::InvalidInput(format!(
                "expected {} values for a {n}x{p} matrix, got {}",
                n * p,
                values.len()
            )));
        }
        Self::from_matrix(DMatrix::from_row_slice(n, p, values))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.as_ref().len());
        if let Some(i) = rows.iter().position(|r| r.as_ref().len() != p) {
            return Err(Error::InvalidInput(format!(
                "row {i} has {} columns, expected {p}",
                rows[i].as_ref().len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::from_row_slice(n, p, &flat)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.values
    }
}

/// A real symmetric matrix. The lower triangle is authoritative; the upper
/// triangle is always an exact mirror of it.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    values: DMatrix<f64>,
}

impl SymMatrix {
    /// Wraps a square matrix, rejecting it unless it is exactly symmetric and finite.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&values)?;
        let p = values.nrows();
        for i in 0..p {
            for j in 0..i {
                if values[(i, j)] != values[(j, i)] {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    /// Wraps a square matrix, overwriting the upper triangle with the lower.
    pub fn from_lower(mut values: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&values)?;
        mirror_lower(&mut values);
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.amax()
    }
}

fn check_square_finite(values: &DMatrix<f64>) -> Result<()> {
    if !values.is_square() || values.nrows() == 0 {
        return Err(Error::InvalidInput(format!(
            "expected a non-empty square matrix, got {}x{}",
            values.nrows(),
            values.ncols()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(())
}

fn mirror_lower(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for j in 0..p {
        for i in j + 1..p {
            m[(j, i)] = m[(i, j)];
        }
    }
}

/// Eigenvalues sorted in descending order, with optional eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns in the same order as `eigenvalues`.
    pub eigenvectors: Option<DMatrix<f64>>,
    /// How many eigenvalues within `clamp_tol` of zero were set to exactly zero.
    pub clamp_count: usize,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(λ) Vᵀ`, if eigenvectors were requested.
    pub fn reconstruct(&self) -> Option<DMatrix<f64>> {
        let v = self.eigenvectors.as_ref()?;
        let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * self.eigenvalues[j]);
        Some(scaled * v.transpose())
    }
}

/// `(1/n) Σ xᵢxᵢᵀ`, optionally after subtracting the column means.
///
/// The divisor is `n`, not `n − 1`.
pub fn sample_covariance(data: &DataMatrix, center: bool) -> SymMatrix {
    let x = data.as_matrix();
    let n = x.nrows() as f64;
    let cov = if center {
        let mut xc = x.clone();
        for mut col in xc.column_iter_mut() {
            let mean = col.sum() / n;
            col.add_scalar_mut(-mean);
        }
        xc.tr_mul(&xc)
    } else {
        x.tr_mul(x)
    } / n;
    // Finite data yields finite products unless the entries overflow.
    SymMatrix::from_lower(cov).expect("covariance of finite data is finite")
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues with `|λ| ≤ clamp_tol` are snapped to exactly zero and counted
/// in `clamp_count`. `clamp_tol = None` uses `1e-12 · max|mᵢⱼ|`.
pub fn symmetric_eigen(m: &SymMatrix, want_vectors: bool, clamp_tol: Option<f64>) -> Result<Spectrum> {
    let clamp_tol = match clamp_tol {
        Some(t) if t >= 0.0 && t.is_finite() => t,
        Some(t) => {
            return Err(Error::InvalidInput(format!(
                "clamp tolerance must be finite and nonnegative, got {t}"
            )))
        }
        None => 1e-12 * m.max_abs(),
    };

    let p = m.dim();
    let mut a = m.as_matrix().clone();
    let mut v = want_vectors.then(|| DMatrix::<f64>::identity(p, p));
    let target = OFF_DIAGONAL_TOL * a.norm();

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= target {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::EigenNoConvergence {
                sweeps,
                residual: off,
            });
        }
        for q in 1..p {
            for r in 0..q {
                rotate(&mut a, v.as_mut(), r, q);
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));

    let mut clamp_count = 0;
    let eigenvalues = order
        .iter()
        .map(|&i| {
            let lambda = a[(i, i)];
            if lambda != 0.0 && lambda.abs() <= clamp_tol {
                clamp_count += 1;
                0.0
            } else {
                lambda
            }
        })
        .collect();
    let eigenvectors = v.map(|v| DMatrix::from_fn(p, p, |i, j| v[(i, order[j])]));

    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        clamp_count,
    })
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let p = a.nrows();
    let mut sum = 0.0;
    for j in 0..p {
        for i in j + 1..p {
            sum += 2.0 * a[(i, j)] * a[(i, j)];
        }
    }
    sum.sqrt()
}

/// Annihilates `a[(r, q)]` with a two-sided Givens rotation.
fn rotate(a: &mut DMatrix<f64>, v: Option<&mut DMatrix<f64>>, r: usize, q: usize) {
    let arq = a[(r, q)];
    if arq == 0.0 {
        return;
    }
    let theta = (a[(q, q)] - a[(r, r)]) / (2.0 * arq);
    let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
    let c = 1.0 / t.hypot(1.0);
    let s = t * c;

    let p = a.nrows();
    for k in 0..p {
        let akr = a[(k, r)];
        let akq = a[(k, q)];
        a[(k, r)] = c * akr - s * akq;
        a[(k, q)] = s * akr + c * akq;
    }
    for k in 0..p {
        let ark = a[(r, k)];
        let aqk = a[(q, k)];
        a[(r, k)] = c * ark - s * aqk;
        a[(q, k)] = s * ark + c * aqk;
    }
    a[(r, q)] = 0.0;
    a[(q, r)] = 0.0;

    if let Some(v) = v {
        for k in 0..p {
            let vkr = v[(k, r)];
            let vkq = v[(k, q)];
            v[(k, r)] = c * vkr - s * vkq;
            v[(k, q)] = s * vkr + c * vkq;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(n: usize, p: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect();
        DataMatrix::from_row_slice(n, p, &values).unwrap()
    }

    fn random_symmetric(p: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let m = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::from_lower(m).unwrap()
    }

    fn rotation_45() -> DMatrix<f64> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        DMatrix::from_row_slice(2, 2, &[h, -h, h, h])
    }

    #[test]
    fn covariance_of_two_points() {
        let data = DataMatrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        let cov = sample_covariance(&data, false);
        assert_eq!(cov.as_matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn covariance_of_zero_rows_is_zero() {
        let data = DataMatrix::from_row_slice(5, 3, &[0.0; 15]).unwrap();
        let cov = sample_covariance(&data, true);
        assert!(cov.as_matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn covariance_matches_double_loop() {
        let data = random_data(50, 4, 11);
        let x = data.as_matrix();
        for center in [false, true] {
            let cov = sample_covariance(&data, center);
            let mut means = [0.0; 4];
            if center {
                for (j, m) in means.iter_mut().enumerate() {
                    *m = (0..50).map(|i| x[(i, j)]).sum::<f64>() / 50.0;
                }
            }
            for a in 0..4 {
                for b in 0..4 {
                    let mut acc = 0.0;
                    for i in 0..50 {
                        acc += (x[(i, a)] - means[a]) * (x[(i, b)] - means[b]);
                    }
                    assert!((cov.as_matrix()[(a, b)] - acc / 50.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_data() {
        assert!(DataMatrix::from_rows(&[[1.0, f64::NAN], [0.0, 0.0]]).is_err());
        assert!(DataMatrix::from_rows(&[[1.0, 2.0]]).is_err());
        assert!(DataMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0])).is_err());
    }

    #[test]
    fn identity_and_diagonal() {
        let eye = SymMatrix::new(DMatrix::identity(3, 3)).unwrap();
        assert_eq!(symmetric_eigen(&eye, false, None).unwrap().eigenvalues, vec![1.0; 3]);

        let diag = SymMatrix::new(DMatrix::from_diagonal(&nalgebra::dvector![2.0, 0.0, 5.0])).unwrap();
        assert_eq!(symmetric_eigen(&diag, true, None).unwrap().eigenvalues, vec![5.0, 2.0, 0.0]);
    }

    #[test]
    fn rotated_diagonal_reconstructs() {
        let q = rotation_45();
        let m = &q * DMatrix::from_diagonal(&nalgebra::dvector![3.0, 1.0]) * q.transpose();
        let spec = symmetric_eigen(&SymMatrix::from_lower(m.clone()).unwrap(), true, None).unwrap();
        assert_relative_eq!(spec.eigenvalues[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(spec.eigenvalues[1], 1.0, epsilon = 1e-12);
        let residual = (spec.reconstruct().unwrap() - m).amax();
        assert!(residual <= 1e-10, "residual {residual}");
    }

    #[test]
    fn tiny_negatives_are_clamped() {
        let m = DMatrix::from_diagonal(&nalgebra::dvector![1.0, -1e-14, 0.5]);
        let spec = symmetric_eigen(&SymMatrix::new(m).unwrap(), false, None).unwrap();
        assert_eq!(spec.eigenvalues, vec![1.0, 0.5, 0.0]);
        assert_eq!(spec.clamp_count, 1);
        assert!(symmetric_eigen(&SymMatrix::new(DMatrix::identity(2, 2)).unwrap(), false, Some(-1.0)).is_err());
    }

    #[test]
    fn random_symmetric_reconstruction_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = rng.random_range(2..=12);
            let m = random_symmetric(p, &mut rng);
            let spec = symmetric_eigen(&m, true, Some(0.0)).unwrap();
            assert!(spec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            let scale = 1.0 + m.max_abs();
            assert!((spec.reconstruct().unwrap() - m.as_matrix()).amax() <= 1e-10 * scale);
            let v = spec.eigenvectors.as_ref().unwrap();
            assert!((v.transpose() * v - DMatrix::<f64>::identity(p, p)).amax() <= 1e-12);
            let trace = m.as_matrix().trace();
            let sum: f64 = spec.eigenvalues.iter().sum();
            assert!((sum - trace).abs() <= 1e-10 * (1.0 + trace.abs()));
        }
    }

    #[test]
    fn agrees_with_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let p = rng.random_range(2..=15);
            let m = random_symmetric(p, &mut rng);
            let ours = symmetric_eigen(&m, false, Some(0.0)).unwrap().eigenvalues;
            let mut theirs: Vec<f64> = m.as_matrix().clone().symmetric_eigenvalues().iter().copied().collect();
            theirs.sort_by(|a, b| b.total_cmp(a));
            for (a, b) in ours.iter().zip(&theirs) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn exact_low_rank_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let z = DMatrix::from_fn(200, 2, |_, _| rng.random_range(-1.0..1.0));
        let data = DataMatrix::from_matrix(z * a.transpose()).unwrap();
        let spec = symmetric_eigen(&sample_covariance(&data, false), false, None).unwrap();
        assert!(spec.eigenvalues[2..].iter().all(|&l| l <= 1e-10 * spec.eigenvalues[0]));
        assert!(spec.eigenvalues[1] > 0.0);
    }

    #[test]
    fn zero_matrix() {
        let spec = symmetric_eigen(&SymMatrix::new(DMatrix::zeros(3, 3)).unwrap(), true, None).unwrap();
        assert_eq!(spec.eigenvalues, vec![0.0; 3]);
    }

    mod props {
        use super::*;
        use proptest::prelude::{any, prop_assert, proptest};

        fn orthogonal(p: usize, seed: u64) -> DMatrix<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
            g.qr().q()
        }

        proptest! {
            #[test]
            fn covariance_is_psd(seed in any::<u64>(), n in 2usize..40, p in 2usize..8, center in any::<bool>()) {
                let cov = sample_covariance(&random_data(n, p, seed), center);
                let tol = 1e-12 * cov.max_abs();
                let spec = symmetric_eigen(&cov, false, None).unwrap();
                prop_assert!(*spec.eigenvalues.last().unwrap() >= -tol);
            }

            #[test]
            fn orthogonally_invariant(seed in any::<u64>(), p in 2usize..9) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = random_symmetric(p, &mut rng);
                let r = orthogonal(p, seed ^ 0x5555);
                let rotated = SymMatrix::from_lower(&r * m.as_matrix() * r.transpose()).unwrap();
                let a = symmetric_eigen(&m, false, Some(0.0)).unwrap().eigenvalues;
                let b = symmetric_eigen(&rotated, false, Some(0.0)).unwrap().eigenvalues;
                let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() <= 1e-9 * scale.max(1e-300));
                }
            }
        }
    }
}
