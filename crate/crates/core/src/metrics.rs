//! Distributional distances between samples.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::assignment::{solve_lsap, CostMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::special::{kolmogorov_survival, normal_cdf, sorted_copy};

/// Mean and covariance of a sample, the Gaussian surrogate used by FID.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    pub mean: Vec<f64>,
    /// Row-major `d × d`, `n − 1` denominator.
    pub cov: Vec<f64>,
    pub n: usize,
}

impl GaussianSummary {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn cov_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.cov)
    }
}

pub fn gaussian_summary(sample: &Matrix) -> Result<GaussianSummary> {
    let n = sample.rows();
    if n < 2 {
        return Err(Error::invalid(format!("summary needs at least 2 rows, got {n}")));
    }
    let d = sample.cols();
    let mean = sample.column_means();
    let mut cov = alloc::vec![0.0; d * d];
    let mut centered = alloc::vec![0.0; d];
    for r in sample.iter_rows() {
        for (c, (x, m)) in centered.iter_mut().zip(r.iter().zip(&mean)) {
            *c = x - m;
        }
        for j in 0..d {
            let cj = centered[j];
            for k in j..d {
                cov[j * d + k] += cj * centered[k];
            }
        }
    }
    let denom = (n - 1) as f64;
    for j in 0..d {
        for k in j..d {
            let v = cov[j * d + k] / denom;
            cov[j * d + k] = v;
            cov[k * d + j] = v;
        }
    }
    Ok(GaussianSummary { mean, cov, n })
}

/// Symmetric PSD square root; negative eigenvalues are clamped to zero.
fn psd_sqrt(m: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m);
    let roots = eig.eigenvalues.map(|l| libm::sqrt(l.max(0.0)));
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `‖μ₀ − μ‖² + tr(Σ₀ + Σ − 2 (Σ Σ₀)^{1/2})`.
///
/// The trace of `(ΣΣ₀)^{1/2}` is evaluated as `tr (Σ₀^{1/2} Σ Σ₀^{1/2})^{1/2}`,
/// which has the same eigenvalues but is symmetric.
pub fn fid(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::shape(
            format!("dimension {}", a.dim()),
            format!("dimension {}", b.dim()),
        ));
    }
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).sum();
    let sa = a.cov_matrix();
    let sb = b.cov_matrix();
    let root_a = psd_sqrt(sa.clone());
    let mut sandwich = &root_a * &sb * &root_a;
    // symmetrize away rounding before the eigensolver
    sandwich = (&sandwich + sandwich.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sandwich);
    let mut negative_mass = 0.0;
    let mut trace_root = 0.0;
    for &l in eig.eigenvalues.iter() {
        if !l.is_finite() {
            return Err(Error::numeric("eigendecomposition produced a non-finite eigenvalue"));
        }
        if l < 0.0 {
            negative_mass -= l;
        } else {
            trace_root += libm::sqrt(l);
        }
    }
    if negative_mass > 1e-6 {
        log::warn!("FID: clamped {negative_mass:e} of negative eigenvalue mass");
    }
    let value = mean_term + sa.trace() + sb.trace() - 2.0 * trace_root;
    Ok(value.max(0.0))
}

/// Exact `order`-Wasserstein distance between two equally sized empirical measures.
pub fn wasserstein_exact(a: &Matrix, b: &Matrix, order: u32) -> Result<f64> {
    if order != 1 && order != 2 {
        return Err(Error::invalid(format!("Wasserstein order must be 1 or 2, got {order}")));
    }
    a.check_same_shape(b)?;
    a.check_finite()?;
    b.check_finite()?;
    let n = a.rows();
    if n == 0 {
        return Err(Error::invalid("Wasserstein distance of empty samples"));
    }
    let mut values = Vec::with_capacity(n * n);
    for x in a.iter_rows() {
        for y in b.iter_rows() {
            let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
            values.push(if order == 2 { d2 } else { libm::sqrt(d2) });
        }
    }
    let assignment = solve_lsap(&CostMatrix::new(n, values)?)?;
    let avg = assignment.total_cost / n as f64;
    Ok(if order == 2 { libm::sqrt(avg) } else { avg })
}

/// `sup_x |F_a(x) − F_b(x)|` for two empirical CDFs given as ascending slices.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS distance of an empty sample"));
    }
    debug_assert!(a.windows(2).all(|w| w[0] <= w[1]));
    debug_assert!(b.windows(2).all(|w| w[0] <= w[1]));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    // after consuming all values ≤ x from both sides, the CDFs are right-limits at x
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}

/// Sorts both samples and returns their KS distance.
pub fn ks_distance_unsorted(a: &[f64], b: &[f64]) -> Result<f64> {
    ks_distance(&sorted_copy(a), &sorted_copy(b))
}

/// One-sample KS statistic of an ascending sample against a continuous CDF.
pub fn ks_statistic_against(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// One-sample KS test against `N(0, 1)` with the asymptotic Kolmogorov p-value `P(K > √n D_n)`.
pub fn ks_test_standard_gaussian(sample: &[f64]) -> Result<(f64, f64)> {
    if sample.len() < 5 {
        return Err(Error::invalid(format!(
            "KS test needs at least 5 values, got {}",
            sample.len()
        )));
    }
    if let Some(k) = sample.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: k, col: 0 });
    }
    let sorted = sorted_copy(sample);
    let stat = ks_statistic_against(&sorted, normal_cdf);
    let p = kolmogorov_survival(libm::sqrt(sorted.len() as f64) * stat);
    Ok((stat, p))
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(
            format!("length {}", a.len()),
            format!("length {}", b.len()),
        ));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum::<f64>());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum::<f64>());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero vector"));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
