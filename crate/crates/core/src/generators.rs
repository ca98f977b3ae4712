//! Invertible transports `G` (latent → data) and `T = G⁻¹`, and the PASS
//! synthesis pipeline built on them.
//!
//! Every transport maps a standard Gaussian latent vector to the data space.
//! A synthetic sample is produced in three steps:
//!
//! 1. draw `U_1..U_n` from the base distribution;
//! 2. optionally permute them so that `U_r(i)` has the same empirical rank as `T(Z_i)`;
//! 3. perturb, `V_i = W(U_r(i) + τε_i)`, and push forward, `Z'_i = G(V_i)`.
//!
//! `W` leaves the base law unchanged, so `Z'` is an i.i.d. sample from the
//! model whatever `τ` and `r` are.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::gaussian_summary;
use crate::pai::EmpiricalDistribution;
use crate::perturb::{perturb, BaseDistribution, PerturbationSpec};
use crate::ranks::match_ranks;
use crate::rng::{fill_standard_normal, open_unit, standard_normal, stream, Purpose};
use crate::special::{normal_cdf, normal_quantile};

/// Default relative ridge added to the fitted covariance, as a multiple of `tr Σ̂ / d`.
pub const DEFAULT_RIDGE: f64 = 1e-10;

/// Probabilities are kept this far from 0 and 1 before taking normal scores.
const PROB_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TransportKind {
    GaussianTransport,
    CopulaTransport,
}

/// Size and fingerprint of the sample a model was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitProvenance {
    pub n: usize,
    pub fingerprint: u64,
}

fn cholesky(d: usize, a: &[f64]) -> Result<Vec<f64>> {
    let m = DMatrix::from_row_slice(d, d, a);
    let c = m
        .cholesky()
        .ok_or_else(|| Error::numeric("matrix is not positive definite"))?;
    let l = c.l();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            out[i * d + j] = l[(i, j)];
        }
    }
    Ok(out)
}

#[inline]
fn lower_mul(d: usize, l: &[f64], v: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let row = &l[i * d..i * d + i + 1];
        out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

#[inline]
fn lower_solve(d: usize, l: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let row = &l[i * d..i * d + i];
        let s: f64 = row.iter().zip(&out[..i]).map(|(a, x)| a * x).sum();
        out[i] = (b[i] - s) / l[i * d + i];
    }
}

fn log_det_lower(d: usize, l: &[f64]) -> f64 {
    (0..d).map(|i| 2.0 * libm::log(l[i * d + i])).sum()
}

/// `z = μ + L v`, with `Σ = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianTransport {
    mean: Vec<f64>,
    /// Lower-triangular, row-major `d × d`.
    factor: Vec<f64>,
}

impl GaussianTransport {
    pub fn new(mean: Vec<f64>, cov: &[f64]) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::shape(
                format!("{d}x{d} covariance"),
                format!("{} entries", cov.len()),
            ));
        }
        let factor = cholesky(d, cov)?;
        Ok(GaussianTransport { mean, factor })
    }

    /// Builds from an explicit lower factor; the diagonal must be strictly positive.
    pub fn from_factor(mean: Vec<f64>, factor: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if factor.len() != d * d {
            return Err(Error::shape(
                format!("{d}x{d} factor"),
                format!("{} entries", factor.len()),
            ));
        }
        for i in 0..d {
            let v = factor[i * d + i];
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::numeric(format!("factor diagonal entry {i} is {v}")));
            }
            for j in (i + 1)..d {
                if factor[i * d + j] != 0.0 {
                    return Err(Error::invalid("factor must be lower triangular"));
                }
            }
        }
        Ok(GaussianTransport { mean, factor })
    }

    /// `N(0, I_d)`.
    pub fn standard(d: usize) -> Self {
        let mut factor = vec![0.0; d * d];
        for i in 0..d {
            factor[i * d + i] = 1.0;
        }
        GaussianTransport {
            mean: vec![0.0; d],
            factor,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim();
        let mut c = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                c[i * d + j] = (0..=i.min(j))
                    .map(|k| self.factor[i * d + k] * self.factor[j * d + k])
                    .sum();
            }
        }
        c
    }

    fn forward(&self, v: &[f64], out: &mut [f64]) {
        lower_mul(self.dim(), &self.factor, v, out);
        out.iter_mut().zip(&self.mean).for_each(|(o, m)| *o += m);
    }

    fn inverse(&self, z: &[f64], out: &mut [f64]) {
        let centered: Vec<f64> = z.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        lower_solve(self.dim(), &self.factor, &centered, out);
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        let d = self.dim();
        let mut v = vec![0.0; d];
        self.inverse(z, &mut v);
        let q: f64 = v.iter().map(|x| x * x).sum();
        -0.5 * (q + log_det_lower(d, &self.factor) + d as f64 * libm::log(2.0 * core::f64::consts::PI))
    }
}

/// Smoothed empirical CDF: linear interpolation through `(x_(i), (i − ½)/n)`,
/// extended linearly to probability 0 at `min − w` and 1 at `max + w`, where
/// `w` is the interquartile range (the full range when the IQR is zero).
/// Values tied in the sample take the mid-probability of their tie block.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmpiricalMarginal {
    sorted: Vec<f64>,
    lower_end: f64,
    upper_end: f64,
}

impl EmpiricalMarginal {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("marginal needs at least 2 values"));
        }
        let sorted = crate::special::sorted_copy(values);
        let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
        if min == max {
            return Err(Error::invalid("constant marginal"));
        }
        let iqr = crate::special::quantile_sorted(&sorted, 0.75) - crate::special::quantile_sorted(&sorted, 0.25);
        let width = if iqr > 0.0 { iqr } else { max - min };
        Ok(EmpiricalMarginal {
            lower_end: min - width,
            upper_end: max + width,
            sorted,
        })
    }

    /// Rebuilds from stored parts, checking the table is non-decreasing and bracketed.
    pub fn from_parts(sorted: Vec<f64>, lower_end: f64, upper_end: f64) -> Result<Self> {
        let ok = sorted.len() >= 2
            && sorted.windows(2).all(|w| w[0] <= w[1])
            && lower_end < sorted[0]
            && upper_end > sorted[sorted.len() - 1]
            && sorted.iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::invalid(
                "marginal table must be finite, non-decreasing and bracketed",
            ));
        }
        Ok(EmpiricalMarginal {
            sorted,
            lower_end,
            upper_end,
        })
    }

    pub fn table(&self) -> &[f64] {
        &self.sorted
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lower_end, self.upper_end)
    }

    fn n(&self) -> f64 {
        self.sorted.len() as f64
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.n();
        let s = &self.sorted;
        if x <= self.lower_end {
            return 0.0;
        }
        if x >= self.upper_end {
            return 1.0;
        }
        let lo = s.partition_point(|&v| v < x);
        let hi = s.partition_point(|&v| v <= x);
        if hi > lo {
            return (lo + hi) as f64 / (2.0 * n);
        }
        if lo == 0 {
            return 0.5 / n * (x - self.lower_end) / (s[0] - self.lower_end);
        }
        if lo == s.len() {
            let last = s[s.len() - 1];
            return 1.0 - 0.5 / n * (self.upper_end - x) / (self.upper_end - last);
        }
        let (a, b) = (s[lo - 1], s[lo]);
        ((lo as f64 - 0.5) + (x - a) / (b - a)) / n
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.n();
        let s = &self.sorted;
        if u <= 0.0 {
            return self.lower_end;
        }
        if u >= 1.0 {
            return self.upper_end;
        }
        let pos = u * n - 0.5;
        if pos < 0.0 {
            return self.lower_end + (s[0] - self.lower_end) * (u * 2.0 * n);
        }
        let last = s.len() - 1;
        if pos >= last as f64 {
            let frac = (pos - last as f64) * 2.0;
            return s[last] + (self.upper_end - s[last]) * frac;
        }
        let i = libm::floor(pos) as usize;
        let frac = pos - i as f64;
        s[i] + frac * (s[i + 1] - s[i])
    }

    /// Density of the piecewise-linear CDF; infinite on tied values.
    pub fn density(&self, x: f64) -> f64 {
        let n = self.n();
        let s = &self.sorted;
        if x <= self.lower_end || x >= self.upper_end {
            return 0.0;
        }
        let lo = s.partition_point(|&v| v < x);
        let hi = s.partition_point(|&v| v <= x);
        if hi > lo + 1 {
            return f64::INFINITY;
        }
        if lo == 0 {
            return 0.5 / n / (s[0] - self.lower_end);
        }
        if lo >= s.len() {
            return 0.5 / n / (self.upper_end - s[s.len() - 1]);
        }
        let (a, b) = (s[lo - 1], s[lo]);
        if hi > lo {
            // x sits on a knot: average the two adjacent slopes
            let left = 1.0 / (n * (x - a));
            let right = if lo + 1 < s.len() {
                1.0 / (n * (s[lo + 1] - x))
            } else {
                0.5 / n / (self.upper_end - x)
            };
            return 0.5 * (left + right);
        }
        1.0 / (n * (b - a))
    }

    /// Normal score `Φ⁻¹(F(x))`, finite for every input.
    pub fn normal_score(&self, x: f64) -> f64 {
        normal_quantile(self.cdf(x).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
    }
}

/// Gaussian copula: latent `w = L v` with `L Lᵀ` a correlation matrix, then `z_j = Q_j(Φ(w_j))`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CopulaTransport {
    marginals: Vec<EmpiricalMarginal>,
    factor: Vec<f64>,
}

impl CopulaTransport {
    pub fn from_parts(marginals: Vec<EmpiricalMarginal>, factor: Vec<f64>) -> Result<Self> {
        let d = marginals.len();
        let g = GaussianTransport::from_factor(vec![0.0; d], factor)?;
        Ok(CopulaTransport {
            marginals,
            factor: g.factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[EmpiricalMarginal] {
        &self.marginals
    }

    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    /// `L Lᵀ`.
    pub fn correlation(&self) -> Vec<f64> {
        GaussianTransport {
            mean: vec![0.0; self.dim()],
            factor: self.factor.clone(),
        }
        .covariance()
    }

    fn forward(&self, v: &[f64], out: &mut [f64]) {
        lower_mul(self.dim(), &self.factor, v, out);
        for (o, m) in out.iter_mut().zip(&self.marginals) {
            *o = m.quantile(normal_cdf(*o));
        }
    }

    fn latent(&self, z: &[f64], out: &mut [f64]) {
        for ((o, m), &x) in out.iter_mut().zip(&self.marginals).zip(z) {
            *o = m.normal_score(x);
        }
    }

    fn inverse(&self, z: &[f64], out: &mut [f64]) {
        let mut w = vec![0.0; self.dim()];
        self.latent(z, &mut w);
        lower_solve(self.dim(), &self.factor, &w, out);
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        let d = self.dim();
        let mut marginal = 0.0;
        for (m, &x) in self.marginals.iter().zip(z) {
            let f = m.density(x);
            if f == 0.0 {
                return f64::NEG_INFINITY;
            }
            marginal += libm::log(f);
        }
        let mut w = vec![0.0; d];
        self.latent(z, &mut w);
        let mut v = vec![0.0; d];
        lower_solve(d, &self.factor, &w, &mut v);
        let quad: f64 = v.iter().map(|x| x * x).sum::<f64>() - w.iter().map(|x| x * x).sum::<f64>();
        marginal - 0.5 * quad - 0.5 * log_det_lower(d, &self.factor)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Transport {
    Gaussian(GaussianTransport),
    Copula(CopulaTransport),
}

/// A fitted transport pair plus the provenance of its fit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneratorModel {
    pub transport: Transport,
    pub fitted_on: Option<FitProvenance>,
}

impl From<GaussianTransport> for GeneratorModel {
    fn from(t: GaussianTransport) -> Self {
        GeneratorModel {
            transport: Transport::Gaussian(t),
            fitted_on: None,
        }
    }
}

impl From<CopulaTransport> for GeneratorModel {
    fn from(t: CopulaTransport) -> Self {
        GeneratorModel {
            transport: Transport::Copula(t),
            fitted_on: None,
        }
    }
}

impl GeneratorModel {
    pub fn kind(&self) -> TransportKind {
        match self.transport {
            Transport::Gaussian(_) => TransportKind::GaussianTransport,
            Transport::Copula(_) => TransportKind::CopulaTransport,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.transport {
            Transport::Gaussian(t) => t.dim(),
            Transport::Copula(t) => t.dim(),
        }
    }

    /// `G`: standard Gaussian latent → data.
    pub fn forward_row(&self, latent: &[f64], out: &mut [f64]) {
        match &self.transport {
            Transport::Gaussian(t) => t.forward(latent, out),
            Transport::Copula(t) => t.forward(latent, out),
        }
    }

    /// `T = G⁻¹`: data → standard Gaussian latent.
    pub fn inverse_row(&self, z: &[f64], out: &mut [f64]) {
        match &self.transport {
            Transport::Gaussian(t) => t.inverse(z, out),
            Transport::Copula(t) => t.inverse(z, out),
        }
    }

    pub fn forward(&self, latent: &Matrix) -> Result<Matrix> {
        self.check_dim(latent)?;
        Ok(latent.map_rows(self.dim(), |v, z| self.forward_row(v, z)))
    }

    pub fn inverse(&self, data: &Matrix) -> Result<Matrix> {
        self.check_dim(data)?;
        Ok(data.map_rows(self.dim(), |z, v| self.inverse_row(z, v)))
    }

    pub fn log_density(&self, z: &[f64]) -> f64 {
        match &self.transport {
            Transport::Gaussian(t) => t.log_density(z),
            Transport::Copula(t) => t.log_density(z),
        }
    }

    /// `n` i.i.d. draws from the model.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Matrix {
        let d = self.dim();
        let mut latent = vec![0.0; d];
        let mut out = Matrix::zeros(n, d);
        for i in 0..n {
            fill_standard_normal(rng, &mut latent);
            self.forward_row(&latent, out.row_mut(i));
        }
        out
    }

    /// Checks the invariants a deserialized model may have lost: a positive
    /// lower-triangular factor, matching dimensions and monotone marginal tables.
    pub fn validate(&self) -> Result<()> {
        match &self.transport {
            Transport::Gaussian(t) => {
                GaussianTransport::from_factor(t.mean.clone(), t.factor.clone())?;
                if t.mean.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("model mean is not finite"));
                }
            }
            Transport::Copula(t) => {
                if t.marginals.is_empty() {
                    return Err(Error::invalid("copula has no marginals"));
                }
                for m in &t.marginals {
                    EmpiricalMarginal::from_parts(m.sorted.clone(), m.lower_end, m.upper_end)?;
                }
                GaussianTransport::from_factor(vec![0.0; t.dim()], t.factor.clone())?;
            }
        }
        if self.dim() == 0 {
            return Err(Error::invalid("model has dimension 0"));
        }
        Ok(())
    }

    fn check_dim(&self, m: &Matrix) -> Result<()> {
        if m.cols() != self.dim() {
            return Err(Error::shape(
                format!("{} columns", self.dim()),
                format!("{} columns", m.cols()),
            ));
        }
        Ok(())
    }

    /// Conditional law of coordinate 0 given the remaining coordinates.
    pub fn condition_first(&self, given: &[f64]) -> Result<FirstCoordinateConditional<'_>> {
        let d = self.dim();
        if d < 2 || given.len() != d - 1 {
            return Err(Error::shape(
                format!("{} conditioning values", d.saturating_sub(1)),
                format!("{}", given.len()),
            ));
        }
        let (cov, shift): (Vec<f64>, Vec<f64>) = match &self.transport {
            Transport::Gaussian(t) => {
                let centered = given.iter().zip(&t.mean[1..]).map(|(x, m)| x - m).collect();
                (t.covariance(), centered)
            }
            Transport::Copula(t) => {
                let scores = given
                    .iter()
                    .zip(&t.marginals[1..])
                    .map(|(x, m)| m.normal_score(*x))
                    .collect();
                (t.correlation(), scores)
            }
        };
        let s_xx = DMatrix::from_fn(d - 1, d - 1, |i, j| cov[(i + 1) * d + j + 1]);
        let s_xy = DVector::from_fn(d - 1, |i, _| cov[(i + 1) * d]);
        let chol = s_xx
            .cholesky()
            .ok_or_else(|| Error::numeric("conditioning block is not positive definite"))?;
        let coef = chol.solve(&s_xy);
        let var = cov[0] - coef.dot(&s_xy);
        if var.is_nan() || var <= 0.0 {
            return Err(Error::numeric(format!("conditional variance {var} is not positive")));
        }
        let loc = coef.iter().zip(&shift).map(|(b, x)| b * x).sum::<f64>();
        let (mean, map) = match &self.transport {
            Transport::Gaussian(t) => (t.mean[0] + loc, None),
            Transport::Copula(t) => (loc, Some(&t.marginals[0])),
        };
        Ok(FirstCoordinateConditional {
            mean,
            sd: libm::sqrt(var),
            marginal: map,
        })
    }
}

/// `Y = m(μ + σξ)`, `ξ ~ N(0, 1)`, where `m` is the identity for a Gaussian
/// transport and `Q_Y ∘ Φ` for a copula.
#[derive(Debug, Clone, Copy)]
pub struct FirstCoordinateConditional<'a> {
    pub mean: f64,
    pub sd: f64,
    marginal: Option<&'a EmpiricalMarginal>,
}

impl FirstCoordinateConditional<'_> {
    fn map(&self, w: f64) -> f64 {
        match self.marginal {
            None => w,
            Some(m) => m.quantile(normal_cdf(w)),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.map(self.mean + self.sd * standard_normal(rng))
    }

    /// Exact conditional quantile.
    pub fn quantile(&self, p: f64) -> f64 {
        self.map(self.mean + self.sd * normal_quantile(p))
    }
}

pub fn fit_gaussian(holdout: &Matrix, ridge: f64) -> Result<GeneratorModel> {
    let (n, d) = (holdout.rows(), holdout.cols());
    if d == 0 {
        return Err(Error::invalid("holdout has no columns"));
    }
    if n < d + 2 {
        return Err(Error::invalid(format!(
            "Gaussian fit needs at least {} rows, got {n}",
            d + 2
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::invalid(format!(
            "ridge must be finite and non-negative, got {ridge}"
        )));
    }
    holdout.check_finite()?;
    let s = gaussian_summary(holdout)?;
    let mut cov = s.cov;
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let bump = if trace > 0.0 { ridge * trace / d as f64 } else { ridge };
    for i in 0..d {
        cov[i * d + i] += bump;
    }
    let t = GaussianTransport::new(s.mean, &cov)?;
    Ok(GeneratorModel {
        transport: Transport::Gaussian(t),
        fitted_on: Some(FitProvenance {
            n,
            fingerprint: holdout.fingerprint(),
        }),
    })
}

pub fn fit_copula(holdout: &Matrix) -> Result<GeneratorModel> {
    let (n, d) = (holdout.rows(), holdout.cols());
    if d == 0 {
        return Err(Error::invalid("holdout has no columns"));
    }
    if n < 20 {
        return Err(Error::invalid(format!("copula fit needs at least 20 rows, got {n}")));
    }
    holdout.check_finite()?;
    let mut marginals = Vec::with_capacity(d);
    for j in 0..d {
        let col = holdout.column(j);
        let m = EmpiricalMarginal::fit(&col).map_err(|_| Error::ConstantColumn { column: j })?;
        marginals.push(m);
    }
    let scores = holdout.map_rows(d, |z, w| {
        for ((o, m), &x) in w.iter_mut().zip(&marginals).zip(z) {
            *o = m.normal_score(x);
        }
    });
    let s = gaussian_summary(&scores)?;
    let sd: Vec<f64> = (0..d).map(|i| libm::sqrt(s.cov[i * d + i])).collect();
    let mut corr = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            corr[i * d + j] = if i == j {
                1.0
            } else {
                s.cov[i * d + j] / (sd[i] * sd[j]) / (1.0 + DEFAULT_RIDGE)
            };
        }
    }
    let factor = cholesky(d, &corr)?;
    Ok(GeneratorModel {
        transport: Transport::Copula(CopulaTransport { marginals, factor }),
        fitted_on: Some(FitProvenance {
            n,
            fingerprint: holdout.fingerprint(),
        }),
    })
}

/// Configuration of one PASS experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PassConfig {
    pub perturbation: PerturbationSpec,
    /// Align base ranks with the latent ranks of the inference sample; otherwise `r(i) = i`.
    pub rank_match: bool,
    pub mc_seed: u64,
}

impl PassConfig {
    pub fn new(mc_seed: u64) -> Self {
        PassConfig {
            perturbation: PerturbationSpec::default(),
            rank_match: false,
            mc_seed,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.perturbation.tau = tau;
        self
    }

    pub fn with_rank_match(mut self, rank_match: bool) -> Self {
        self.rank_match = rank_match;
        self
    }
}

fn to_base(latent: f64, base: BaseDistribution) -> f64 {
    match base {
        BaseDistribution::StandardGaussian => latent,
        BaseDistribution::UniformCube => normal_cdf(latent),
    }
}

fn from_base(v: f64, base: BaseDistribution) -> f64 {
    match base {
        BaseDistribution::StandardGaussian => v,
        BaseDistribution::UniformCube => normal_quantile(v.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)),
    }
}

fn synthesize(
    model: &GeneratorModel,
    n: usize,
    inference: Option<&Matrix>,
    cfg: &PassConfig,
    replicate: u64,
) -> Result<Matrix> {
    cfg.perturbation.validate()?;
    let d = model.dim();
    let base = cfg.perturbation.base;
    let mut rng = stream(cfg.mc_seed, Purpose::Synthesis, replicate);

    let mut u = Matrix::zeros(n, d);
    for i in 0..n {
        for v in u.row_mut(i) {
            *v = match base {
                BaseDistribution::StandardGaussian => standard_normal(&mut rng),
                BaseDistribution::UniformCube => open_unit(&mut rng),
            };
        }
    }
    if let Some(z) = inference {
        let mut latent = model.inverse(z)?;
        if base != BaseDistribution::StandardGaussian {
            for i in 0..n {
                latent.row_mut(i).iter_mut().for_each(|x| *x = to_base(*x, base));
            }
        }
        let r = match_ranks(&latent, &u)?;
        u = u.select_rows(r.as_slice());
    }
    let v = perturb(&u, &cfg.perturbation, &mut rng)?;
    let mut latent = vec![0.0; d];
    Ok(v.map_rows(d, |row, out| {
        for (l, &x) in latent.iter_mut().zip(row) {
            *l = from_base(x, base);
        }
        model.forward_row(&latent, out);
    }))
}

/// One PASS sample of the same size as `inference`.
///
/// The stream is fixed by `(cfg.mc_seed, replicate)`; with `cfg.rank_match` the
/// base sample is reordered to share the empirical ranks of `T(inference)`.
pub fn pass_synthesize(model: &GeneratorModel, inference: &Matrix, cfg: &PassConfig, replicate: u64) -> Result<Matrix> {
    if inference.cols() != model.dim() {
        return Err(Error::shape(
            format!("{} columns", model.dim()),
            format!("{} columns", inference.cols()),
        ));
    }
    let matched = if cfg.rank_match { Some(inference) } else { None };
    synthesize(model, inference.rows(), matched, cfg, replicate)
}

/// A PASS sample of size `n` with `r(i) = i`.
pub fn pass_sample(model: &GeneratorModel, n: usize, cfg: &PassConfig, replicate: u64) -> Result<Matrix> {
    synthesize(model, n, None, cfg, replicate)
}

/// Issues PASS samples for one experiment and refuses to reuse a replicate index.
#[derive(Debug)]
pub struct PassSession<'a> {
    model: &'a GeneratorModel,
    cfg: PassConfig,
    issued: BTreeSet<u64>,
}

impl<'a> PassSession<'a> {
    pub fn new(model: &'a GeneratorModel, cfg: PassConfig) -> Self {
        PassSession {
            model,
            cfg,
            issued: BTreeSet::new(),
        }
    }

    pub fn config(&self) -> &PassConfig {
        &self.cfg
    }

    fn claim(&mut self, replicate: u64) -> Result<()> {
        if !self.issued.insert(replicate) {
            return Err(Error::StreamCollision { replicate });
        }
        Ok(())
    }

    pub fn synthesize(&mut self, inference: &Matrix, replicate: u64) -> Result<Matrix> {
        self.claim(replicate)?;
        pass_synthesize(self.model, inference, &self.cfg, replicate)
    }

    pub fn sample(&mut self, n: usize, replicate: u64) -> Result<Matrix> {
        self.claim(replicate)?;
        pass_sample(self.model, n, &self.cfg, replicate)
    }
}

/// Empirical distribution of `statistic` over `draws` independent PASS samples of size `n`
/// (replicates `0..draws`, no rank matching).
pub fn sample_statistic_null(
    model: &GeneratorModel,
    n: usize,
    draws: usize,
    mut statistic: impl FnMut(&Matrix) -> f64,
    cfg: &PassConfig,
) -> Result<EmpiricalDistribution> {
    if draws < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 Monte Carlo draws, got {draws}"
        )));
    }
    let cfg = PassConfig {
        rank_match: false,
        ..*cfg
    };
    let mut session = PassSession::new(model, cfg);
    let mut values = Vec::with_capacity(draws);
    for k in 0..draws as u64 {
        let z = session.sample(n, k)?;
        let t = statistic(&z);
        if !t.is_finite() {
            return Err(Error::NonFiniteStatistic { replicate: k });
        }
        values.push(t);
    }
    EmpiricalDistribution::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ks_test_standard_gaussian;
    use crate::ranks::rank_discrepancy;
    use crate::special::{mean, sample_sd};

    fn normal_matrix(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = stream(seed, Purpose::User, 0);
        GeneratorModel::from(GaussianTransport::standard(d)).sample(n, &mut rng)
    }

    #[test]
    fn degenerate_holdout_uses_absolute_ridge() {
        let h = Matrix::zeros(10, 2);
        let m = fit_gaussian(&h, 0.5).unwrap();
        let Transport::Gaussian(t) = &m.transport else { panic!() };
        assert_eq!(t.mean(), &[0.0, 0.0]);
        let c = t.covariance();
        assert!(c.iter().zip([0.5, 0.0, 0.0, 0.5]).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(fit_gaussian(&h, 0.0).is_err());
    }

    #[test]
    fn gaussian_fit_recovers_standard_normal() {
        let n = 10_000;
        let h = normal_matrix(n, 3, 1);
        let m = fit_gaussian(&h, DEFAULT_RIDGE).unwrap();
        let Transport::Gaussian(t) = &m.transport else { panic!() };
        assert!(t.mean().iter().all(|v| v.abs() < 4.0 / (n as f64).sqrt()));
        let c = t.covariance();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((c[i * 3 + j] - target).abs() < 0.1);
            }
        }
        assert_eq!(
            m.fitted_on,
            Some(FitProvenance {
                n,
                fingerprint: h.fingerprint()
            })
        );
    }

    #[test]
    fn gaussian_fit_preconditions() {
        assert!(fit_gaussian(&Matrix::zeros(3, 2), 1.0).is_err());
        let mut h = normal_matrix(10, 2, 2);
        h.set(3, 1, f64::NAN);
        assert!(matches!(
            fit_gaussian(&h, 1e-3),
            Err(Error::NonFinite { row: 3, col: 1 })
        ));
    }

    #[test]
    fn gaussian_round_trip() {
        let t = GaussianTransport::new(vec![1.0, -2.0], &[2.0, 0.6, 0.6, 0.5]).unwrap();
        let m = GeneratorModel::from(t);
        let v = normal_matrix(50, 2, 3);
        let back = m.inverse(&m.forward(&v).unwrap()).unwrap();
        for (a, b) in v.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn marginal_interpolation() {
        let m = EmpiricalMarginal::fit(&[3.0, 1.0, 2.0, 4.0]).unwrap();
        // IQR of (1,2,3,4) with type-7 quantiles is 1.5
        assert_eq!(m.support(), (-0.5, 5.5));
        assert_eq!(m.cdf(1.0), 0.125);
        assert_eq!(m.cdf(2.5), 0.5);
        assert_eq!(m.cdf(-1.0), 0.0);
        assert_eq!(m.cdf(6.0), 1.0);
        assert_eq!(m.quantile(0.5), 2.5);
        assert_eq!(m.quantile(0.0625), 0.25);
        for k in 1..100 {
            let u = k as f64 / 100.0;
            assert!((m.cdf(m.quantile(u)) - u).abs() < 1e-12);
        }
        let tied = EmpiricalMarginal::fit(&[0.0, 0.0, 1.0]).unwrap();
        assert!((tied.cdf(0.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!(tied.cdf(-1e-9) < tied.cdf(0.0) && tied.cdf(0.0) < tied.cdf(1e-9));
        assert!(EmpiricalMarginal::fit(&[2.0, 2.0]).is_err());
    }

    #[test]
    fn copula_rejects_constant_column() {
        let mut h = normal_matrix(30, 3, 4);
        for i in 0..30 {
            h.set(i, 2, 7.0);
        }
        assert_eq!(fit_copula(&h), Err(Error::ConstantColumn { column: 2 }));
        assert!(fit_copula(&normal_matrix(19, 2, 4)).is_err());
    }

    #[test]
    fn copula_independent_uniforms() {
        let n = 5000;
        let mut rng = stream(5, Purpose::User, 0);
        let mut h = Matrix::zeros(n, 3);
        for i in 0..n {
            h.row_mut(i).iter_mut().for_each(|v| *v = open_unit(&mut rng));
        }
        let m = fit_copula(&h).unwrap();
        let Transport::Copula(t) = &m.transport else { panic!() };
        let c = t.correlation();
        for i in 0..3 {
            assert!((c[i * 3 + i] - 1.0).abs() < 1e-9);
            for j in 0..3 {
                if i != j {
                    assert!(c[i * 3 + j].abs() < 0.1);
                }
            }
        }
        // synthetic marginals track the holdout marginals
        let z = pass_sample(&m, n, &PassConfig::new(11), 0).unwrap();
        for j in 0..3 {
            let ks = crate::metrics::ks_distance_unsorted(&z.column(j), &h.column(j)).unwrap();
            assert!(ks < 0.05, "column {j}: {ks}");
        }
    }

    #[test]
    fn copula_round_trip_interior() {
        let h = normal_matrix(400, 2, 6).map_rows(2, |r, o| {
            o[0] = libm::exp(r[0]);
            o[1] = r[1] + 0.5 * r[0];
        });
        let m = fit_copula(&h).unwrap();
        for k in 1..=99 {
            let p = k as f64 / 100.0;
            let v = [normal_quantile(p), normal_quantile(1.0 - p) * 0.3];
            let mut z = [0.0; 2];
            let mut back = [0.0; 2];
            m.forward_row(&v, &mut z);
            m.inverse_row(&z, &mut back);
            assert!((back[0] - v[0]).abs() < 1e-6 && (back[1] - v[1]).abs() < 1e-6, "p={p}");
        }
        // G(T(z)) = z on fitted support points
        for i in 0..50 {
            let z = h.row(i);
            let mut v = [0.0; 2];
            let mut again = [0.0; 2];
            m.inverse_row(z, &mut v);
            m.forward_row(&v, &mut again);
            for j in 0..2 {
                assert!((again[j] - z[j]).abs() <= 1e-8 * (1.0 + z[j].abs()));
            }
        }
    }

    #[test]
    fn log_density_matches_gaussian_formula() {
        let m = GeneratorModel::from(GaussianTransport::standard(2));
        let z = [0.3, -1.2];
        let expected = -0.5 * (0.09 + 1.44) - libm::log(2.0 * core::f64::consts::PI);
        assert!((m.log_density(&z) - expected).abs() < 1e-12);
    }

    #[test]
    fn copula_density_integrates_to_one() {
        let h = normal_matrix(200, 1, 7);
        let m = fit_copula(&h).unwrap();
        let Transport::Copula(t) = &m.transport else { panic!() };
        let (lo, hi) = t.marginals()[0].support();
        let k = 200_000;
        let step = (hi - lo) / k as f64;
        let total: f64 = (0..k)
            .map(|i| libm::exp(m.log_density(&[lo + (i as f64 + 0.5) * step])) * step)
            .sum();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn exact_generator_gives_standard_gaussian_sample() {
        let m = GeneratorModel::from(GaussianTransport::standard(2));
        let z = Matrix::zeros(500, 2);
        let mut passes = 0;
        for rep in 0..100 {
            let s = pass_synthesize(&m, &z, &PassConfig::new(21), rep).unwrap();
            if (0..2).all(|j| ks_test_standard_gaussian(&s.column(j)).unwrap().1 > 0.001) {
                passes += 1;
            }
        }
        assert!(passes >= 95, "{passes}");
    }

    #[test]
    fn rank_matched_latent_keeps_inference_ranks() {
        let m = GeneratorModel::from(GaussianTransport::new(vec![1.0, 2.0], &[1.0, 0.3, 0.3, 2.0]).unwrap());
        let z = m.sample(60, &mut stream(8, Purpose::User, 0));
        let cfg = PassConfig::new(3).with_rank_match(true);
        let zp = pass_synthesize(&m, &z, &cfg, 0).unwrap();
        let latent_new = m.inverse(&zp).unwrap();
        let latent_old = m.inverse(&z).unwrap();
        assert!(rank_discrepancy(&latent_new, &latent_old).unwrap() < 1e-12);
    }

    #[test]
    fn replicates_are_reproducible_and_distinct() {
        let m = GeneratorModel::from(GaussianTransport::standard(3));
        let z = Matrix::zeros(20, 3);
        let cfg = PassConfig::new(5).with_tau(0.5);
        let a = pass_synthesize(&m, &z, &cfg, 1).unwrap();
        let b = pass_synthesize(&m, &z, &cfg, 1).unwrap();
        let c = pass_synthesize(&m, &z, &cfg, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mut session = PassSession::new(&m, cfg);
        session.synthesize(&z, 4).unwrap();
        assert_eq!(session.synthesize(&z, 4), Err(Error::StreamCollision { replicate: 4 }));
        assert!(pass_synthesize(&m, &Matrix::zeros(5, 2), &cfg, 0).is_err());
    }

    #[test]
    fn uniform_base_round_trips_through_model() {
        let m = GeneratorModel::from(GaussianTransport::standard(1));
        let mut cfg = PassConfig::new(9).with_tau(0.3);
        cfg.perturbation.base = BaseDistribution::UniformCube;
        let s = pass_sample(&m, 3000, &cfg, 0).unwrap();
        assert!(ks_test_standard_gaussian(&s.column(0)).unwrap().1 > 0.001);
    }

    #[test]
    fn null_of_constant_and_mean() {
        let m = GeneratorModel::from(GaussianTransport::standard(1));
        let cfg = PassConfig::new(13);
        let dist = sample_statistic_null(&m, 10, 5, |_| 2.5, &cfg).unwrap();
        assert!(dist.values().iter().all(|&v| v == 2.5));
        assert_eq!(dist.cdf(2.4), 0.0);
        assert_eq!(dist.cdf(2.5), 1.0);

        let dist = sample_statistic_null(&m, 100, 2000, |z| mean(z.as_slice()), &cfg).unwrap();
        let sd = sample_sd(dist.values());
        assert!((sd - 0.1).abs() < 0.015, "{sd}");

        let dist = sample_statistic_null(&m, 10, 2, |z| z.get(0, 0), &cfg).unwrap();
        assert_eq!(dist.len(), 2);
        assert!(dist.quantile(0.5).is_finite());

        assert!(sample_statistic_null(&m, 10, 1, |_| 0.0, &cfg).is_err());
        assert_eq!(
            sample_statistic_null(
                &m,
                10,
                5,
                |z| if z.get(0, 0) > 10.0 || z.rows() == 10 {
                    f64::NAN
                } else {
                    0.0
                },
                &cfg
            ),
            Err(Error::NonFiniteStatistic { replicate: 0 })
        );
    }

    #[test]
    fn conditional_of_bivariate_normal() {
        let rho = 0.6;
        let m =
            GeneratorModel::from(GaussianTransport::new(vec![1.0, -1.0], &[4.0, rho * 2.0, rho * 2.0, 1.0]).unwrap());
        let c = m.condition_first(&[0.0]).unwrap();
        // μ_y + ρ σ_y/σ_x (x − μ_x) and σ_y² (1 − ρ²)
        assert!((c.mean - (1.0 + rho * 2.0 * 1.0)).abs() < 1e-12);
        assert!((c.sd - (4.0 * (1.0 - rho * rho)).sqrt()).abs() < 1e-12);
        assert!(m.condition_first(&[0.0, 1.0]).is_err());
    }
}
