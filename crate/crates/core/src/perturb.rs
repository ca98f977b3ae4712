//! Distribution-preserving perturbation `V = W(U + τε)`.
//!
//! `W` is the coordinatewise optimal transport from the law of `U + τε` back
//! to the base law, `W_j = F_j⁻¹ ∘ F̃_j`. Both supported bases are product
//! measures, so `W` is diagonal and strictly increasing in every coordinate.
//!
//! * Standard Gaussian base: `U + τε ~ N(0, 1 + τ²)` and `W(x) = x / √(1 + τ²)`.
//! * Uniform cube base: `F_j⁻¹` is the identity on `(0, 1)` and `F̃_j` is the
//!   uniform–Gaussian convolution CDF
//!   `F̃(x) = τ [ψ(x/τ) − ψ((x − 1)/τ)]` with `ψ(t) = tΦ(t) + φ(t)`.

use alloc::format;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::standard_normal;
use crate::special::{normal_cdf, normal_pdf, INV_SQRT_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BaseDistribution {
    #[default]
    StandardGaussian,
    UniformCube,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseKind {
    /// Standardized noise `ε ~ N(0, I_d)`.
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerturbationSpec {
    /// Perturbation size τ; zero makes `W` the identity.
    pub tau: f64,
    pub base: BaseDistribution,
    pub noise: NoiseKind,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            tau: 0.0,
            base: BaseDistribution::StandardGaussian,
            noise: NoiseKind::Gaussian,
        }
    }
}

impl PerturbationSpec {
    pub fn gaussian(tau: f64) -> Self {
        PerturbationSpec {
            tau,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(Error::invalid(format!(
                "perturbation size must be finite and non-negative, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// CDF of `U + τε` with `U ~ Uniform(0, 1)`, `ε ~ N(0, 1)`, `τ > 0`.
pub fn uniform_gaussian_convolution_cdf(x: f64, tau: f64) -> f64 {
    let psi = |t: f64| t * normal_cdf(t) + normal_pdf(t);
    (tau * (psi(x / tau) - psi((x - 1.0) / tau))).clamp(0.0, 1.0)
}

/// The map `W` for one coordinate.
#[inline]
pub fn transport_back(x: f64, spec: &PerturbationSpec) -> f64 {
    if spec.tau == 0.0 {
        return x;
    }
    match spec.base {
        BaseDistribution::StandardGaussian => x / libm::sqrt(1.0 + spec.tau * spec.tau),
        BaseDistribution::UniformCube => uniform_gaussian_convolution_cdf(x, spec.tau),
    }
}

/// Returns `V_i = W(U_i + τ ε_i)` for every row; the noise is drawn from `rng` row by row.
pub fn perturb<R: Rng + ?Sized>(base_rows: &Matrix, spec: &PerturbationSpec, rng: &mut R) -> Result<Matrix> {
    spec.validate()?;
    if spec.tau == 0.0 {
        return Ok(base_rows.clone());
    }
    let mut out = base_rows.clone();
    for i in 0..out.rows() {
        for v in out.row_mut(i) {
            let noisy = *v + spec.tau * standard_normal(rng);
            *v = transport_back(noisy, spec);
        }
    }
    Ok(out)
}

/// Upper bound `L² τ² E‖ε‖²` on the population rank discrepancy `sup_z ‖R(z) − R̃(z)‖²`,
/// with `L` the sup-norm of the base and perturbed marginal densities and `E‖ε‖² = dim`.
pub fn perturbation_discrepancy_f(tau: f64, dim: usize, spec: &PerturbationSpec) -> Result<f64> {
    PerturbationSpec { tau, ..*spec }.validate()?;
    let lipschitz = match spec.base {
        BaseDistribution::StandardGaussian => INV_SQRT_2PI,
        BaseDistribution::UniformCube => 1.0,
    };
    Ok(lipschitz * lipschitz * tau * tau * dim as f64)
}
