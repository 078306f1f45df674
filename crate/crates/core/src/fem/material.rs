//! Compressible neo-Hookean material in plane strain.

use nalgebra::Matrix2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MaterialError {
    #[error("Poisson ratio must lie in (0, 0.5), got {0}")]
    PoissonRatio(f64),
    #[error("Young's modulus must be positive, got {0}")]
    YoungsModulus(f64),
    #[error("thickness must be positive, got {0}")]
    Thickness(f64),
    #[error("deformation gradient is not orientation preserving (det F = {0})")]
    Inversion(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub mu: f64,
    pub lambda: f64,
    pub thickness: f64,
}

impl MaterialParams {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64, thickness: f64) -> Result<Self, MaterialError> {
        if !(youngs_modulus > 0.0) {
            return Err(MaterialError::YoungsModulus(youngs_modulus));
        }
        if !(poisson_ratio > 0.0 && poisson_ratio < 0.5) {
            return Err(MaterialError::PoissonRatio(poisson_ratio));
        }
        if !(thickness > 0.0) {
            return Err(MaterialError::Thickness(thickness));
        }
        let mu = youngs_modulus / (2.0 * (1.0 + poisson_ratio));
        let lambda = 2.0 * mu * poisson_ratio / (1.0 - 2.0 * poisson_ratio);
        Ok(MaterialParams {
            youngs_modulus,
            poisson_ratio,
            mu,
            lambda,
            thickness,
        })
    }

    pub fn with_thickness(mut self, thickness: f64) -> Self {
        self.thickness = thickness;
        self
    }
}

/// In-plane Cauchy stress `σ = μ/J (F Fᵀ − I) + λ/J ln J I`.
pub fn cauchy_stress(f: &Matrix2<f64>, mat: &MaterialParams) -> Result<Matrix2<f64>, MaterialError> {
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(MaterialError::Inversion(j));
    }
    let b = f * f.transpose();
    Ok((b - Matrix2::identity()) * (mat.mu / j) + Matrix2::identity() * (mat.lambda * j.ln() / j))
}

/// Stored energy per reference volume, `μ/2 (tr C − 2) − μ ln J + λ/2 (ln J)²`.
pub fn strain_energy_density(f: &Matrix2<f64>, mat: &MaterialParams) -> Result<f64, MaterialError> {
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(MaterialError::Inversion(j));
    }
    let lnj = j.ln();
    let trc = f.norm_squared();
    Ok(0.5 * mat.mu * (trc - 2.0) - mat.mu * lnj + 0.5 * mat.lambda * lnj * lnj)
}

/// Spatial tangent moduli `(λ', μ')` with `c = λ' δ⊗δ + 2μ' 𝕀`.
pub(crate) fn spatial_moduli(j: f64, mat: &MaterialParams) -> (f64, f64) {
    (mat.lambda / j, (mat.mu - mat.lambda * j.ln()) / j)
}
