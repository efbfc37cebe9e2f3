//! Isotropic elastic material parameters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Invalid material parameter combinations.
#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("density must be positive, got {0} kg/m³")]
    NonPositiveDensity(f64),
    #[error("shear speed must be positive, got {0} m/s")]
    NonPositiveShearSpeed(f64),
    #[error(
        "longitudinal speed {c_l} m/s must exceed c_s·√(4/3) = {limit:.1} m/s \
         for a positive bulk modulus"
    )]
    SpeedRatio { c_l: f64, limit: f64 },
}

/// Isotropic material given by density and the two bulk wave speeds.
///
/// Lamé constants are derived on demand: `μ = ρ c_s²`, `λ = ρ (c_l² − 2 c_s²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Density (kg/m³).
    pub density: f64,
    /// Longitudinal wave speed (m/s).
    pub c_l: f64,
    /// Shear wave speed (m/s).
    pub c_s: f64,
}

impl Material {
    /// Aluminum: c_l = 6360 m/s, c_s = 3100 m/s, ρ = 2700 kg/m³.
    pub const ALUMINUM: Material = Material {
        density: 2700.0,
        c_l: 6360.0,
        c_s: 3100.0,
    };

    /// Validated constructor.
    pub fn new(density: f64, c_l: f64, c_s: f64) -> Result<Self, MaterialError> {
        let m = Material { density, c_l, c_s };
        m.validate()?;
        Ok(m)
    }

    /// Checks ρ > 0, c_s > 0 and c_l > c_s·√(4/3).
    pub fn validate(&self) -> Result<(), MaterialError> {
        if !(self.density > 0.0) {
            return Err(MaterialError::NonPositiveDensity(self.density));
        }
        if !(self.c_s > 0.0) {
            return Err(MaterialError::NonPositiveShearSpeed(self.c_s));
        }
        let limit = self.c_s * (4.0f64 / 3.0).sqrt();
        if !(self.c_l > limit) {
            return Err(MaterialError::SpeedRatio {
                c_l: self.c_l,
                limit,
            });
        }
        Ok(())
    }

    /// Lamé constants `(λ, μ)` in Pa.
    pub fn lame(&self) -> (f64, f64) {
        let mu = self.density * self.c_s * self.c_s;
        let lambda = self.density * (self.c_l * self.c_l - 2.0 * self.c_s * self.c_s);
        (lambda, mu)
    }

    /// Young's modulus in Pa.
    pub fn youngs_modulus(&self) -> f64 {
        let (lambda, mu) = self.lame();
        mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu)
    }

    /// Poisson's ratio.
    pub fn poisson_ratio(&self) -> f64 {
        let (lambda, mu) = self.lame();
        lambda / (2.0 * (lambda + mu))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aluminum_constants() {
        let al = Material::ALUMINUM;
        al.validate().unwrap();
        let (lambda, mu) = al.lame();
        assert!((mu - 2700.0 * 3100.0f64.powi(2)).abs() < 1e-3);
        assert!((lambda - 2700.0 * (6360.0f64.powi(2) - 2.0 * 3100.0f64.powi(2))).abs() < 1e-3);
        // E ≈ 69.8 GPa, ν ≈ 0.344 for these speeds
        assert!((al.youngs_modulus() / 1e9 - 69.75).abs() < 0.1);
        assert!((al.poisson_ratio() - 0.344).abs() < 0.001);
    }

    #[test]
    fn rejects_bad_speed_ratio() {
        // c_l too close to c_s => negative bulk modulus
        assert!(Material::new(2700.0, 3200.0, 3100.0).is_err());
        assert!(Material::new(-1.0, 6360.0, 3100.0).is_err());
        assert!(Material::new(2700.0, 6360.0, 0.0).is_err());
    }
}
