//! Geman-McClure robust error norm.
//!
//! `rho(e) = e^2 / (sigma + e^2)`. Note that `sigma` is compared against a
//! squared residual while [`estimate_sigma`] derives it from `max |e|`; the
//! two are used exactly as stated even though their units differ.

use crate::error::{Error, Result};

/// Lower bound returned by [`estimate_sigma`] when all residuals vanish.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// A scalar robust norm and its derivatives.
pub trait RobustNorm {
    fn rho(&self, e: f64) -> f64;
    /// Influence function, `d rho / d e`.
    fn rho_dot(&self, e: f64) -> f64;
    fn rho_ddot(&self, e: f64) -> f64;
    /// `rho_dot(e) / e`, continuous through `e = 0`.
    fn secant_weight(&self, e: f64) -> f64;
}

/// The Geman-McClure scale parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustScale {
    sigma: f64,
}

impl RobustScale {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::NonPositiveSigma(sigma));
        }
        Ok(Self { sigma })
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Residual magnitude where `rho_ddot` changes sign, `sqrt(sigma / 3)`.
    pub fn inflection(&self) -> f64 {
        (self.sigma / 3.0).sqrt()
    }

    /// Outlier threshold `e_T = sigma / sqrt(3)`.
    pub fn outlier_threshold(&self) -> f64 {
        self.sigma / 3f64.sqrt()
    }
}

impl RobustNorm for RobustScale {
    #[inline]
    fn rho(&self, e: f64) -> f64 {
        let e2 = e * e;
        e2 / (self.sigma + e2)
    }

    #[inline]
    fn rho_dot(&self, e: f64) -> f64 {
        let d = self.sigma + e * e;
        2.0 * self.sigma * e / (d * d)
    }

    #[inline]
    fn rho_ddot(&self, e: f64) -> f64 {
        let e2 = e * e;
        let d = self.sigma + e2;
        2.0 * self.sigma * (self.sigma - 3.0 * e2) / (d * d * d)
    }

    #[inline]
    fn secant_weight(&self, e: f64) -> f64 {
        let d = self.sigma + e * e;
        2.0 * self.sigma / (d * d)
    }
}

pub fn rho(e: f64, sigma: f64) -> Result<f64> {
    Ok(RobustScale::new(sigma)?.rho(e))
}

pub fn rho_dot(e: f64, sigma: f64) -> Result<f64> {
    Ok(RobustScale::new(sigma)?.rho_dot(e))
}

pub fn rho_ddot(e: f64, sigma: f64) -> Result<f64> {
    Ok(RobustScale::new(sigma)?.rho_ddot(e))
}

pub fn secant_weight(e: f64, sigma: f64) -> Result<f64> {
    Ok(RobustScale::new(sigma)?.secant_weight(e))
}

/// `sigma = max |e| / sqrt(3)`, floored at [`SIGMA_FLOOR`].
pub fn estimate_sigma<I>(residuals: I) -> Result<RobustScale>
where
    I: IntoIterator<Item = f64>,
{
    let mut iter = residuals.into_iter().peekable();
    if iter.peek().is_none() {
        return Err(Error::EmptyResiduals);
    }
    let max_abs = iter.fold(0.0f64, |m, e| m.max(e.abs()));
    RobustScale::new((max_abs / 3f64.sqrt()).max(SIGMA_FLOOR))
}

/// Flags residuals above `sigma / sqrt(3)`. Diagnostic only.
pub fn outlier_mask(residuals: &[f64], scale: &RobustScale) -> Vec<bool> {
    let threshold = scale.outlier_threshold();
    residuals.iter().map(|e| e.abs() > threshold).collect()
}
