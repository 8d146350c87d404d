//! Power-law barotropic equation of state `p = a rho^gamma`.

use crate::error::{Error, Location, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarotropicEos {
    a: f64,
    gamma: f64,
}

impl Default for BarotropicEos {
    fn default() -> Self {
        BarotropicEos { a: 1.0, gamma: 1.4 }
    }
}

impl BarotropicEos {
    pub fn new(a: f64, gamma: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidEos(format!("coefficient a = {a} must be positive")));
        }
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::InvalidEos(format!("exponent gamma = {gamma} must exceed 1")));
        }
        Ok(BarotropicEos { a, gamma })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    fn check(rho: f64) -> Result<()> {
        if rho > 0.0 {
            Ok(())
        } else {
            Err(Error::Positivity {
                value: rho,
                location: Location::Value,
            })
        }
    }

    #[inline]
    pub fn pressure(&self, rho: f64) -> Result<f64> {
        Self::check(rho)?;
        Ok(self.a * rho.powf(self.gamma))
    }

    /// Pressure potential `Pi` with `rho Pi'(rho) - Pi(rho) = p(rho)`.
    #[inline]
    pub fn potential(&self, rho: f64) -> Result<f64> {
        Self::check(rho)?;
        Ok(self.a * rho.powf(self.gamma) / (self.gamma - 1.0))
    }

    #[inline]
    pub fn potential_derivative(&self, rho: f64) -> Result<f64> {
        Self::check(rho)?;
        Ok(self.a * self.gamma / (self.gamma - 1.0) * rho.powf(self.gamma - 1.0))
    }

    #[inline]
    pub fn potential_second_derivative(&self, rho: f64) -> Result<f64> {
        Self::check(rho)?;
        Ok(self.a * self.gamma * rho.powf(self.gamma - 2.0))
    }

    /// `(dp/drho, d2p/drho2)`.
    #[inline]
    pub fn pressure_derivatives(&self, rho: f64) -> Result<(f64, f64)> {
        Self::check(rho)?;
        let g = self.gamma;
        let r = rho.powf(g - 2.0);
        Ok((self.a * g * r * rho, self.a * g * (g - 1.0) * r))
    }
}
