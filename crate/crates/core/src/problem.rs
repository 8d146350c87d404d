//! Initial data of the benchmark: a Gaussian density pulse at rest.

use crate::assembly::FeSpace;
use crate::error::{Error, Result};
use crate::schemes::State;

/// `rho0(x) = 1 + alpha * exp(-beta * |x|^2)` with zero initial velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPulse {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for GaussianPulse {
    fn default() -> Self {
        GaussianPulse {
            alpha: 2.0,
            beta: 20.0,
        }
    }
}

impl GaussianPulse {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > -1.0 && alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "init.alpha = {alpha} must exceed -1 to keep the density positive"
            )));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("init.beta = {beta} must be non-negative")));
        }
        Ok(GaussianPulse { alpha, beta })
    }

    pub fn density(&self, x: [f64; 2]) -> f64 {
        1.0 + self.alpha * (-self.beta * (x[0] * x[0] + x[1] * x[1])).exp()
    }

    /// L2 projection of the pulse onto `space`, at rest, at `t = 0`.
    pub fn initial_state(&self, space: &FeSpace) -> Result<State> {
        let rho = space.l2_project(|x| self.density(x))?;
        Ok(State::rest(rho, 0.0))
    }
}
