use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Physical and discretisation parameters of the coupled system
///
/// ```text
/// u1_tt - u1_xx + beta * int_0^t e^{-eta (t-s)} u1_xx(s) ds + a u2 = 0
/// u2_tt + u2_xxxx + b u1 = 0
/// ```
///
/// on `(0, pi)`, truncated to `modes` sine modes over the horizon `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub beta: f64,
    pub eta: f64,
    pub a: f64,
    pub b: f64,
    pub modes: usize,
    pub horizon: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            beta: 0.5,
            eta: 1.0,
            a: 0.1,
            b: 0.1,
            modes: 8,
            horizon: 7.0,
        }
    }
}

impl ModelParams {
    pub fn new(beta: f64, eta: f64, a: f64, b: f64, modes: usize, horizon: f64) -> Result<Self> {
        let p = ModelParams {
            beta,
            eta,
            a,
            b,
            modes,
            horizon,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks `0 <= beta < eta`, finite couplings, at least one mode and a positive horizon.
    /// `beta = 0` is the memoryless limit.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.beta, self.eta, self.a, self.b, self.horizon]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(LabError::InvalidParameter(
                "all parameters must be finite".into(),
            ));
        }
        if self.beta < 0.0 || self.eta <= 0.0 || self.beta >= self.eta {
            return Err(LabError::InvalidParameter(format!(
                "need 0 <= beta < eta, got beta = {}, eta = {}",
                self.beta, self.eta
            )));
        }
        if self.modes == 0 {
            return Err(LabError::InvalidParameter("modes must be >= 1".into()));
        }
        if self.horizon <= 0.0 {
            return Err(LabError::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Parameters of the adjoint system: the couplings trade places.
    pub fn adjoint(&self) -> Self {
        ModelParams {
            a: self.b,
            b: self.a,
            ..*self
        }
    }

    pub fn coupling_product(&self) -> f64 {
        self.a * self.b
    }

    pub fn require_coupled(&self) -> Result<()> {
        if self.a == 0.0 || self.b == 0.0 {
            return Err(LabError::InvalidParameter(format!(
                "coupled branch needs a != 0 and b != 0, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        Ok(())
    }

    pub fn with_modes(self, modes: usize) -> Self {
        ModelParams { modes, ..self }
    }

    pub fn with_horizon(self, horizon: f64) -> Self {
        ModelParams { horizon, ..self }
    }
}

#[inline]
pub fn lambda(n: usize) -> f64 {
    (n * n) as f64
}
