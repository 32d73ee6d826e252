//! Special functions of the model: S-matrix, minimal form factor, two-body
//! potentials, their Fourier symbols and the Wiener–Hopf factors.

pub mod gamma;
pub mod potentials;
pub mod quad;
pub mod wh;

pub use gamma::{digamma, gamma, gamma_c, ln_gamma};
pub use potentials::{fmin2, potential_v, potential_w, potentials_pm, rfun, smatrix, smatrix_integral, RKind, WTable};
pub use quad::QuadratureSpec;
pub use wh::{r_down, r_hat, r_up, wiener_hopf};

use crate::error::{Error, Result};
use serde::Serialize;
use std::f64::consts::PI;

/// Distance below which an argument counts as sitting on a pole.
pub const POLE_GUARD: f64 = 1e-8;

/// Physical parameters of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub b: f64,
    pub bhat: f64,
    pub g: f64,
    pub gamma_charge: f64,
    pub kappa: f64,
}

impl ModelParams {
    pub fn new(b: f64, gamma_charge: f64, kappa: f64) -> Result<Self> {
        if !(b > 0.0 && b < 0.5) {
            return Err(Error::InvalidParam(format!("b = {b} must lie in (0, 1/2)")));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParam(format!("kappa = {kappa} must be positive")));
        }
        if !gamma_charge.is_finite() {
            return Err(Error::InvalidParam("gamma must be finite".into()));
        }
        let g = (16.0 * PI * b / (1.0 - 2.0 * b)).sqrt();
        Ok(ModelParams { b, bhat: 0.5 - b, g, gamma_charge, kappa })
    }

    /// The same model with b and b̂ exchanged.
    pub fn dual(&self) -> Self {
        ModelParams::new(self.bhat, self.gamma_charge, self.kappa).expect("dual of valid params")
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        ModelParams::new(self.b, self.gamma_charge, kappa)
    }

    /// min(b, b̂): controls the exponential decay rate of the potential tails.
    pub fn cmin(&self) -> f64 {
        self.b.min(self.bhat)
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams::new(0.3, 1.0, 1.0).unwrap()
    }
}

/// sinh(y)/y, with a Taylor series near the origin.
pub(crate) fn sinhc(y: f64) -> f64 {
    if y.abs() < 1e-2 {
        let y2 = y * y;
        1.0 + y2 / 6.0 * (1.0 + y2 / 20.0 * (1.0 + y2 / 42.0 * (1.0 + y2 / 72.0)))
    } else {
        y.sinh() / y
    }
}
