//! The equilibrium energy from closed-form integrals of ρ_eq.
//!
//! ℰ = κcosh(b̄)/(2N) + (1/2N)∫ρV_N − ½∫w⁽⁺⁾(τ(b_N−η))ρ(η)dη. The three
//! pieces are O(1/b̄²) and cancel down to O(1/b̄³), so they are evaluated
//! from exact χ-expressions rather than their own leading asymptotics.

use super::{frak_t, laurent_coeffs, solve_endpoint, ChiLeadingOrder, ScaledGeometry};
use crate::error::{Error, Result};
use crate::specfun::ModelParams;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyIntegrals {
    /// (1/2N)∫ρ_eq V_N.
    pub v_integral: f64,
    /// −½∫w⁽⁺⁾(τ(b_N−η))ρ_eq(η)dη.
    pub w_boundary: f64,
    /// κcosh(b̄)/(2N).
    pub cosh_edge: f64,
    /// Leading large-N forms of the first two.
    pub v_integral_leading: f64,
    pub w_boundary_leading: f64,
    pub error_budget: f64,
}

impl EnergyIntegrals {
    pub fn total(&self) -> f64 {
        self.cosh_edge + self.v_integral + self.w_boundary
    }
}

pub fn energy_integrals(geom: &ScaledGeometry, p: &ModelParams) -> Result<EnergyIntegrals> {
    if !geom.is_symmetric() {
        return Err(Error::Domain("energy integrals need a_N = -b_N".into()));
    }
    let chi = ChiLeadingOrder::new(geom, p)?;
    let i = Complex64::i();
    let zero = Complex64::new(0.0, 0.0);
    let n = geom.n as f64;
    let (k, bb) = (p.kappa, geom.bbar);
    let up = chi.above(i)?;
    let d = chi.above_derivative(i, 0.25)?;
    let (x11, x12) = (up[0][0], up[0][1]);
    let v = k * k * (2.0 * bb).exp() / (8.0 * PI * n * n) * (x12 * x12 + 2.0 * (x12 * d[0][0] - x11 * d[0][1]));
    let m0 = chi.below(zero)?;
    let wb = -k * bb.exp() / (4.0 * n)
        * (1.0 + (-geom.xbar).exp() + m0[1][1] * (2.0 * x11 + i * x12) - 2.0 * m0[1][0] * x12);

    let w = &chi.coeffs.w;
    let rui = chi.r_up(i);
    let v_lead = -k * k * (2.0 * bb).exp() / (8.0 * PI * n * n * rui * rui) * (1.0 - 2.0 * w[1] / w[2]);
    let wb_lead = -k * bb.exp() / (4.0 * n) * (1.0 + (-geom.xbar).exp() + i * w[1] * chi.r_down(zero) / (w[2] * rui));
    Ok(EnergyIntegrals {
        v_integral: v.re,
        w_boundary: wb.re,
        cosh_edge: k * bb.cosh() / (2.0 * n),
        v_integral_leading: v_lead.re,
        w_boundary_leading: wb_lead.re,
        error_budget: geom.error_budget(),
    })
}

/// Large-N equilibrium energy
/// 3π⁴bb̂w̃₁/(4b̄³w̃₂𝔱) + (9π⁴bb̂/(8b̄⁴𝔱²))(1 − 2w̃₁/(b̄w̃₂)), at the solved endpoint.
pub fn energy_asymptotic(n: u64, p: &ModelParams) -> Result<f64> {
    if n < 1000 {
        return Err(Error::InvalidParam(format!("energy_asymptotic needs N >= 1000, got {n}")));
    }
    let g = solve_endpoint(n, p)?;
    Ok(energy_asymptotic_at(g.bbar, p)?)
}

pub(crate) fn energy_asymptotic_at(bb: f64, p: &ModelParams) -> Result<f64> {
    let (w1, w2) = laurent_coeffs(2.0 * bb, p)?.w_tilde();
    let t = frak_t(2.0 * bb, p)?;
    let bbh = PI.powi(4) * p.b * p.bhat;
    Ok(3.0 * bbh * w1 / (4.0 * bb.powi(3) * w2 * t) + 9.0 * bbh / (8.0 * bb.powi(4) * t * t) * (1.0 - 2.0 * w1 / (bb * w2)))
}
