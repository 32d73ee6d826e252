//! Boundary densities ρ_bd, the external field J_ext, the closed-form
//! equilibrium density and the effective potential off the support.
//!
//! Everything is evaluated as a Fourier integral on ℝ + ic. The explicit
//! residue series are kept as oracles ([`rho_bd_series`], [`j_ext_series`]);
//! at rational b their poles coincide and the series terms blow up.

use super::contour::{line_transform, spec};
use super::{ChiLeadingOrder, ScaledGeometry};
use crate::error::{Error, Result};
use crate::specfun::quad::integrate;
use crate::specfun::wh::ln_r_hat;
use crate::specfun::{digamma, ModelParams, POLE_GUARD};
use crate::specfun::gamma::ln_gamma_real;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Line height for integrands with 1/R: the poles of 1/R sit at Im λ ≥ 2.
const C_INV_R: f64 = 1.5;
/// Line height for integrands with R: analytic for Im λ > −1.
const C_R: f64 = 0.5;
/// Decay exponent of all the integrands below.
const DECAY: f64 = 1.5;

fn i() -> Complex64 {
    Complex64::i()
}

/// u_N = κτ_N e^{b̄}/(2iπN).
pub fn u_n(geom: &ScaledGeometry, p: &ModelParams) -> Complex64 {
    p.kappa * geom.tau * geom.bbar.exp() / (2.0 * PI * i() * geom.n as f64)
}

/// W₂(λ)/R(λ) from the χ entries above Γ↑.
fn w2_over_r(chi: &ChiLeadingOrder, l: Complex64) -> Complex64 {
    let (c1, c2) = (chi.coeffs.c[1], chi.coeffs.c[2]);
    let rui = chi.r_up(i());
    i() * (i() * c1 + l * (i() * c2 - c1)) * chi.inv_r_down(l) / (c2 * l * l * l * rui * (l - i()))
}

/// W₂;₋(0) = iR↓(0)c₁/(c₂R↑(i)).
fn w2_minus_0(chi: &ChiLeadingOrder) -> Complex64 {
    let (c1, c2) = (chi.coeffs.c[1], chi.coeffs.c[2]);
    i() * chi.r_down(Complex64::new(0.0, 0.0)) * c1 / (c2 * chi.r_up(i()))
}

/// R(λ)W₁(λ) above Γ↑.
fn r_w1(chi: &ChiLeadingOrder, l: Complex64) -> Complex64 {
    let (c1, c2) = (chi.coeffs.c[1], chi.coeffs.c[2]);
    i() * chi.r_down(l) * (i() * c1 - l * (i() * c2 - c1)) / (c2 * chi.r_up(i()) * (l + i()))
}

fn check_x(x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("x = {x} must be finite and >= 0")));
    }
    Ok(())
}

/// ρ_bd^{(N)}(x) = u_N ∫_{ℝ+ic} dλ/(2iπ) e^{iλx} W₂(λ)/R(λ), x ≥ 0.
pub fn rho_bd_n(x: f64, geom: &ScaledGeometry, p: &ModelParams) -> Result<f64> {
    let chi = ChiLeadingOrder::new(geom, p)?;
    rho_bd_n_with(&chi, x, geom, p)
}

fn rho_bd_n_with(chi: &ChiLeadingOrder, x: f64, geom: &ScaledGeometry, p: &ModelParams) -> Result<f64> {
    check_x(x)?;
    let v = u_n(geom, p) * line_transform(|l| w2_over_r(chi, l), x, C_INV_R, DECAY)?;
    Ok(v.re)
}

/// 𝒱_N = −2u_Nτ²W₂;₋(0)/(3π³bb̂), the curvature of the bulk density.
pub fn bulk_factor(geom: &ScaledGeometry, p: &ModelParams) -> Result<f64> {
    let chi = ChiLeadingOrder::new(geom, p)?;
    Ok(bulk_factor_with(&chi, geom, p))
}

fn bulk_factor_with(chi: &ChiLeadingOrder, geom: &ScaledGeometry, p: &ModelParams) -> f64 {
    let v = -2.0 * u_n(geom, p) * geom.tau * geom.tau * w2_minus_0(chi) / (3.0 * PI.powi(3) * p.b * p.bhat);
    v.re
}

/// The closed-form equilibrium density on a symmetric support, with the
/// x-independent pieces cached.
#[derive(Debug, Clone)]
pub struct EquilibriumDensity {
    pub geom: ScaledGeometry,
    pub params: ModelParams,
    chi: ChiLeadingOrder,
    rho0: f64,
    rho_xbar: f64,
    /// 𝒱_N.
    pub bulk: f64,
}

impl EquilibriumDensity {
    pub fn new(geom: &ScaledGeometry, p: &ModelParams) -> Result<Self> {
        if !geom.is_symmetric() {
            return Err(Error::Domain("closed-form density needs a_N = -b_N".into()));
        }
        let chi = ChiLeadingOrder::new(geom, p)?;
        let rho0 = rho_bd_n_with(&chi, 0.0, geom, p)?;
        let rho_xbar = rho_bd_n_with(&chi, geom.xbar, geom, p)?;
        let bulk = bulk_factor_with(&chi, geom, p);
        Ok(EquilibriumDensity { geom: *geom, params: *p, chi, rho0, rho_xbar, bulk })
    }

    /// ρ_eq(ξ) for ξ ∈ [a_N, b_N].
    pub fn eval(&self, xi: f64) -> Result<f64> {
        let g = &self.geom;
        if !(xi >= g.a_n && xi <= g.b_n) {
            return Err(Error::Domain(format!("xi = {xi} outside the support [{}, {}]", g.a_n, g.b_n)));
        }
        let p = &self.params;
        let left = (g.tau * (g.b_n - xi)).max(0.0);
        let right = (g.tau * (xi - g.a_n)).max(0.0);
        let bd = rho_bd_n_with(&self.chi, left, g, p)? - self.rho0 + rho_bd_n_with(&self.chi, right, g, p)? - self.rho_xbar;
        Ok(bd + 0.75 * self.bulk * (xi - g.a_n) * (g.b_n - xi))
    }

    /// (ξ, ρ(ξ)) on m+1 equally spaced points of the support.
    pub fn sample(&self, m: usize) -> Result<Vec<(f64, f64)>> {
        use rayon::prelude::*;
        let g = &self.geom;
        (0..=m)
            .into_par_iter()
            .map(|k| {
                let xi = if k == m { g.b_n } else { g.a_n + (g.b_n - g.a_n) * k as f64 / m as f64 };
                Ok((xi, self.eval(xi)?))
            })
            .collect()
    }

    /// ∫ρ_eq by Gauss–Kronrod; the square-root edges are resolved adaptively.
    pub fn total_mass(&self) -> Result<f64> {
        let s = crate::specfun::QuadratureSpec { abs_tol: 1e-9, rel_tol: 1e-9, ..spec() };
        let g = &self.geom;
        // ρ is even; integrate one half
        let f = |xi: f64| self.eval(xi).unwrap_or(f64::NAN);
        Ok(2.0 * integrate(f, 0.0, g.b_n, &s)?.0)
    }
}

/// ρ_eq(ξ) = ρ_bd^{(N)}(τ(b−ξ)) − ρ_bd^{(N)}(0) + ρ_bd^{(N)}(τ(ξ−a)) − ρ_bd^{(N)}(x̄) + ¾𝒱_N(ξ−a)(b−ξ).
///
/// Builds the cached pieces on every call; use [`EquilibriumDensity`] on grids.
pub fn density_eq(xi: f64, geom: &ScaledGeometry, p: &ModelParams) -> Result<f64> {
    EquilibriumDensity::new(geom, p)?.eval(xi)
}

fn sqrt_pbb(p: &ModelParams) -> f64 {
    (PI * p.b * p.bhat).sqrt()
}

/// 𝔯(α) = (3πbb̂α/(2(α−1))) b^{αb} b̂^{αb̂} 2^{α/2} Γ((1+α)/2)²/(Γ(1+bα)Γ(1+b̂α)Γ(1+α/2)).
pub fn frak_r(alpha: f64, p: &ModelParams) -> Result<f64> {
    if !(alpha >= 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must be >= 1")));
    }
    if (alpha - 1.0).abs() < POLE_GUARD {
        return Err(Error::PoleProximity { arg: format!("alpha = {alpha}"), dist: (alpha - 1.0).abs() });
    }
    let (b, bh) = (p.b, p.bhat);
    let lg = alpha * b * b.ln() + alpha * bh * bh.ln() + 0.5 * alpha * std::f64::consts::LN_2 + 2.0 * ln_gamma_real(0.5 * (1.0 + alpha))
        - ln_gamma_real(1.0 + b * alpha)
        - ln_gamma_real(1.0 + bh * alpha)
        - ln_gamma_real(1.0 + 0.5 * alpha);
    Ok(3.0 * PI * b * bh * alpha / (2.0 * (alpha - 1.0)) * lg.exp())
}

/// N → ∞ boundary density ρ_bd(x) = −π ∫_{ℝ+ic} dλ/(2iπ) e^{iλx} 𝔯(−iλ)/R(λ).
pub fn rho_bd_limit(x: f64, p: &ModelParams) -> Result<f64> {
    check_x(x)?;
    let k = 3.0 * PI * p.b * p.bhat / (2.0 * sqrt_pbb(p));
    let f = |l: Complex64| {
        let a = -i() * l;
        k * i() / ((a - 1.0) * a * a) * (-ln_r_hat(-l, p)).exp()
    };
    Ok((-PI * line_transform(f, x, C_INV_R, DECAY)?).re)
}

/// The n-th term of the residue series for ρ_bd; errors where two
/// pole families coincide.
pub fn rho_bd_summand(n: u64, x: f64, p: &ModelParams) -> Result<f64> {
    let nf = n as f64;
    let mut acc = 0.0;
    for &bb in &[p.b, p.bhat] {
        let s = (PI * nf / (2.0 * bb)).sin();
        if s.abs() < 1e-8 {
            return Err(Error::PoleProximity { arg: format!("n/b = {}", nf / bb), dist: s.abs() });
        }
        let cot = (PI * nf / (2.0 * bb)).cos() / s;
        acc += (-nf * x / bb).exp() / (2.0 * bb) * cot * cot * frak_r(nf / bb, p)?;
    }
    let s = (2.0 * PI * p.b * nf).sin();
    if s.abs() < 1e-8 {
        return Err(Error::PoleProximity { arg: format!("2n = {}", 2.0 * nf), dist: s.abs() });
    }
    Ok(acc - (-2.0 * nf * x).exp() * frak_r(2.0 * nf, p)? / (s * s))
}

/// Partial sums of the residue series for ρ_bd(x), x > 0, until the terms
/// fall below 1e−12 of the sum (at most 10⁵ terms).
pub fn rho_bd_series(x: f64, p: &ModelParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain("series form needs x > 0".into()));
    }
    sum_series(|n| rho_bd_summand(n, x, p), 1)
}

fn sum_series<F: Fn(u64) -> Result<f64>>(term: F, start: u64) -> Result<f64> {
    let mut acc = 0.0;
    let mut small = 0;
    for n in start..start + 100_000 {
        let t = term(n)?;
        acc += t;
        // terms are not monotone (cot², sin² factors); require a run of small ones
        if t.abs() < 1e-12 * acc.abs().max(1e-300) {
            small += 1;
            if small >= 5 {
                return Ok(acc);
            }
        } else {
            small = 0;
        }
    }
    Ok(acc)
}

/// 𝔩(α) = 6/(α²(α+1)) b^{−αb} b̂^{−αb̂} 2^{−α/2} Γ(1+bα)Γ(1+b̂α)Γ(1+α/2)/Γ((1+α)/2)².
pub fn frak_l(alpha: f64, p: &ModelParams) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must be positive")));
    }
    let (b, bh) = (p.b, p.bhat);
    let lg = -alpha * b * b.ln() - alpha * bh * bh.ln() - 0.5 * alpha * std::f64::consts::LN_2 + ln_gamma_real(1.0 + b * alpha)
        + ln_gamma_real(1.0 + bh * alpha)
        + ln_gamma_real(1.0 + 0.5 * alpha)
        - 2.0 * ln_gamma_real(0.5 * (1.0 + alpha));
    Ok(6.0 / (alpha * alpha * (alpha + 1.0)) * lg.exp())
}

/// 𝔲(α) = (3α+2)/(α(α+1)) + b ln 2b + b̂ ln 2b̂ + ψ((1+α)/2) − bψ(1+bα) − b̂ψ(1+b̂α) − ½ψ(1+α/2).
pub fn frak_u(alpha: f64, p: &ModelParams) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must be positive")));
    }
    let (b, bh) = (p.b, p.bhat);
    Ok((3.0 * alpha + 2.0) / (alpha * (alpha + 1.0)) + b * (2.0 * b).ln() + bh * (2.0 * bh).ln() + digamma(0.5 * (1.0 + alpha))
        - b * digamma(1.0 + b * alpha)
        - bh * digamma(1.0 + bh * alpha)
        - 0.5 * digamma(1.0 + 0.5 * alpha))
}

/// J_ext(x) = −(π²/4) ∫_{ℝ+ic} dλ/(2iπ) e^{iλx} 𝔩(−iλ)R(λ), x ≥ 0.
pub fn j_ext(x: f64, p: &ModelParams) -> Result<f64> {
    check_x(x)?;
    let k = 6.0 * sqrt_pbb(p);
    let f = |l: Complex64| k * (-i() * l) / (i() * (1.0 - i() * l)) * ln_r_hat(-l, p).exp();
    Ok((-0.25 * PI * PI * line_transform(f, x, C_R, DECAY)?).re)
}

/// J_ext(0) in closed form: −(3/4)(2π)^{5/2} b^b b̂^{b̂}/(Γ(b)Γ(b̂)).
pub fn j_ext_zero(p: &ModelParams) -> f64 {
    let (b, bh) = (p.b, p.bhat);
    -0.75 * (2.0 * PI).powf(2.5) * b.powf(b) * bh.powf(bh) / (crate::specfun::gamma(b) * crate::specfun::gamma(bh))
}

/// The n-th term of the residue series for J_ext.
pub fn j_ext_summand(n: u64, x: f64, p: &ModelParams) -> Result<f64> {
    let a = 2.0 * n as f64 + 1.0;
    let mut cots = 0.0;
    for &bb in &[p.b, p.bhat] {
        let s = (a * PI * bb).sin();
        if s.abs() < 1e-8 {
            return Err(Error::PoleProximity { arg: format!("(2n+1)b = {}", a * bb), dist: s.abs() });
        }
        cots += PI * bb * (a * PI * bb).cos() / s;
    }
    Ok(frak_l(a, p)? * (2.0 * PI * p.b * a).sin() * (x + frak_u(a, p)? - cots) * (-a * x).exp())
}

/// Partial sums of the J_ext residue series, x > 0.
pub fn j_ext_series(x: f64, p: &ModelParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain("series form needs x > 0".into()));
    }
    sum_series(|n| j_ext_summand(n, x, p), 0)
}

/// J_tot(x) = J_ext(0)eˣ − J_ext(x).
pub fn j_tot(x: f64, p: &ModelParams) -> Result<f64> {
    Ok(j_ext_zero(p) * x.exp() - j_ext(x, p)?)
}

/// J_ext^{(N)}(x) = (κe^{b̄}/2N) ∫_{ℝ+ic} dλ/(2iπ) e^{iλx} R(λ)W₁(λ).
pub fn j_ext_n(x: f64, geom: &ScaledGeometry, p: &ModelParams) -> Result<f64> {
    let chi = ChiLeadingOrder::new(geom, p)?;
    j_ext_n_with(&chi, x, geom, p)
}

fn j_ext_n_with(chi: &ChiLeadingOrder, x: f64, geom: &ScaledGeometry, p: &ModelParams) -> Result<f64> {
    check_x(x)?;
    let pre = p.kappa * geom.bbar.exp() / (2.0 * geom.n as f64);
    Ok((pre * line_transform(|l| r_w1(chi, l), x, C_R, DECAY)?).re)
}

/// H_N(a_N) − J_ext^{(N)}(0): zero up to the dropped exponentially small terms.
pub fn edge_mismatch(geom: &ScaledGeometry, p: &ModelParams) -> Result<f64> {
    let h = p.kappa / geom.n as f64 * (geom.tau * geom.a_n).sinh();
    Ok(h - j_ext_n(0.0, geom, p)?)
}

/// V′_eff(ξ) off the support: τ{H_N(ξ) − J_ext^{(N)}(τ(a_N−ξ))} for ξ < a_N, and
/// the reflected value −V′_eff(a_N+b_N−ξ) for ξ > b_N.
pub fn effective_potential_closed(xi: f64, geom: &ScaledGeometry, p: &ModelParams) -> Result<f64> {
    if xi >= geom.a_n && xi <= geom.b_n {
        return Err(Error::Domain(format!("xi = {xi} lies on the support")));
    }
    if xi > geom.b_n {
        return Ok(-effective_potential_closed(geom.a_n + geom.b_n - xi, geom, p)?);
    }
    let chi = ChiLeadingOrder::new(geom, p)?;
    let h = p.kappa / geom.n as f64 * (geom.tau * xi).sinh();
    Ok(geom.tau * (h - j_ext_n_with(&chi, geom.tau * (geom.a_n - xi), geom, p)?))
}

/// V_eff(ξ) − C_eq = ∫_{a_N}^{ξ} V′_eff for ξ < a_N (and the mirror image for ξ > b_N).
pub fn effective_potential_excess(xi: f64, geom: &ScaledGeometry, p: &ModelParams) -> Result<f64> {
    if xi >= geom.a_n && xi <= geom.b_n {
        return Ok(0.0);
    }
    let xi = if xi > geom.b_n { geom.a_n + geom.b_n - xi } else { xi };
    let chi = ChiLeadingOrder::new(geom, p)?;
    let s = crate::specfun::QuadratureSpec { abs_tol: 1e-14, rel_tol: 1e-8, ..spec() };
    let f = |eta: f64| {
        let h = p.kappa / geom.n as f64 * (geom.tau * eta).sinh();
        geom.tau * (h - j_ext_n_with(&chi, geom.tau * (geom.a_n - eta), geom, p).unwrap_or(f64::NAN))
    };
    Ok(-integrate(f, xi, geom.a_n, &s)?.0)
}
