use super::gamma::ln_gamma;
use super::{ModelParams, POLE_GUARD};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{LN_2, PI};

/// r̂(λ) = √(πbb̂) b^{−ibλ} b̂^{−ib̂λ} 2^{−iλ/2} Γ(½−iλ/2)² / [Γ(1−ibλ)Γ(1−ib̂λ)Γ(1−iλ/2)].
///
/// R↑(λ) = λ³ r̂(λ) and R↓(λ) = r̂(−λ). Poles at λ = −i(2n+1).
pub fn r_hat(lambda: Complex64, p: &ModelParams) -> Result<Complex64> {
    let i = Complex64::i();
    // pole of Γ(½ − iλ/2) at λ = −i(2n+1)
    if lambda.im < 0.0 {
        let n = ((-lambda.im - 1.0) / 2.0).round().max(0.0);
        let dist = (lambda + i * (2.0 * n + 1.0)).norm();
        if dist < POLE_GUARD {
            return Err(Error::PoleProximity { arg: format!("lambda = {lambda}"), dist });
        }
    }
    Ok(ln_r_hat(lambda, p).exp())
}

pub(crate) fn ln_r_hat(lambda: Complex64, p: &ModelParams) -> Complex64 {
    let i = Complex64::i();
    let (b, bh) = (p.b, p.bhat);
    let k = b * b.ln() + bh * bh.ln() + 0.5 * LN_2;
    0.5 * (PI * b * bh).ln() - i * lambda * k + 2.0 * ln_gamma(0.5 - i * lambda / 2.0)
        - ln_gamma(1.0 - i * b * lambda)
        - ln_gamma(1.0 - i * bh * lambda)
        - ln_gamma(1.0 - i * lambda / 2.0)
}

/// Upper Wiener–Hopf factor: analytic and zero-free above ℝ + iε (apart from the
/// triple zero at the origin).
pub fn r_up(lambda: Complex64, p: &ModelParams) -> Result<Complex64> {
    Ok(lambda * lambda * lambda * r_hat(lambda, p)?)
}

/// Lower Wiener–Hopf factor.
pub fn r_down(lambda: Complex64, p: &ModelParams) -> Result<Complex64> {
    r_hat(-lambda, p)
}

/// (R↑(λ), R↓(λ)).
pub fn wiener_hopf(lambda: Complex64, p: &ModelParams) -> Result<(Complex64, Complex64)> {
    Ok((r_up(lambda, p)?, r_down(lambda, p)?))
}
