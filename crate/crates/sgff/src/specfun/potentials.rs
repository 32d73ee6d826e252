use super::quad::{integrate, QuadratureSpec};
use super::{sinhc, ModelParams, POLE_GUARD};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// tanh(β/2 − iπb)/tanh(β/2 + iπb).
pub fn smatrix(beta: Complex64, p: &ModelParams) -> Result<Complex64> {
    let i = Complex64::i();
    // poles: β ≡ −2iπb and β ≡ iπ + 2iπb modulo 2iπ
    for pole in [-2.0 * PI * p.b, PI + 2.0 * PI * p.b] {
        let d = beta - i * pole;
        let m = (d.im / (2.0 * PI)).round();
        let dist = (d - i * (2.0 * PI * m)).norm();
        if dist < POLE_GUARD {
            return Err(Error::PoleProximity { arg: format!("beta = {beta}"), dist });
        }
    }
    let ipb = i * PI * p.b;
    Ok((beta / 2.0 - ipb).tanh() / (beta / 2.0 + ipb).tanh())
}

/// sinh(xb)sinh(xb̂)sinh(x/2)/(x sinh x)
fn s_amplitude(x: f64, p: &ModelParams) -> f64 {
    if x < 1.0 {
        0.5 * p.b * p.bhat * x * sinhc(p.b * x) * sinhc(p.bhat * x) * sinhc(0.5 * x) / sinhc(x)
    } else {
        let e = |t: f64| -(-t).exp_m1();
        e(2.0 * p.b * x) * e(2.0 * p.bhat * x) * e(x) / (4.0 * x * e(2.0 * x))
    }
}

/// S(β) for real β from its integral representation. The 1/(4x) tail of the
/// amplitude is integrated exactly.
pub fn smatrix_integral(beta: f64, p: &ModelParams, spec: &QuadratureSpec) -> Result<Complex64> {
    let a = beta / PI;
    let xmax = 40.0 / (2.0 * p.cmin());
    let f = |x: f64| {
        let d = if x < 1e-3 { s_amplitude(x, p) * (a * x).sin() - 0.25 * a * sinc(a * x) } else { (s_amplitude(x, p) - 0.25 / x) * (a * x).sin() };
        d
    };
    let (v, _) = integrate(f, 0.0, xmax, spec)?;
    let total = v + 0.125 * PI * a.signum() * if a == 0.0 { 0.0 } else { 1.0 };
    // sinh(xβ/(iπ)) = −i sin(xβ/π)
    Ok((Complex64::new(0.0, -8.0 * total)).exp())
}

fn sinc(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        1.0 - y * y / 6.0
    } else {
        y.sin() / y
    }
}

/// Returns h(x) = sinh(xb)sinh(xb̂)sinh(x/2)/(x sinh²x) expressed as
/// e^{−x}(1−e^{−x})/(2x) · Q(x); this gives Q(x).
fn q_ratio(x: f64, p: &ModelParams) -> f64 {
    let e = |t: f64| -(-t).exp_m1();
    e(2.0 * p.b * x) * e(2.0 * p.bhat * x) / (e(2.0 * x) * e(2.0 * x))
}

fn h_small(x: f64, p: &ModelParams) -> f64 {
    let s = sinhc(x);
    0.5 * p.b * p.bhat * sinhc(p.b * x) * sinhc(p.bhat * x) * sinhc(0.5 * x) / (s * s)
}

/// h(x) − e^{−x}(1−e^{−x})/(2x)
fn h_minus_tail(x: f64, p: &ModelParams) -> f64 {
    let em = -(-x).exp_m1() / x; // (1−e^{−x})/x
    if x < 1.0 {
        h_small(x, p) - 0.5 * (-x).exp() * em
    } else {
        0.5 * (-x).exp() * em * (q_ratio(x, p) - 1.0)
    }
}

/// h(x)cosh(x) − (1−e^{−x})/(4x)
fn hcosh_minus_tail(x: f64, p: &ModelParams) -> f64 {
    let em = -(-x).exp_m1() / x;
    if x < 1.0 {
        h_small(x, p) * x.cosh() - 0.25 * em
    } else {
        0.25 * em * ((1.0 + (-2.0 * x).exp()) * q_ratio(x, p) - 1.0)
    }
}

/// Minimal two-particle form factor F(β), 0 ≤ Im β ≤ 2π, from its cosine
/// integral representation.
pub fn fmin2(beta: Complex64, p: &ModelParams, spec: &QuadratureSpec) -> Result<Complex64> {
    if !(beta.im >= -1e-14 && beta.im <= 2.0 * PI + 1e-14) {
        return Err(Error::Domain(format!("fmin2 needs 0 <= Im beta <= 2pi, got {beta}")));
    }
    let i = Complex64::i();
    let theta = (i * PI - beta) / PI;
    let one_m = 1.0 - i * theta;
    let one_p = 1.0 + i * theta;
    if one_m.norm() < 1e-300 || one_p.norm() < 1e-300 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let tail = 0.25 * ((2.0 - i * theta).ln() - one_m.ln() + (2.0 + i * theta).ln() - one_p.ln());
    let rate = 1.0 + 2.0 * p.cmin() - theta.im.abs();
    let xmax = 40.0 / rate;
    let f = |x: f64| (theta * x).cos() * h_minus_tail(x, p);
    let (rem, _) = integrate(f, 0.0, xmax, spec)?;
    Ok((-4.0 * (rem + tail)).exp())
}

/// Two-body potential w(λ) = ln[F(λ)F(−λ)], λ real and nonzero.
pub fn potential_w(lambda: f64, p: &ModelParams, spec: &QuadratureSpec) -> Result<f64> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::Domain(format!("potential_w needs finite nonzero lambda, got {lambda}")));
    }
    let a = lambda / PI;
    let xmax = 40.0 / (2.0 * p.cmin());
    let f = |x: f64| hcosh_minus_tail(x, p) * (a * x).cos();
    let (rem, _) = integrate(f, 0.0, xmax, spec)?;
    Ok(2.0 * a.abs().ln() - (a * a).ln_1p() - 8.0 * rem)
}

/// v_{α,η}(λ) = ln[(sinh²λ + sin²α)/(sinh²λ + sin²η)].
pub fn potential_v(lambda: f64, alpha: f64, eta: f64) -> Result<f64> {
    if eta < 0.0 {
        return Err(Error::Domain("eta must be >= 0".into()));
    }
    let s2a = alpha.sin().powi(2);
    let s2e = eta.sin().powi(2);
    let sh2 = lambda.sinh().powi(2);
    if sh2 + s2e == 0.0 {
        if s2a == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Domain("potential_v at lambda = 0 with eta = 0".into()));
    }
    Ok(((s2a - s2e) / (sh2 + s2e)).ln_1p())
}

/// (w⁺, w⁻) = (w + ½v_{2πb,0⁺}, −½v_{2πb,0⁺}).
pub fn potentials_pm(lambda: f64, p: &ModelParams, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let w = potential_w(lambda, p, spec)?;
    let v = potential_v(lambda, 2.0 * PI * p.b, 0.0)?;
    Ok((w + 0.5 * v, -0.5 * v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RKind {
    Plus,
    Minus,
    R,
}

/// Fourier symbols R⁽⁺⁾, R⁽⁻⁾ and R = 2R⁽⁺⁾.
pub fn rfun(lambda: f64, which: RKind, p: &ModelParams) -> f64 {
    let l = lambda.abs();
    let s = lambda.signum();
    let e = |t: f64| -(-t).exp_m1();
    let plus = if l < 1.0 {
        let c = (0.5 * PI * lambda).cosh();
        0.5 * PI.powi(3) * p.b * p.bhat * lambda.powi(3) * sinhc(PI * p.b * lambda) * sinhc(PI * p.bhat * lambda) * sinhc(0.5 * PI * lambda)
            / (c * c)
    } else {
        let d = 1.0 + (-PI * l).exp();
        s * 0.5 * e(2.0 * PI * p.b * l) * e(2.0 * PI * p.bhat * l) * e(PI * l) / (d * d)
    };
    match which {
        RKind::Plus => plus,
        RKind::R => 2.0 * plus,
        RKind::Minus => {
            if l < 1.0 {
                2.0 * PI * p.b * p.bhat * lambda * sinhc(PI * p.b * lambda) * sinhc(PI * p.bhat * lambda) / sinhc(0.5 * PI * lambda)
            } else {
                s * 0.5 * e(2.0 * PI * p.b * l) * e(2.0 * PI * p.bhat * l) / e(PI * l)
            }
        }
    }
}

/// Tabulated two-body potential for repeated evaluation (Monte Carlo, kernels).
///
/// Stores the smooth part r(λ) = w(λ) − 2ln|λ/π| + ln(1+(λ/π)²) on a uniform
/// grid of [0, L] and interpolates with cubic Lagrange polynomials; beyond L the
/// potential is below 1e−14 and is set to zero.
#[derive(Debug, Clone)]
pub struct WTable {
    h: f64,
    len: f64,
    vals: Vec<f64>,
}

impl WTable {
    pub fn new(p: &ModelParams, spec: &QuadratureSpec) -> Result<Self> {
        use rayon::prelude::*;
        let len: f64 = 40.0;
        let h: f64 = 2e-3;
        let n = (len / h).round() as usize + 4;
        let vals: Result<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let lam = (k as f64 - 1.0) * h;
                let lam = if lam == 0.0 { 1e-300 } else { lam.abs() };
                smooth_part(lam, p, spec)
            })
            .collect();
        Ok(WTable { h, len, vals: vals? })
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        let l = lambda.abs();
        if l >= self.len {
            return 0.0;
        }
        let a = l / PI;
        2.0 * a.ln() - (a * a).ln_1p() + self.smooth(l)
    }

    /// e^{w(λ)}, finite at λ = 0.
    pub fn exp_w(&self, lambda: f64) -> f64 {
        let l = lambda.abs();
        if l >= self.len {
            return 1.0;
        }
        let a2 = (l / PI).powi(2);
        a2 / (1.0 + a2) * self.smooth(l).exp()
    }

    fn smooth(&self, l: f64) -> f64 {
        let t = l / self.h + 1.0;
        let k = (t.floor() as usize).clamp(1, self.vals.len() - 3);
        let u = t - k as f64;
        let (y0, y1, y2, y3) = (self.vals[k - 1], self.vals[k], self.vals[k + 1], self.vals[k + 2]);
        // cubic Lagrange on nodes −1, 0, 1, 2
        -u * (u - 1.0) * (u - 2.0) / 6.0 * y0 + (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0 * y1 - (u + 1.0) * u * (u - 2.0) / 2.0 * y2
            + (u + 1.0) * u * (u - 1.0) / 6.0 * y3
    }
}

fn smooth_part(lambda: f64, p: &ModelParams, spec: &QuadratureSpec) -> Result<f64> {
    let a = lambda / PI;
    let xmax = 40.0 / (2.0 * p.cmin());
    let f = |x: f64| hcosh_minus_tail(x, p) * (a * x).cos();
    let (rem, _) = integrate(f, 0.0, xmax, spec)?;
    Ok(-8.0 * rem)
}
