//! Explicit large-N formulas: Laurent coefficients of the Wiener–Hopf ratio,
//! the endpoint equation, leading-order χ, the equilibrium density, boundary
//! functions and the energy asymptotics.

pub mod boundary;
mod contour;
pub mod energy;
pub mod series;

pub use boundary::{
    density_eq, effective_potential_closed, frak_l, frak_r, frak_u, j_ext, j_ext_n, j_tot, rho_bd_limit, rho_bd_n,
    EquilibriumDensity,
};
pub use energy::{energy_asymptotic, energy_integrals, EnergyIntegrals};
pub use series::{convolution_factors, ConvFactor};

use crate::error::{Error, Result};
use crate::specfun::wh::ln_r_hat;
use crate::specfun::{gamma, ModelParams};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// α̃ in the error budget x̄⁴e^{−x̄(1−α̃)}.
pub const ALPHA_TILDE: f64 = 0.5;
/// Offset ε′ of the constraint contours.
pub const EPS_PRIME: f64 = 0.1;
const CAUCHY_RADIUS: f64 = 0.5;
const CAUCHY_NODES: usize = 256;
/// Taylor coefficients kept for evaluating u_reg near the origin.
const N_TAYLOR: usize = 48;
const TAYLOR_DISC: f64 = 0.1;

/// Rescaled support geometry: a_N, b_N and their images under τ_N = ln N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledGeometry {
    pub n: u64,
    pub tau: f64,
    pub a_n: f64,
    pub b_n: f64,
    pub abar: f64,
    pub bbar: f64,
    pub xbar: f64,
}

impl ScaledGeometry {
    pub fn new(n: u64, a_n: f64, b_n: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParam(format!("N = {n} must be at least 2")));
        }
        if !(a_n < b_n) || !a_n.is_finite() || !b_n.is_finite() {
            return Err(Error::InvalidParam(format!("need finite a_N < b_N, got [{a_n}, {b_n}]")));
        }
        let tau = (n as f64).ln();
        Ok(ScaledGeometry { n, tau, a_n, b_n, abar: tau * a_n, bbar: tau * b_n, xbar: tau * (b_n - a_n) })
    }

    /// Symmetric support [−b̄/τ, b̄/τ].
    pub fn symmetric(n: u64, bbar: f64) -> Result<Self> {
        let tau = (n as f64).ln();
        Self::new(n, -bbar / tau, bbar / tau)
    }

    pub fn is_symmetric(&self) -> bool {
        (self.a_n + self.b_n).abs() <= 1e-14 * self.b_n.abs()
    }

    /// δ_N = x̄⁴e^{−x̄(1−α̃)}: relative size of the terms dropped by the leading-order χ.
    pub fn error_budget(&self) -> f64 {
        error_budget(self.xbar)
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }
}

pub fn error_budget(xbar: f64) -> f64 {
    xbar.powi(4) * (-xbar * (1.0 - ALPHA_TILDE)).exp()
}

/// Coefficients of R↓(λ)/R↑(λ)·e^{−iλx̄} = Σ_ℓ c_ℓ λ^{ℓ−3}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaurentCoeffs {
    pub xbar: f64,
    pub c: [Complex64; 4],
    /// c_k = (−i)^k w_k.
    pub w: [f64; 4],
    #[serde(skip)]
    taylor: Vec<Complex64>,
}

impl LaurentCoeffs {
    /// c_k for k < 48.
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.taylor[k]
    }

    /// w̃_k: w₁ = 2b̄w̃₁, w₂ = 2b̄²w̃₂ with x̄ = 2b̄.
    pub fn w_tilde(&self) -> (f64, f64) {
        let bbar = 0.5 * self.xbar;
        (self.w[1] / (2.0 * bbar), self.w[2] / (2.0 * bbar * bbar))
    }
}

/// Distance from the origin to the nearest singularity of R↓/R↑·λ³ (the pole of R↓ at i).
fn nearest_singularity(p: &ModelParams) -> f64 {
    1.0f64.min(1.0 / p.b.max(p.bhat))
}

/// Taylor coefficients of r̂(−λ)/r̂(λ) at 0 by the trapezoid rule on |λ| = 0.5.
fn ratio_taylor(p: &ModelParams) -> Vec<Complex64> {
    let mut psi = vec![Complex64::new(0.0, 0.0); N_TAYLOR];
    for j in 0..CAUCHY_NODES {
        let th = 2.0 * PI * j as f64 / CAUCHY_NODES as f64;
        let l = Complex64::from_polar(CAUCHY_RADIUS, th);
        let h = (ln_r_hat(-l, p) - ln_r_hat(l, p)).exp();
        for (k, s) in psi.iter_mut().enumerate() {
            *s += h * Complex64::from_polar(1.0, -(k as f64) * th);
        }
    }
    let mut scale = 1.0 / CAUCHY_NODES as f64;
    for s in psi.iter_mut() {
        *s *= scale;
        scale /= CAUCHY_RADIUS;
    }
    psi
}

/// Laurent coefficients c₀..c₃ at the given x̄.
///
/// The Gamma ratio is expanded by a Cauchy integral; the exponential is then
/// multiplied in exactly, which avoids e^{x̄/2}-sized cancellations on the circle.
pub fn laurent_coeffs(xbar: f64, p: &ModelParams) -> Result<LaurentCoeffs> {
    if !(xbar > 0.0) || !xbar.is_finite() {
        return Err(Error::Domain(format!("xbar = {xbar} must be positive")));
    }
    let dist = nearest_singularity(p);
    if CAUCHY_RADIUS >= dist {
        return Err(Error::PoleProximity { arg: format!("Cauchy radius {CAUCHY_RADIUS}"), dist: dist - CAUCHY_RADIUS });
    }
    let psi = ratio_taylor(p);
    let mut e = vec![Complex64::new(1.0, 0.0); N_TAYLOR];
    for j in 1..N_TAYLOR {
        e[j] = e[j - 1] * Complex64::new(0.0, -xbar) / j as f64;
    }
    let taylor: Vec<Complex64> = (0..N_TAYLOR).map(|k| (0..=k).map(|j| psi[k - j] * e[j]).sum()).collect();
    let c = [taylor[0], taylor[1], taylor[2], taylor[3]];
    let mut w = [0.0; 4];
    let mut rot = Complex64::new(1.0, 0.0);
    for k in 0..4 {
        w[k] = (c[k] / rot).re;
        rot *= Complex64::new(0.0, -1.0);
    }
    Ok(LaurentCoeffs { xbar, c, w, taylor })
}

/// 𝔱(x) = (6/x²)(2 + w₂ − w₁ − w₁w₃/w₂) with w_k taken at x̄ = x.
pub fn frak_t(x: f64, p: &ModelParams) -> Result<f64> {
    let w = laurent_coeffs(x, p)?.w;
    Ok(6.0 / (x * x) * (2.0 + w[2] - w[1] - w[1] * w[3] / w[2]))
}

/// ϑ = 2κ/(3(2π)^{5/2}) · Γ(b)Γ(b̂)/(b^b b̂^{b̂}).
pub fn vartheta(p: &ModelParams) -> f64 {
    let (b, bh) = (p.b, p.bhat);
    2.0 * p.kappa / (3.0 * (2.0 * PI).powf(2.5)) * gamma(b) * gamma(bh) / (b.powf(b) * bh.powf(bh))
}

/// Solves ϑ b̄² e^{b̄} 𝔱(2b̄) = N for b̄ on [1, 3 ln N]: bisection to width 1e−3,
/// then Newton on the logarithm of the map.
pub fn solve_endpoint(n: u64, p: &ModelParams) -> Result<ScaledGeometry> {
    if n < 16 {
        return Err(Error::InvalidParam(format!("N = {n} must be at least 16")));
    }
    let ln_n = (n as f64).ln();
    let ln_theta = vartheta(p).ln();
    let phi = |bb: f64| -> Result<f64> {
        let t = frak_t(2.0 * bb, p)?;
        if !(t > 0.0) {
            return Err(Error::Domain(format!("frak_t({}) = {t} is not positive", 2.0 * bb)));
        }
        Ok(ln_theta + 2.0 * bb.ln() + bb + t.ln() - ln_n)
    };
    let (mut lo, mut hi) = (1.0, 3.0 * ln_n);
    if phi(lo)? > 0.0 || phi(hi)? < 0.0 {
        return Err(Error::NoRoot { lo, hi });
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if phi(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut bb = 0.5 * (lo + hi);
    let h = 1e-5;
    for it in 0.. {
        let f = phi(bb)?;
        let d = (phi(bb + h)? - phi(bb - h)?) / (2.0 * h);
        let step = f / d;
        bb = (bb - step).clamp(lo - 1e-3, hi + 1e-3);
        if step.abs() < 1e-12 * bb {
            break;
        }
        if it == 50 {
            return Err(Error::NoConvergence { iters: it, residual: f });
        }
    }
    ScaledGeometry::symmetric(n, bb)
}

/// Which explicit representation of χ is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChiRegion {
    /// Above Γ↑ (Im λ > 0).
    AboveUp,
    /// Between ℝ and Γ↓ (Im λ ≤ 0), continued analytically.
    BelowDown,
}

pub type Mat2 = [[Complex64; 2]; 2];

/// Leading-order solution χ of the Riemann–Hilbert problem (Π ≡ I).
#[derive(Debug, Clone, PartialEq)]
pub struct ChiLeadingOrder {
    pub coeffs: LaurentCoeffs,
    /// q₁ = −c₁/c₂.
    pub q1: Complex64,
    /// q₂ = c₂.
    pub q2: Complex64,
    pub params: ModelParams,
}

impl ChiLeadingOrder {
    pub fn new(geom: &ScaledGeometry, p: &ModelParams) -> Result<Self> {
        let coeffs = laurent_coeffs(geom.xbar, p)?;
        let q1 = -coeffs.c[1] / coeffs.c[2];
        let q2 = coeffs.c[2];
        Ok(ChiLeadingOrder { coeffs, q1, q2, params: *p })
    }

    fn c(&self, k: usize) -> Complex64 {
        self.coeffs.c[k]
    }

    pub fn r_up(&self, l: Complex64) -> Complex64 {
        l * l * l * ln_r_hat(l, &self.params).exp()
    }

    pub fn r_down(&self, l: Complex64) -> Complex64 {
        ln_r_hat(-l, &self.params).exp()
    }

    /// 1/R↓(λ), finite (zero) at the poles of R↓.
    pub fn inv_r_down(&self, l: Complex64) -> Complex64 {
        (-ln_r_hat(-l, &self.params)).exp()
    }

    /// R↓(λ)/R↑(λ)·e^{−iλx̄}.
    fn ratio(&self, l: Complex64) -> Complex64 {
        let i = Complex64::i();
        (ln_r_hat(-l, &self.params) - ln_r_hat(l, &self.params) - i * l * self.coeffs.xbar).exp() / (l * l * l)
    }

    /// u_reg(λ) = R↓/R↑·e^{−iλx̄} − Σ_{ℓ≤2} c_ℓ λ^{ℓ−3}; u_reg(0) = c₃.
    pub fn u_reg(&self, l: Complex64) -> Complex64 {
        if l.norm() < TAYLOR_DISC {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in (3..N_TAYLOR).rev() {
                acc = acc * l + self.coeffs.taylor[k];
            }
            return acc;
        }
        let l3 = l * l * l;
        self.ratio(l) - (self.c(0) + self.c(1) * l + self.c(2) * l * l) / l3
    }

    /// χ above Γ↑.
    pub fn above(&self, l: Complex64) -> Result<Mat2> {
        if !(l.im > 0.0) {
            return Err(Error::Domain(format!("lambda = {l} is not above the real axis")));
        }
        let c2 = self.c(2);
        let ru = self.r_up(l);
        let poly = (self.c(0) + self.c(1) * l + c2 * l * l) / (l * l * l);
        Ok([[1.0 / (c2 * ru), (l + self.q1) / ru], [-ru * poly / c2, ru * (l - self.q1) / (l * l * l)]])
    }

    /// χ between ℝ and Γ↓.
    pub fn below(&self, l: Complex64) -> Result<Mat2> {
        if l.im > 0.0 {
            return Err(Error::Domain(format!("lambda = {l} is above the real axis")));
        }
        let c2 = self.c(2);
        let rd = self.r_down(l);
        let ird = self.inv_r_down(l);
        let u = self.u_reg(l);
        // c₂ + (λ+q₁)u_reg with the polynomial part cancelled analytically away from 0
        let top = if l.norm() < TAYLOR_DISC {
            c2 + (l + self.q1) * u
        } else {
            let (c0, c1, q1) = (self.c(0), self.c(1), self.q1);
            (l + q1) * self.ratio(l) - (c0 + q1 * c1) / (l * l) - q1 * c0 / (l * l * l)
        };
        Ok([[u * ird / c2, top * ird], [rd / c2, rd * (l + self.q1)]])
    }

    /// Evaluates in the requested region.
    pub fn eval(&self, l: Complex64, region: ChiRegion) -> Result<Mat2> {
        match region {
            ChiRegion::AboveUp => self.above(l),
            ChiRegion::BelowDown => self.below(l),
        }
    }

    /// d/dλ of the entries above Γ↑, by a Cauchy integral on a circle of radius r.
    pub fn above_derivative(&self, l: Complex64, r: f64) -> Result<Mat2> {
        if l.im - r <= 0.0 {
            return Err(Error::Domain(format!("circle of radius {r} around {l} leaves the upper half plane")));
        }
        let m = 64;
        let mut d = [[Complex64::new(0.0, 0.0); 2]; 2];
        for j in 0..m {
            let e = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
            let v = self.above(l + r * e)?;
            for a in 0..2 {
                for b in 0..2 {
                    d[a][b] += v[a][b] / (e * r * m as f64);
                }
            }
        }
        Ok(d)
    }
}

pub fn det(m: &Mat2) -> Complex64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// χ(λ) at leading order in the given region.
pub fn chi_leading(lambda: Complex64, region: ChiRegion, geom: &ScaledGeometry, p: &ModelParams) -> Result<Mat2> {
    ChiLeadingOrder::new(geom, p)?.eval(lambda, region)
}

/// 𝒥₁₂[H_N] = −κχ₁₂(i)/(4πNτ)·(e^{b̄} − e^{−ā}); vanishes iff a_N = −b_N.
pub fn constraint_j12(geom: &ScaledGeometry, p: &ModelParams) -> Result<f64> {
    let chi = ChiLeadingOrder::new(geom, p)?;
    let x12 = chi.above(Complex64::i())?[0][1];
    let v = -p.kappa * x12 / (4.0 * PI * geom.nf() * geom.tau) * (geom.bbar.exp() - (-geom.abar).exp());
    Ok(v.re)
}

/// 𝒥₁₂[H_N] from the line integrals on ℝ ± iε′, without taking residues.
pub fn constraint_j12_quadrature(geom: &ScaledGeometry, p: &ModelParams) -> Result<f64> {
    let chi = ChiLeadingOrder::new(geom, p)?;
    let i = Complex64::i();
    let (eb, ea) = (geom.bbar.exp(), geom.abar.exp());
    let up = |m: Complex64| {
        let x12 = chi.above(m).map(|c| c[0][1]).unwrap_or(Complex64::new(f64::NAN, 0.0));
        x12 * (eb / (m - i) - 1.0 / (eb * (m + i)))
    };
    // ℝ − iε′ is mapped onto ℝ + iε′ by μ → −μ
    let down = |v: Complex64| {
        let m = -v;
        let x12 = chi.below(m).map(|c| c[0][1]).unwrap_or(Complex64::new(f64::NAN, 0.0));
        x12 * (ea / (m - i) - 1.0 / (ea * (m + i)))
    };
    let i1 = contour::line_transform(up, 0.0, EPS_PRIME, 1.5)?;
    let i2 = contour::line_transform(down, 0.0, EPS_PRIME, 1.5)?;
    let v = -p.kappa / (4.0 * PI * geom.nf() * geom.tau) * (i1 - i2);
    Ok(v.re)
}

/// ∫ρ_eq at leading order: (ϑ/N) b̄² e^{b̄} 𝔱(2b̄). Requires a symmetric support.
pub fn normalization_integral(geom: &ScaledGeometry, p: &ModelParams) -> Result<f64> {
    if !geom.is_symmetric() {
        return Err(Error::Domain("normalization_integral needs a_N = -b_N".into()));
    }
    let bb = geom.bbar;
    Ok(vartheta(p) * bb * bb * bb.exp() * frak_t(2.0 * bb, p)? / geom.nf())
}

/// ∫ρ_eq from the χ-bracket (values of χ at ±i and of χ₋ and χ′₁₁;₋ at 0).
pub fn normalization_exact(geom: &ScaledGeometry, p: &ModelParams) -> Result<f64> {
    let chi = ChiLeadingOrder::new(geom, p)?;
    let i = Complex64::i();
    let zero = Complex64::new(0.0, 0.0);
    let up = chi.above(i)?;
    let dn_i = chi.below(-i)?;
    let m0 = chi.below(zero)?;
    // χ₁₁;₋ = u_reg/(c₂R↓): derivative from the Taylor data of u_reg and a Cauchy derivative of 1/R↓
    let d_ird = cauchy_derivative(|l| chi.inv_r_down(l), zero, 0.25);
    let d11 = (chi.coeffs.coeff(4) * chi.inv_r_down(zero) + chi.coeffs.coeff(3) * d_ird) / chi.q2;
    let (eb, ema) = (geom.bbar.exp(), (-geom.abar).exp());
    let v = i * p.kappa / (2.0 * PI * geom.nf())
        * (i * up[0][1] * d11 * (eb - ema)
            + eb * (up[0][1] * m0[0][0] - m0[0][1] * up[0][0])
            + ema * (dn_i[0][1] * m0[0][0] - m0[0][1] * dn_i[0][0]));
    Ok(v.re)
}

/// f′(z₀) by the trapezoid rule on a circle.
pub(crate) fn cauchy_derivative<F: Fn(Complex64) -> Complex64>(f: F, z0: Complex64, r: f64) -> Complex64 {
    let m = 64;
    (0..m)
        .map(|j| {
            let e = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
            f(z0 + r * e) / (e * r * m as f64)
        })
        .sum()
}
