//! The convolution factors 𝔞, 𝔡, 𝔞̃, 𝔡̃ splitting ρ_bd and J_ext into
//! manifestly signed pieces.
//!
//! 𝔡 collects the residues at in/b, in/b̂ and 𝔞 those at 2in; their series
//! stay finite when the two families of poles coincide. Near x = 0 the 𝔡
//! series decay like n^{−1/2}e^{−nx}; their tails are summed in closed form.

use crate::error::{Error, Result};
use crate::specfun::gamma::ln_gamma_real;
use crate::specfun::{digamma, ModelParams};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{LN_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConvFactor {
    A,
    D,
    ATilde,
    DTilde,
}

/// 𝔯_d(α) = 2^{α/2} b^{αb} b̂^{αb̂} 3πbb̂ Γ(1+α/2)/(Γ(1+bα)Γ(1+b̂α)).
pub fn r_d(alpha: f64, p: &ModelParams) -> f64 {
    let (b, bh) = (p.b, p.bhat);
    let lg = 0.5 * alpha * LN_2 + alpha * b * b.ln() + alpha * bh * bh.ln() + ln_gamma_real(1.0 + 0.5 * alpha)
        - ln_gamma_real(1.0 + b * alpha)
        - ln_gamma_real(1.0 + bh * alpha);
    3.0 * PI * b * bh * lg.exp()
}

/// 𝔯_h(α) = α/(2(α−1)) · Γ((1+α)/2)²/Γ(1+α/2)².
pub fn r_h(alpha: f64) -> f64 {
    alpha / (2.0 * (alpha - 1.0)) * (2.0 * (ln_gamma_real(0.5 * (1.0 + alpha)) - ln_gamma_real(1.0 + 0.5 * alpha))).exp()
}

/// 𝔩_d(α) = (1/2α) 2^{−α/2} b^{−αb} b̂^{−αb̂} Γ(1+bα)Γ(1+b̂α)/Γ(1+α/2).
pub fn l_d(alpha: f64, p: &ModelParams) -> f64 {
    0.5 / alpha * 3.0 * PI * p.b * p.bhat / r_d(alpha, p)
}

/// 𝔩_h(α) = 12/(α(α+1)) · Γ(1+α/2)²/Γ((1+α)/2)².
pub fn l_h(alpha: f64) -> f64 {
    12.0 / (alpha * (alpha + 1.0)) * (2.0 * (ln_gamma_real(1.0 + 0.5 * alpha) - ln_gamma_real(0.5 * (1.0 + alpha)))).exp()
}

const MAX_TERMS: u64 = 100_000;

/// Sums terms t(n), n ≥ start, each bounded in magnitude by bound(n) for all
/// later terms, until the bound drops below 1e−12 of the sum (cap 10⁵ terms).
fn sum_monotone<T: Fn(u64) -> f64>(t: T, start: u64) -> f64 {
    partial_sum(|n| (t(n), t(n).abs()), start).0
}

/// Sums t(n) = (term, envelope) from `start`; returns the sum and, if the
/// envelope never fell below 1e−12 of it, the first unsummed index.
fn partial_sum<T: Fn(u64) -> (f64, f64)>(t: T, start: u64) -> (f64, Option<u64>) {
    let mut acc = 0.0;
    for n in start..start + MAX_TERMS {
        let (v, env) = t(n);
        acc += v;
        if env <= 1e-12 * acc.abs() {
            return (acc, None);
        }
    }
    (acc, Some(start + MAX_TERMS))
}

/// Σ_{n≥m} h(n) for h(n) ≈ C n^{−1/2} e^{−ns}, fixed by h(m): the midpoint
/// integral C√(π/s) erfc(√((m−½)s)).
fn half_power_tail(h_m: f64, m: u64, s: f64) -> f64 {
    let mf = m as f64;
    let c = h_m * mf.sqrt() * (mf * s).exp();
    c * (PI / s).sqrt() * libm::erfc(((mf - 0.5) * s).sqrt())
}

/// The step functions for x < 0 and residue series for x > 0.
pub fn convolution_factors(x: f64, which: ConvFactor, p: &ModelParams) -> Result<f64> {
    if x == 0.0 || !x.is_finite() {
        return Err(Error::Domain(format!("convolution factors need finite x != 0, got {x}")));
    }
    let (b, bh) = (p.b, p.bhat);
    Ok(match which {
        ConvFactor::D if x < 0.0 => -0.75 * PI,
        ConvFactor::D => {
            let one = |bb: f64| {
                let s = x / bb;
                let h = |n: u64| (-(n as f64) * s).exp() / (2.0 * bb) * r_d(n as f64 / bb, p);
                let (acc, stop) = partial_sum(|n| (h(n), h(n)), 1);
                acc + stop.map_or(0.0, |m| half_power_tail(h(m), m, s))
            };
            one(b) + one(bh)
        }
        ConvFactor::A if x < 0.0 => -2.0 / PI,
        ConvFactor::A => sum_monotone(
            |n| {
                let nf = n as f64;
                4.0 * r_h(2.0 * nf) / (PI * PI)
                    * (-2.0 * nf * x).exp()
                    * (x + 1.0 / (2.0 * nf - 1.0) - 0.5 / nf + digamma(1.0 + nf) - digamma(0.5 + nf))
            },
            1,
        ),
        ConvFactor::DTilde if x < 0.0 => 0.0,
        ConvFactor::DTilde => {
            // sin² oscillates; bound each term by l_d(2n)e^{−2nx}
            let s = 2.0 * x;
            let theta = 4.0 * PI * b;
            let env = |n: u64| l_d(2.0 * n as f64, p) * (-(n as f64) * s).exp();
            let (acc, stop) = partial_sum(
                |n| {
                    let e = env(n);
                    ((2.0 * PI * n as f64 * b).sin().powi(2) * e, e)
                },
                1,
            );
            // sin² = (1 − cos θn)/2 on the tail
            let tail = stop.map_or(0.0, |m| {
                let e = env(m);
                let (mf, z) = (m as f64, Complex64::from_polar((-s).exp(), theta));
                let osc = (Complex64::from_polar(e, theta * mf) / (1.0 - z)).re;
                0.5 * (half_power_tail(e, m, s) - osc)
            });
            4.0 / PI * (acc + tail)
        }
        ConvFactor::ATilde if x < 0.0 => -3.0 * PI * x.exp(),
        ConvFactor::ATilde => sum_monotone(
            |n| {
                let nf = n as f64;
                l_h(2.0 * nf + 1.0)
                    * (x + 0.5 / (nf + 1.0) - 1.0 / (2.0 * nf + 1.0) + digamma(1.0 + nf) - digamma(0.5 + nf))
                    * (-(2.0 * nf + 1.0) * x).exp()
            },
            0,
        ),
    })
}

/// Alzer's bound ψ(x+1) − ψ(x+s) > (1−s)/(x+s) at s = ½: returns the margin.
pub fn alzer_margin(x: f64) -> f64 {
    digamma(x + 1.0) - digamma(x + 0.5) - 0.5 / (x + 0.5)
}
