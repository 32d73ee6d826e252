//! K-functions, form factor summands 𝒰_N, the bounding partition functions
//! 𝒵_{N,p} and the large-N envelope.

use crate::error::{Error, Result};
use crate::specfun::quad::{gauss_legendre_on, integrate};
use crate::specfun::{ModelParams, QuadratureSpec, WTable};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Largest N accepted by [`k_exp`]; the cost is 2^N.
pub const K_CAP: usize = 12;
/// Number of independent random streams a Monte Carlo run is split into.
const MC_CHUNKS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloSpec {
    pub samples: u64,
    pub seed: u64,
    /// Scale of the logistic proposal used to sample e^{−κ cosh β}.
    pub proposal_scale: f64,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        MonteCarloSpec { samples: 1_000_000, seed: 42, proposal_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    TensorQuadrature,
    MonteCarlo,
}

/// An estimate with its one-sigma error (zero for deterministic quadrature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub u_n_estimate: f64,
    pub u_n_error: f64,
    /// N!(2π)^N 𝒰_N: the quantity bounded by the chain.
    pub z_n: f64,
    pub znp: Vec<f64>,
    pub znp_bound: f64,
    pub theorem_envelope: Option<f64>,
    pub holds: bool,
}

/// Normalisation 𝒩^{(γ)} = −i exp{(1/2π)∫₀^{2πb} t/sin t dt}/√(sin 2πb).
pub fn norm_const(p: &ModelParams, spec: &QuadratureSpec) -> Result<Complex64> {
    let f = |t: f64| if t < 1e-8 { 1.0 } else { t / t.sin() };
    let (v, _) = integrate(f, 0.0, 2.0 * PI * p.b, spec)?;
    Ok(Complex64::new(0.0, -(v / (2.0 * PI)).exp() / (2.0 * PI * p.b).sin().sqrt()))
}

/// Precomputed pieces of the K-function of the exponential of the field.
#[derive(Debug, Clone)]
pub struct KFunction {
    pub norm: Complex64,
    /// 2πbγ/g
    pub phase: f64,
    pub b: f64,
}

impl KFunction {
    pub fn new(p: &ModelParams, spec: &QuadratureSpec) -> Result<Self> {
        Ok(KFunction { norm: norm_const(p, spec)?, phase: 2.0 * PI * p.b * p.gamma_charge / p.g, b: p.b })
    }

    /// Fully factorised 2^N-term sum.
    pub fn eval(&self, betas: &[f64]) -> Result<Complex64> {
        let n = betas.len();
        if n > K_CAP {
            return Err(Error::TooLarge(format!("k_exp with N = {n} > {K_CAP}")));
        }
        let betas = untie(betas);
        let i = Complex64::i();
        let ipb = i * PI * self.b;
        // pair factors for ℓ_ab = −1, 0, +1
        let mut pair = vec![[Complex64::new(0.0, 0.0); 3]; n * n];
        for a in 0..n {
            for c in a + 1..n {
                let x = betas[a] - betas[c];
                let sh = x.sinh();
                for (k, l) in [-1.0, 0.0, 1.0].iter().enumerate() {
                    let z = Complex64::new(x / 2.0, 0.0);
                    pair[a * n + c][k] = (z - ipb * *l).sinh() * (z + ipb * *l).cosh() / sh;
                }
            }
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for mask in 0u32..(1u32 << n) {
            let ell = |a: usize| ((mask >> a) & 1) as i32;
            let mut term = Complex64::new(1.0, 0.0);
            for a in 0..n {
                for c in a + 1..n {
                    term *= pair[a * n + c][(ell(a) - ell(c) + 1) as usize];
                }
            }
            let ones = mask.count_ones() as i32;
            let sign = if ones % 2 == 0 { 1.0 } else { -1.0 };
            let pn = Complex64::new(0.0, self.phase * (n as i32 - 2 * ones) as f64).exp();
            sum += term * pn * sign;
        }
        let scale = 2f64.powi((n * (n.saturating_sub(1)) / 2) as i32);
        Ok(self.norm.powi(n as i32) * sum * scale)
    }
}

/// Exact ties between rapidities are moved apart by 1e−10 (a null set for any
/// integration rule); the pair factors are singular only at coincidence.
fn untie(betas: &[f64]) -> Vec<f64> {
    let mut v = betas.to_vec();
    for a in 0..v.len() {
        for c in 0..a {
            if v[a] == v[c] {
                v[a] += 1e-10 * (a as f64);
            }
        }
    }
    v
}

/// 𝒦_N^{(γ)}(β).
pub fn k_exp(betas: &[f64], p: &ModelParams) -> Result<Complex64> {
    KFunction::new(p, &QuadratureSpec::default())?.eval(betas)
}

/// p-function of the conserved currents J_ℓ^{(σ)}.
pub fn p_current(betas: &[f64], ells: &[u8], ell_index: i32, sigma: i32, p: &ModelParams) -> Result<Complex64> {
    if ell_index % 2 == 0 {
        return Err(Error::InvalidParam(format!("current index {ell_index} must be odd")));
    }
    if sigma.abs() != 1 {
        return Err(Error::InvalidParam("sigma must be ±1".into()));
    }
    if betas.len() % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let i = Complex64::i();
    let l = ell_index as f64;
    let s = sigma as f64;
    let a: Complex64 = betas.iter().map(|b| Complex64::new(s * b, 0.0).exp()).sum();
    let c: Complex64 = betas
        .iter()
        .zip(ells)
        .map(|(b, e)| (l * (b - i * PI * p.b * sgn(*e))).exp())
        .sum();
    Ok(s * (-i * PI / 2.0 * l).exp() * a * c)
}

/// p-function of the energy–momentum tensor component T^{(τσ)}.
pub fn p_stress(betas: &[f64], ells: &[u8], tau: i32, sigma: i32, p: &ModelParams) -> Result<Complex64> {
    if tau.abs() != 1 || sigma.abs() != 1 {
        return Err(Error::InvalidParam("tau and sigma must be ±1".into()));
    }
    if betas.len() % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let i = Complex64::i();
    let t = tau as f64;
    let s = sigma as f64;
    let a: Complex64 = betas.iter().map(|b| Complex64::new(t * b, 0.0).exp()).sum();
    let c: Complex64 = betas
        .iter()
        .zip(ells)
        .map(|(b, e)| (s * (b - i * PI / 2.0 * (1.0 + 2.0 * p.b * sgn(*e)))).exp())
        .sum();
    Ok(t * a * c)
}

fn sgn(e: u8) -> f64 {
    if e % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Evaluator for the integrands of 𝒰_N and 𝒵_{N,p}.
#[derive(Debug, Clone)]
pub struct Summand {
    pub params: ModelParams,
    pub k: KFunction,
    pub w: WTable,
}

impl Summand {
    pub fn new(p: &ModelParams, spec: &QuadratureSpec) -> Result<Self> {
        Ok(Summand { params: *p, k: KFunction::new(p, spec)?, w: WTable::new(p, spec)? })
    }

    /// ∏_{a<b} e^{w(β_ab)} |K_N|², without the one-body factors.
    pub fn pair_part(&self, betas: &[f64]) -> Result<f64> {
        let betas = untie(betas);
        let mut ew = 1.0;
        for a in 0..betas.len() {
            for c in a + 1..betas.len() {
                ew *= self.w.exp_w(betas[a] - betas[c]);
            }
        }
        Ok(ew * self.k.eval(&betas)?.norm_sqr())
    }

    /// Integrand of 𝒰_N (up to 1/(N!(2π)^N)).
    pub fn density(&self, betas: &[f64]) -> Result<f64> {
        let one: f64 = betas.iter().map(|b| (-self.params.kappa * b.cosh()).exp()).product();
        Ok(one * self.pair_part(betas)?)
    }

    /// Integrand of 𝒵_{N,p} without one-body factors: the first `p_split`
    /// entries are the ν's, the rest the λ's.
    pub fn znp_pair_part(&self, betas: &[f64], p_split: usize) -> f64 {
        let s2 = (2.0 * PI * self.params.b).sin().powi(2);
        let betas = untie(betas);
        let mut acc = 1.0;
        for a in 0..betas.len() {
            for c in a + 1..betas.len() {
                let x = betas[a] - betas[c];
                let mut f = self.w.exp_w(x);
                if (a < p_split) != (c < p_split) {
                    // ∏_ε sinh(x − 2iπεb)/sinh x = 1 + sin²2πb/sinh²x
                    f *= 1.0 + s2 / x.sinh().powi(2);
                }
                acc *= f;
            }
        }
        acc
    }
}

/// ∏ e^{w(β_ab)} · ∏ e^{−κ cosh β_a} · |K_N|².
pub fn summand_density(betas: &[f64], p: &ModelParams) -> Result<f64> {
    Summand::new(p, &QuadratureSpec::default())?.density(betas)
}

/// K₀(κ) = ∫₀^∞ e^{−κ cosh t} dt.
pub fn bessel_k0(kappa: f64, spec: &QuadratureSpec) -> Result<f64> {
    let tmax = (60.0 / kappa).max(1.0).acosh() + 1.0;
    Ok(integrate(|t: f64| (-kappa * t.cosh()).exp(), 0.0, tmax, spec)?.0)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn quad_half_width(kappa: f64) -> f64 {
    (40.0 / kappa).max(1.5).acosh()
}

/// 𝒰_N by tensor Gauss–Legendre (N ≤ 2) or Monte Carlo (N ≤ 6).
pub fn u_n(n: usize, s: &Summand, method: Method, mc: &MonteCarloSpec) -> Result<Estimate> {
    if n == 0 {
        return Ok(Estimate { value: 1.0, error: 0.0 });
    }
    let pref = 1.0 / (factorial(n) * (2.0 * PI).powi(n as i32));
    match method {
        Method::TensorQuadrature => {
            if n > 2 {
                return Err(Error::TooLarge(format!("tensor quadrature supports N <= 2, got {n}")));
            }
            let v = tensor_integral(n, s, |b| s.density(b))?;
            Ok(Estimate { value: pref * v, error: 0.0 })
        }
        Method::MonteCarlo => {
            if n > 6 {
                return Err(Error::TooLarge(format!("Monte Carlo supports N <= 6, got {n}")));
            }
            Ok(monte_carlo(n, s, mc, &QuadratureSpec::default())?.u)
        }
    }
}

fn tensor_integral<F: Fn(&[f64]) -> Result<f64> + Sync>(n: usize, s: &Summand, f: F) -> Result<f64> {
    let l = quad_half_width(s.params.kappa);
    let m = if n == 1 { 200 } else { 240 };
    let (x, w) = gauss_legendre_on(m, -l, l);
    match n {
        1 => {
            let mut acc = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                acc += wi * f(&[*xi])?;
            }
            Ok(acc)
        }
        2 => {
            let rows: Result<Vec<f64>> = (0..m)
                .into_par_iter()
                .map(|i| {
                    let mut acc = 0.0;
                    for j in 0..m {
                        acc += w[j] * f(&[x[i], x[j]])?;
                    }
                    Ok(w[i] * acc)
                })
                .collect();
            Ok(rows?.iter().sum())
        }
        _ => Err(Error::TooLarge(format!("tensor quadrature supports N <= 2, got {n}"))),
    }
}

/// Logistic-envelope rejection sampler for the density ∝ e^{−κ cosh β}.
#[derive(Debug, Clone, Copy)]
struct OneBodySampler {
    kappa: f64,
    scale: f64,
    ln_m: f64,
}

impl OneBodySampler {
    fn new(kappa: f64, scale: f64) -> Self {
        // ln of target/logistic, maximised on a fine grid and padded
        let phi = |b: f64| -kappa * b.cosh() + b / scale + scale.ln() + 2.0 * (-b / scale).exp().ln_1p();
        let mut best = f64::NEG_INFINITY;
        let mut bmax = 0.0;
        for k in 0..=20_000 {
            let b = k as f64 * 1e-3;
            if phi(b) > best {
                best = phi(b);
                bmax = b;
            }
        }
        // curvature bound: the grid maximum is within (h²/8)·max|φ''| of the true one
        let curv = kappa * (bmax + 1e-3).cosh() + 1.0 / scale;
        OneBodySampler { kappa, scale, ln_m: best + curv * 1e-6 / 8.0 + 1e-12 }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let b = self.scale * (u / (1.0 - u)).ln();
            let lg = -b.abs() / self.scale - self.scale.ln() - 2.0 * (-b.abs() / self.scale).exp().ln_1p();
            let acc = -self.kappa * b.cosh() - lg - self.ln_m;
            let v: f64 = rng.gen();
            if v.ln() < acc {
                return b;
            }
        }
    }
}

/// Monte Carlo output: 𝒵_N = N!(2π)^N 𝒰_N and 𝒵_{N,p} for p = 0..N.
#[derive(Debug, Clone)]
pub struct McResult {
    pub z: Estimate,
    pub u: Estimate,
    pub znp: Vec<Estimate>,
}

/// Samples β ~ ∏ e^{−κ cosh β_a}/(2K₀(κ)) and averages the pair parts of the
/// 𝒰_N and 𝒵_{N,p} integrands on common samples.
pub fn monte_carlo(n: usize, s: &Summand, mc: &MonteCarloSpec, spec: &QuadratureSpec) -> Result<McResult> {
    if mc.samples < 2 {
        return Err(Error::InvalidParam("Monte Carlo needs at least 2 samples".into()));
    }
    if !(mc.proposal_scale > 0.0) {
        return Err(Error::InvalidParam("proposal_scale must be positive".into()));
    }
    let sampler = OneBodySampler::new(s.params.kappa, mc.proposal_scale);
    let nq = n + 1; // slot 0: U-weight, slots 1..=n+1: p = 0..=n
    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
            rng.set_stream(c);
            let count = mc.samples / MC_CHUNKS + u64::from(c < mc.samples % MC_CHUNKS);
            let mut sum = vec![0.0; nq + 1];
            let mut sum2 = vec![0.0; nq + 1];
            let mut betas = vec![0.0; n];
            for _ in 0..count {
                for b in betas.iter_mut() {
                    *b = sampler.sample(&mut rng);
                }
                let wu = s.pair_part(&betas).unwrap_or(f64::NAN);
                sum[0] += wu;
                sum2[0] += wu * wu;
                for ps in 0..=n {
                    let wz = s.znp_pair_part(&betas, ps);
                    sum[ps + 1] += wz;
                    sum2[ps + 1] += wz * wz;
                }
            }
            (sum, sum2)
        })
        .collect();
    let m = mc.samples as f64;
    let mut sum = vec![0.0; nq + 1];
    let mut sum2 = vec![0.0; nq + 1];
    for (a, b) in &chunks {
        for k in 0..=nq {
            sum[k] += a[k];
            sum2[k] += b[k];
        }
    }
    let k0 = bessel_k0(s.params.kappa, spec)?;
    let norm = (2.0 * k0).powi(n as i32);
    let est = |k: usize, scale: f64| {
        let mean = sum[k] / m;
        let var = (sum2[k] / m - mean * mean).max(0.0) / (m - 1.0);
        Estimate { value: scale * mean, error: scale * var.sqrt() }
    };
    if !sum[0].is_finite() {
        return Err(Error::Domain("non-finite Monte Carlo weight".into()));
    }
    let ln_n = (n as f64).ln();
    let zscale = if n >= 2 { norm / ln_n.powi(n as i32) } else { f64::NAN };
    let z = est(0, norm);
    let pref = 1.0 / (factorial(n) * (2.0 * PI).powi(n as i32));
    Ok(McResult { z, u: Estimate { value: z.value * pref, error: z.error * pref }, znp: (0..=n).map(|ps| est(ps + 1, zscale)).collect() })
}

/// 𝒵_{N,p}(κ) including its (1/ln N)^N prefactor.
pub fn znp_bound(n: usize, p_split: usize, s: &Summand, method: Method, mc: &MonteCarloSpec) -> Result<Estimate> {
    if n <= 1 {
        return Err(Error::Domain(format!("Z_(N,p) needs N >= 2 (ln N scale), got {n}")));
    }
    if p_split > n {
        return Err(Error::Domain(format!("p = {p_split} exceeds N = {n}")));
    }
    match method {
        Method::TensorQuadrature => {
            if n > 2 {
                return Err(Error::TooLarge(format!("tensor quadrature supports N <= 2, got {n}")));
            }
            let kappa = s.params.kappa;
            let v = tensor_integral(n, s, |b| {
                let one: f64 = b.iter().map(|x| (-kappa * x.cosh()).exp()).product();
                Ok(one * s.znp_pair_part(b, p_split))
            })?;
            Ok(Estimate { value: v / (n as f64).ln().powi(n as i32), error: 0.0 })
        }
        Method::MonteCarlo => Ok(monte_carlo(n, s, mc, &QuadratureSpec::default())?.znp[p_split]),
    }
}

/// (|𝒩|e^{2πb|γ|/g})^{2N} (8 ln N)^N.
pub fn chain_prefactor(n: usize, s: &Summand) -> f64 {
    let p = &s.params;
    let base = s.k.norm.norm() * (2.0 * PI * p.b * p.gamma_charge.abs() / p.g).exp();
    (base * base * 8.0 * (n as f64).ln()).powi(n as i32)
}

/// exp[−3π⁴bb̂N²/(4(ln N)³)].
pub fn theorem_envelope(n: usize, p: &ModelParams) -> Result<f64> {
    if n < 3 {
        return Err(Error::Domain(format!("envelope needs N >= 3, got {n}")));
    }
    Ok((-theorem_exponent(n as f64, p)).exp())
}

/// 3π⁴bb̂N²/(4(ln N)³).
pub fn theorem_exponent(n: f64, p: &ModelParams) -> f64 {
    3.0 * PI.powi(4) * p.b * p.bhat * n * n / (4.0 * n.ln().powi(3))
}

/// Full bound report at a given N: quadrature for N ≤ 2, Monte Carlo above.
pub fn bound_report(n: usize, s: &Summand, mc: &MonteCarloSpec) -> Result<BoundReport> {
    if n < 2 {
        return Err(Error::Domain(format!("bound report needs N >= 2, got {n}")));
    }
    let (u, znp): (Estimate, Vec<Estimate>) = if n <= 2 {
        let u = u_n(n, s, Method::TensorQuadrature, mc)?;
        let z: Result<Vec<Estimate>> = (0..=n).map(|ps| znp_bound(n, ps, s, Method::TensorQuadrature, mc)).collect();
        (u, z?)
    } else {
        let r = monte_carlo(n, s, mc, &QuadratureSpec::default())?;
        (r.u, r.znp)
    };
    let zmax = znp.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max);
    let chain = chain_prefactor(n, s) * zmax;
    let zf = factorial(n) * (2.0 * PI).powi(n as i32);
    let z_n = u.value * zf;
    Ok(BoundReport {
        n,
        u_n_estimate: u.value,
        u_n_error: u.error,
        z_n,
        znp: znp.iter().map(|e| e.value).collect(),
        znp_bound: chain,
        theorem_envelope: theorem_envelope(n, &s.params).ok(),
        holds: (u.value - 3.0 * u.error) * zf <= chain,
    })
}
