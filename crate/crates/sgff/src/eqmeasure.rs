//! Direct minimisation of the energy functionals over discretised probability
//! measures.
//!
//! A measure on a uniform grid is read as a histogram: weight m_i spread evenly
//! over the cell of width h centred on node x_i. Every functional below is then
//! the exact continuum functional of that piecewise-constant density, so kernel
//! entries are triangle-weighted cell averages (the diagonal one being the
//! cell-averaged log singularity) and the potential is the cell average of
//! κcosh(τξ). An atomic measure (cell width 0) has infinite self-energy.

use crate::error::{Error, Result};
use crate::specfun::quad::gauss_legendre;
use crate::specfun::{potential_v, rfun, ModelParams, QuadratureSpec, RKind, WTable};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Uniform grid of n cells [lo + ih, lo + (i+1)h], nodes at the cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub h: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) || n == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParam(format!("grid [{lo}, {hi}] with {n} cells")));
        }
        Ok(Grid { lo, h: (hi - lo) / n as f64, n })
    }

    /// [−2−ε, 2+ε] with n cells.
    pub fn localisation(eps: f64, n: usize) -> Result<Self> {
        Self::new(-2.0 - eps, 2.0 + eps, n)
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.n as f64 * self.h
    }
}

/// Probability measure carried by grid nodes.
///
/// With `cell > 0` the nodes are a uniform grid of that spacing and each weight
/// is spread over its cell; with `cell == 0` the weights are atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMeasure {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub cell: f64,
}

impl GridMeasure {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>, cell: f64) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::InvalidParam("nodes and weights must be nonempty and of equal length".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParam("nodes must be strictly increasing".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidParam("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!("weights sum to {total}, not 1")));
        }
        if cell < 0.0 {
            return Err(Error::InvalidParam("negative cell width".into()));
        }
        if cell > 0.0 && nodes.windows(2).any(|w| ((w[1] - w[0]) / cell - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidParam("cell measures need a uniform grid of spacing `cell`".into()));
        }
        Ok(GridMeasure { nodes, weights, cell })
    }

    /// Normalises nonnegative cell masses on `grid`.
    pub fn on_grid(grid: &Grid, masses: &[f64]) -> Result<Self> {
        if masses.len() != grid.n {
            return Err(Error::InvalidParam("mass vector does not match the grid".into()));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || masses.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::InvalidParam("masses must be nonnegative with positive total".into()));
        }
        let w = masses.iter().map(|m| m / total).collect();
        Ok(GridMeasure { nodes: grid.nodes(), weights: w, cell: grid.h })
    }

    /// Histogram of the density f sampled at the nodes.
    pub fn from_density<F: Fn(f64) -> f64>(grid: &Grid, f: F) -> Result<Self> {
        let m: Vec<f64> = grid.nodes().into_iter().map(|x| f(x).max(0.0)).collect();
        Self::on_grid(grid, &m)
    }

    /// Uniform density on [a, b], exact up to the partially covered end cells.
    pub fn uniform(grid: &Grid, a: f64, b: f64) -> Result<Self> {
        let m: Vec<f64> = (0..grid.n)
            .map(|i| {
                let lo = grid.lo + i as f64 * grid.h;
                ((lo + grid.h).min(b) - lo.max(a)).max(0.0)
            })
            .collect();
        Self::on_grid(grid, &m)
    }

    pub fn point_mass(x: f64) -> Self {
        GridMeasure { nodes: vec![x], weights: vec![1.0], cell: 0.0 }
    }

    pub fn is_atomic(&self) -> bool {
        self.cell == 0.0
    }

    fn grid(&self) -> Grid {
        Grid { lo: self.nodes[0] - 0.5 * self.cell, h: self.cell, n: self.nodes.len() }
    }

    pub fn density(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w / self.cell).collect()
    }
}

/// The four translation-invariant kernels of the energy functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// w.
    W,
    /// w_tot = w + v_{2πb,0⁺}.
    WTot,
    /// w⁽⁺⁾ = w + ½v.
    Plus,
    /// w⁽⁻⁾ = −½v.
    Minus,
}

impl KernelKind {
    /// Coefficient of ln|x| at the origin.
    fn log_coeff(self) -> f64 {
        match self {
            KernelKind::W => 2.0,
            KernelKind::WTot => 0.0,
            KernelKind::Plus | KernelKind::Minus => 1.0,
        }
    }
}

fn table_for(p: &ModelParams) -> Result<Arc<WTable>> {
    static CACHE: OnceLock<Mutex<Vec<(u64, Arc<WTable>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let key = p.b.to_bits();
    if let Some((_, t)) = cache.lock().expect("table cache").iter().find(|(k, _)| *k == key) {
        return Ok(t.clone());
    }
    let t = Arc::new(WTable::new(p, &QuadratureSpec::default())?);
    cache.lock().expect("table cache").push((key, t.clone()));
    Ok(t)
}

/// Kernel values in the unscaled variable.
struct Kernel {
    table: Arc<WTable>,
    alpha: f64,
}

impl Kernel {
    fn new(p: &ModelParams) -> Result<Self> {
        Ok(Kernel { table: table_for(p)?, alpha: 2.0 * PI * p.b })
    }

    fn eval(&self, kind: KernelKind, x: f64) -> f64 {
        let v = || if x.abs() > 300.0 { 0.0 } else { potential_v(x, self.alpha, 0.0).unwrap_or(f64::INFINITY) };
        match kind {
            KernelKind::W => self.table.eval(x),
            KernelKind::WTot => self.table.eval(x) + v(),
            KernelKind::Plus => self.table.eval(x) + 0.5 * v(),
            KernelKind::Minus => -0.5 * v(),
        }
    }

    /// Kernel minus its log singularity.
    fn smooth(&self, kind: KernelKind, x: f64) -> f64 {
        let c = kind.log_coeff();
        if c == 0.0 {
            return self.eval(kind, x);
        }
        if x == 0.0 {
            // limit: evaluate a hair away; the remainder is smooth and even
            let e = 1e-12;
            return self.eval(kind, e) - c * e.ln();
        }
        self.eval(kind, x) - c * x.abs().ln()
    }
}

/// G″ = ln|x|, G(0) = 0.
fn log_g(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        0.5 * x * x * x.abs().ln() - 0.75 * x * x
    }
}

/// (1/h)∫_{−h}^{h}(1 − |u|/h) ln|d + u| du.
fn tri_avg_log(d: f64, h: f64) -> f64 {
    (log_g(d + h) - 2.0 * log_g(d) + log_g(d - h)) / (h * h)
}

/// ∫_{lo}^{hi} ln|x − y| dy.
fn int_log(x: f64, lo: f64, hi: f64) -> f64 {
    let f = |t: f64| if t == 0.0 { 0.0 } else { t * t.abs().ln() - t };
    f(x - lo) - f(x - hi)
}

const GL_ORDER: usize = 16;

fn gl() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Symmetric Toeplitz matrix with first column `col`, applied by circulant
/// embedding and FFT above a small size.
#[derive(Clone)]
pub struct Toeplitz {
    col: Vec<f64>,
    fft: Option<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>, Vec<Complex64>)>,
}

impl std::fmt::Debug for Toeplitz {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Toeplitz").field("n", &self.col.len()).finish()
    }
}

const DENSE_MAX: usize = 64;

impl Toeplitz {
    pub fn new(col: Vec<f64>) -> Self {
        let n = col.len();
        if n <= DENSE_MAX {
            return Toeplitz { col, fft: None };
        }
        let len = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let mut c = vec![Complex64::new(0.0, 0.0); len];
        for k in 0..n {
            c[k].re = col[k];
            if k > 0 {
                c[len - k].re = col[k];
            }
        }
        fwd.process(&mut c);
        let scale = 1.0 / len as f64;
        c.iter_mut().for_each(|z| *z *= scale);
        Toeplitz { col, fft: Some((fwd, inv, c)) }
    }

    pub fn len(&self) -> usize {
        self.col.len()
    }

    pub fn is_empty(&self) -> bool {
        self.col.is_empty()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.col[i.abs_diff(j)]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.col.len();
        match &self.fft {
            None => (0..n).map(|i| (0..n).map(|j| self.entry(i, j) * x[j]).sum()).collect(),
            Some((fwd, inv, spec)) => {
                let mut buf = vec![Complex64::new(0.0, 0.0); spec.len()];
                for (b, &v) in buf.iter_mut().zip(x) {
                    b.re = v;
                }
                fwd.process(&mut buf);
                buf.iter_mut().zip(spec).for_each(|(b, s)| *b *= s);
                inv.process(&mut buf);
                buf[..n].iter().map(|z| z.re).collect()
            }
        }
    }

    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Kernel matrices, potential and scales for a fixed grid, N and parameters.
pub struct EnergyModel {
    pub grid: Grid,
    pub n: u64,
    pub tau: f64,
    pub params: ModelParams,
    kernel: Kernel,
    mats: Mutex<Vec<(KernelKind, Arc<Toeplitz>)>>,
    /// Cell averages of V_N/N.
    pub v_cell: Vec<f64>,
}

impl std::fmt::Debug for EnergyModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnergyModel").field("grid", &self.grid).field("n", &self.n).finish()
    }
}

impl EnergyModel {
    pub fn new(grid: Grid, n: u64, p: &ModelParams) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParam(format!("N = {n} must be >= 2")));
        }
        let tau = (n as f64).ln();
        let half = 0.5 * tau * grid.h;
        let shape = half.sinh() / half;
        let v_cell = grid.nodes().iter().map(|&x| p.kappa * (tau * x).cosh() * shape / n as f64).collect();
        Ok(EnergyModel { grid, n, tau, params: *p, kernel: Kernel::new(p)?, mats: Mutex::new(Vec::new()), v_cell })
    }

    /// The model on the grid carrying `m`.
    pub fn for_measure(m: &GridMeasure, n: u64, p: &ModelParams) -> Result<Self> {
        if m.is_atomic() {
            return Err(Error::InvalidParam("atomic measures have no cell grid".into()));
        }
        Self::new(m.grid(), n, p)
    }

    /// Pointwise kernel K(τx).
    pub fn kernel(&self, kind: KernelKind, x: f64) -> f64 {
        self.kernel.eval(kind, self.tau * x)
    }

    /// Toeplitz matrix of triangle-averaged K(τ(x_i − x_j)).
    pub fn matrix(&self, kind: KernelKind) -> Arc<Toeplitz> {
        if let Some((_, m)) = self.mats.lock().expect("matrix cache").iter().find(|(k, _)| *k == kind) {
            return m.clone();
        }
        let (h, tau) = (self.grid.h, self.tau);
        let (gx, gw) = gl();
        let c = kind.log_coeff();
        let col: Vec<f64> = (0..self.grid.n)
            .into_par_iter()
            .map(|k| {
                let d = k as f64 * h;
                // two halves [d−h, d] and [d, d+h], weight (1 − |u|/h)/h
                let avg = |f: &dyn Fn(f64) -> f64| -> f64 {
                    let mut s = 0.0;
                    for (t, w) in gx.iter().zip(gw) {
                        let u = 0.5 * h * (1.0 + t);
                        let wt = 0.5 * w * (1.0 - u / h);
                        s += wt * (f(d + u) + f(d - u));
                    }
                    s
                };
                if k <= 1 && c != 0.0 {
                    c * (tau.ln() + tri_avg_log(d, h)) + avg(&|r| self.kernel.smooth(kind, tau * r))
                } else {
                    avg(&|r| self.kernel.eval(kind, tau * r))
                }
            })
            .collect();
        let m = Arc::new(Toeplitz::new(col));
        self.mats.lock().expect("matrix cache").push((kind, m.clone()));
        m
    }

    fn check(&self, m: &GridMeasure) -> Result<()> {
        if m.nodes.len() != self.grid.n || (m.cell - self.grid.h).abs() > 1e-12 * self.grid.h || (m.nodes[0] - self.grid.node(0)).abs() > 1e-9 * self.grid.h.max(1.0) {
            return Err(Error::InvalidParam("measure does not live on the model grid".into()));
        }
        Ok(())
    }

    /// ℰ_N⁽⁺⁾[σ] = (1/N)∫V_N dσ − ½∫w_N⁽⁺⁾(s−u)dσ(s)dσ(u).
    pub fn energy_plus(&self, s: &GridMeasure) -> Result<f64> {
        if s.is_atomic() {
            return Ok(f64::INFINITY);
        }
        self.check(s)?;
        Ok(dot(&self.v_cell, &s.weights) - 0.5 * self.matrix(KernelKind::Plus).quad_form(&s.weights, &s.weights))
    }

    /// ℰ_N⁽⁻⁾[σ] = −½∫w_N⁽⁻⁾ dσdσ for a signed weight vector on the grid.
    pub fn energy_minus(&self, sigma: &[f64]) -> Result<f64> {
        if sigma.len() != self.grid.n {
            return Err(Error::InvalidParam("weight vector does not match the grid".into()));
        }
        Ok(-0.5 * self.matrix(KernelKind::Minus).quad_form(sigma, sigma))
    }

    /// ℰ_{N,t}[μ, ν].
    pub fn energy_nt(&self, mu: &GridMeasure, nu: &GridMeasure, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParam(format!("t = {t} outside [0, 1]")));
        }
        let (a, b) = (1.0 - t, t);
        // an atom carrying positive weight in the functional has infinite self-energy
        if (mu.is_atomic() && a > 0.0) || (nu.is_atomic() && b > 0.0) {
            return Ok(f64::INFINITY);
        }
        let (m, v) = (&mu.weights, &nu.weights);
        if a > 0.0 {
            self.check(mu)?;
        }
        if b > 0.0 {
            self.check(nu)?;
        }
        let w = self.matrix(KernelKind::W);
        let mut e = 0.0;
        if a > 0.0 {
            e += a * dot(&self.v_cell, m) - 0.5 * a * a * w.quad_form(m, m);
        }
        if b > 0.0 {
            e += b * dot(&self.v_cell, v) - 0.5 * b * b * w.quad_form(v, v);
        }
        if a > 0.0 && b > 0.0 {
            e -= a * b * self.matrix(KernelKind::WTot).quad_form(m, v);
        }
        Ok(e)
    }

    /// 𝔇_{N,t}[μ, ν] for signed zero-mass weight vectors, as a double sum.
    pub fn quadratic_form_d(&self, mu: &[f64], nu: &[f64], t: f64) -> Result<f64> {
        self.check_signed(mu, nu, t)?;
        let (a, b) = (1.0 - t, t);
        let w = self.matrix(KernelKind::W);
        let wt = self.matrix(KernelKind::WTot);
        Ok(-a * b * wt.quad_form(mu, nu) - 0.5 * (b * b * w.quad_form(nu, nu) + a * a * w.quad_form(mu, mu)))
    }

    fn check_signed(&self, mu: &[f64], nu: &[f64], t: f64) -> Result<()> {
        if mu.len() != self.grid.n || nu.len() != self.grid.n {
            return Err(Error::InvalidParam("weight vectors do not match the grid".into()));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParam(format!("t = {t} outside [0, 1]")));
        }
        let scale = mu.iter().chain(nu).map(|x| x.abs()).sum::<f64>().max(1.0);
        for (name, s) in [("mu", mu), ("nu", nu)] {
            let tot: f64 = s.iter().sum();
            if tot.abs() > 1e-12 * scale {
                return Err(Error::InvalidParam(format!("{name} has total mass {tot}, expected 0")));
            }
        }
        Ok(())
    }

    /// 𝔇_{N,t}[μ, ν] = ½∫dλ Σ_± |F[σ^±](τλ)|² R^±(λ)/λ with σ^± = tν ± (1−t)μ.
    ///
    /// Cost grows like (support cells)²; meant for small grids.
    pub fn quadratic_form_d_fourier(&self, mu: &[f64], nu: &[f64], t: f64) -> Result<f64> {
        self.check_signed(mu, nu, t)?;
        let (a, b) = (1.0 - t, t);
        let sp: Vec<(f64, f64)> = self.atoms(&nu.iter().zip(mu).map(|(v, m)| b * v + a * m).collect::<Vec<_>>());
        let sm: Vec<(f64, f64)> = self.atoms(&nu.iter().zip(mu).map(|(v, m)| b * v - a * m).collect::<Vec<_>>());
        Ok(self.fourier_energy(&sp, RKind::Plus) + self.fourier_energy(&sm, RKind::Minus))
    }

    fn atoms(&self, w: &[f64]) -> Vec<(f64, f64)> {
        w.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(i, &x)| (self.grid.node(i), x)).collect()
    }

    /// ½∫_ℝ |F(τλ)|² R(λ)/λ dλ for the histogram with the given cell masses.
    fn fourier_energy(&self, atoms: &[(f64, f64)], kind: RKind) -> f64 {
        if atoms.is_empty() {
            return 0.0;
        }
        let (tau, h, p) = (self.tau, self.grid.h, &self.params);
        let centre = atoms.iter().map(|a| a.0).sum::<f64>() / atoms.len() as f64;
        let span = atoms.last().unwrap().0 - atoms[0].0;
        let f2 = |l: f64| {
            let k = tau * l;
            let z: Complex64 = atoms.iter().map(|&(x, m)| Complex64::from_polar(m, k * (x - centre))).sum();
            let y = 0.5 * k * h;
            let sinc = if y.abs() < 1e-8 { 1.0 } else { y.sin() / y };
            z.norm_sqr() * sinc * sinc
        };
        let r_over = |l: f64| if l == 0.0 { if kind == RKind::Minus { 2.0 * PI * p.b * p.bhat } else { 0.0 } } else { rfun(l, kind, p) / l };
        // |F(τλ)|²sinc⁻² has period T in λ; beyond λ = 40 R/λ = 1/(2λ) to double precision
        let period = 2.0 * PI / (tau * h);
        let pieces = (span / h).ceil() as usize + 2;
        let (gx, gw) = gl();
        let per_period = |k0: f64, f: &dyn Fn(f64) -> f64| -> f64 {
            let mut s = 0.0;
            let dl = period / pieces as f64;
            for j in 0..pieces {
                let a = k0 + j as f64 * dl;
                for (t, w) in gx.iter().zip(gw) {
                    s += 0.5 * dl * w * f(a + 0.5 * dl * (1.0 + t));
                }
            }
            s
        };
        let k_far = (40.0 / period).ceil().max(100.0);
        let near: f64 = (0..k_far as usize).into_par_iter().map(|k| per_period(k as f64 * period, &|l| f2(l) * r_over(l))).sum();
        // tail: Q(λ)/λ³ with Q periodic; Σ_k (Λ + kT + u)^{−3} = T^{−3}ζ(3, (Λ+u)/T)
        let lam = k_far * period;
        let q = |u: f64| {
            let l = lam + u;
            0.5 * f2(l) * l * l
        };
        let hurwitz3 = |x: f64| 0.5 / (x * x) + 0.5 / x.powi(3) + 0.25 / x.powi(4) - 1.0 / (12.0 * x.powi(6));
        let far = per_period(0.0, &|u| q(u) * hurwitz3((lam + u) / period) / period.powi(3));
        // ½∫_ℝ = ∫₀^∞ for the even integrand
        near + far
    }

    /// Gradient of ℰ⁽⁺⁾ in the cell masses: the cell-averaged effective potential.
    pub fn gradient_plus(&self, m: &[f64]) -> Vec<f64> {
        let km = self.matrix(KernelKind::Plus).apply(m);
        self.v_cell.iter().zip(km).map(|(v, k)| v - k).collect()
    }

    /// V_N(ξ)/N − ∫w⁽⁺⁾(τ(ξ−η))φ(η)dη for a histogram density φ on the grid.
    pub fn effective_potential(&self, phi: &[f64], xi: f64) -> Result<f64> {
        if phi.len() != self.grid.n {
            return Err(Error::InvalidParam("density does not match the grid".into()));
        }
        let (h, tau) = (self.grid.h, self.tau);
        let (gx, gw) = gl();
        let c = KernelKind::Plus.log_coeff();
        let mut acc = 0.0;
        for (i, &f) in phi.iter().enumerate() {
            if f == 0.0 {
                continue;
            }
            let lo = self.grid.lo + i as f64 * h;
            let near = xi > lo - h && xi < lo + 2.0 * h;
            let mut s = 0.0;
            for (t, w) in gx.iter().zip(gw) {
                let eta = lo + 0.5 * h * (1.0 + t);
                let x = tau * (xi - eta);
                s += 0.5 * h * w * if near { self.kernel.smooth(KernelKind::Plus, x) } else { self.kernel.eval(KernelKind::Plus, x) };
            }
            if near {
                s += c * (h * tau.ln() + int_log(xi, lo, lo + h));
            }
            acc += f * s;
        }
        Ok(self.params.kappa * (tau * xi).cosh() / self.n as f64 - acc)
    }
}

pub fn energy_nt(mu: &GridMeasure, nu: &GridMeasure, n: u64, t: f64, p: &ModelParams) -> Result<f64> {
    let carrier = if mu.is_atomic() { nu } else { mu };
    if carrier.is_atomic() {
        return Ok(f64::INFINITY);
    }
    EnergyModel::for_measure(carrier, n, p)?.energy_nt(mu, nu, t)
}

pub fn energy_plus(sigma: &GridMeasure, n: u64, p: &ModelParams) -> Result<f64> {
    if sigma.is_atomic() {
        return Ok(f64::INFINITY);
    }
    EnergyModel::for_measure(sigma, n, p)?.energy_plus(sigma)
}

pub fn quadratic_form_d(grid: &Grid, mu: &[f64], nu: &[f64], n: u64, t: f64, p: &ModelParams) -> Result<f64> {
    EnergyModel::new(*grid, n, p)?.quadratic_form_d(mu, nu, t)
}

pub fn effective_potential(grid: &Grid, phi: &[f64], xi: f64, n: u64, p: &ModelParams) -> Result<f64> {
    EnergyModel::new(*grid, n, p)?.effective_potential(phi, xi)
}

/// Discretisation and stopping rule for the minimiser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub nodes: usize,
    pub eps: f64,
    pub max_iter: usize,
    pub tol_kkt: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nodes: 2000, eps: 0.1, max_iter: 100_000, tol_kkt: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumSolution {
    pub n: u64,
    pub a_n: f64,
    pub b_n: f64,
    /// (ξ, ρ(ξ)) on the support cells.
    pub density: Vec<(f64, f64)>,
    /// (ξ, cell-averaged effective potential) on the whole grid.
    pub effective_potential: Vec<(f64, f64)>,
    pub energy: f64,
    pub lagrange_constant: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub weights: Vec<f64>,
    #[serde(skip)]
    pub grid: Option<Grid>,
    #[serde(skip)]
    pub energy_history: Vec<f64>,
}

impl EquilibriumSolution {
    /// Solution with no samples (nothing to plot).
    pub fn empty(n: u64) -> Self {
        EquilibriumSolution {
            n,
            a_n: 0.0,
            b_n: 0.0,
            density: Vec::new(),
            effective_potential: Vec::new(),
            energy: 0.0,
            lagrange_constant: 0.0,
            kkt_residual: 0.0,
            iterations: 0,
            weights: Vec::new(),
            grid: None,
            energy_history: Vec::new(),
        }
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &v) in u.iter().enumerate() {
        css += v;
        let t = (css - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Support threshold relative to the largest cell mass.
pub const SUPPORT_THRESHOLD: f64 = 1e-10;

/// (C, residual): C the mass-weighted mean of g; the residual is the largest
/// deviation from C on the support or shortfall below C off it.
pub fn kkt_residual(m: &[f64], g: &[f64]) -> (f64, f64) {
    let mmax = m.iter().cloned().fold(0.0, f64::max);
    let c = dot(m, g) / m.iter().sum::<f64>();
    let r = m
        .iter()
        .zip(g)
        .map(|(&mi, &gi)| if mi > SUPPORT_THRESHOLD * mmax { (gi - c).abs() } else { (c - gi).max(0.0) })
        .fold(0.0, f64::max);
    (c, r)
}

pub fn minimize_energy_plus(n: u64, p: &ModelParams, spec: &GridSpec) -> Result<EquilibriumSolution> {
    let grid = Grid::localisation(spec.eps, spec.nodes)?;
    let model = EnergyModel::new(grid, n, p)?;
    let init = GridMeasure::uniform(&grid, -1.0, 1.0)?;
    minimize_from(&model, &init.weights, spec)
}

/// Projected gradient with Barzilai–Borwein trial steps; along each projected
/// direction the quadratic is minimised exactly, which satisfies the Armijo
/// condition and makes the energy decrease monotonically.
pub fn minimize_from(model: &EnergyModel, init: &[f64], spec: &GridSpec) -> Result<EquilibriumSolution> {
    if init.len() != model.grid.n {
        return Err(Error::InvalidParam("initial weights do not match the grid".into()));
    }
    let k = model.matrix(KernelKind::Plus);
    let mut m = project_simplex(init);
    let mut g = model.gradient_plus(&m);
    let mut e = 0.5 * (dot(&model.v_cell, &m) + dot(&g, &m));
    let mut history = vec![e];
    let mut alpha = 1.0 / g.iter().map(|x| x.abs()).fold(1e-300, f64::max);
    let mut iters = 0;
    let mut res = kkt_residual(&m, &g).1;
    while res > spec.tol_kkt {
        if iters >= spec.max_iter {
            return Err(Error::NoConvergence { iters, residual: res });
        }
        iters += 1;
        let trial: Vec<f64> = m.iter().zip(&g).map(|(x, gi)| x - alpha * gi).collect();
        let d: Vec<f64> = project_simplex(&trial).iter().zip(&m).map(|(a, b)| a - b).collect();
        let hd: Vec<f64> = k.apply(&d).iter().map(|x| -x).collect();
        let (gd, dhd, dd) = (dot(&g, &d), dot(&d, &hd), dot(&d, &d));
        if gd >= 0.0 || dd == 0.0 {
            // stationary to rounding
            break;
        }
        let s = if dhd > 0.0 { (-gd / dhd).min(1.0) } else { 1.0 };
        for i in 0..m.len() {
            m[i] = (m[i] + s * d[i]).max(0.0);
            g[i] += s * hd[i];
        }
        e += s * gd + 0.5 * s * s * dhd;
        history.push(e);
        alpha = if dhd > 0.0 { dd / dhd } else { 2.0 * alpha };
        if iters % 500 == 0 {
            // refresh against drift
            let tot: f64 = m.iter().sum();
            m.iter_mut().for_each(|x| *x /= tot);
            g = model.gradient_plus(&m);
        }
        res = kkt_residual(&m, &g).1;
    }
    let tot: f64 = m.iter().sum();
    m.iter_mut().for_each(|x| *x /= tot);
    g = model.gradient_plus(&m);
    let (c, res) = kkt_residual(&m, &g);
    let energy = 0.5 * (dot(&model.v_cell, &m) + dot(&g, &m));
    Ok(assemble(model, m, g, energy, c, res, iters, history))
}

#[allow(clippy::too_many_arguments)]
fn assemble(model: &EnergyModel, m: Vec<f64>, g: Vec<f64>, energy: f64, c: f64, res: f64, iters: usize, history: Vec<f64>) -> EquilibriumSolution {
    let grid = model.grid;
    let mmax = m.iter().cloned().fold(0.0, f64::max);
    let supp: Vec<usize> = (0..m.len()).filter(|&i| m[i] > SUPPORT_THRESHOLD * mmax).collect();
    let (i0, i1) = (supp[0], *supp.last().unwrap());
    let density = (i0..=i1).map(|i| (grid.node(i), m[i] / grid.h)).collect();
    let effective_potential = (0..m.len()).map(|i| (grid.node(i), g[i])).collect();
    EquilibriumSolution {
        n: model.n,
        a_n: grid.node(i0) - 0.5 * grid.h,
        b_n: grid.node(i1) + 0.5 * grid.h,
        density,
        effective_potential,
        energy,
        lagrange_constant: c,
        kkt_residual: res,
        iterations: iters,
        weights: m,
        grid: Some(grid),
        energy_history: history,
    }
}
