//! Fourier-type integrals along horizontal lines in the upper half plane.

use crate::error::Result;
use crate::specfun::quad::integrate_pts;
use crate::specfun::QuadratureSpec;
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_4, PI};

/// Beyond this ray length the integrand is replaced by its power-law asymptote;
/// direct Gamma ratios lose ~|λ|·ε of relative accuracy.
const S_CAP: f64 = 1e8;
/// Start of the 1/v² compactification of each ray.
const S_MAP: f64 = 64.0;

pub(crate) fn spec() -> QuadratureSpec {
    QuadratureSpec { abs_tol: 1e-13, rel_tol: 1e-11, max_subdivisions: 2000, ..QuadratureSpec::default() }
}

/// (1/2iπ)∫_{ℝ+ic} e^{iλx} f(λ) dλ for x ≥ 0.
///
/// Requires f meromorphic above the line with singularities on iℝ only, and
/// f(λ) ~ A·λ^{−decay} (decay > 1) in the sectors 0 ≤ arg(λ − ic) ≤ π/4 and
/// 3π/4 ≤ arg(λ − ic) ≤ π. The line is folded onto the two rays
/// ic + s·e^{iπ/4}, ic + s·e^{3iπ/4}, where e^{iλx} decays.
pub(crate) fn line_transform<F>(f: F, x: f64, c: f64, decay: f64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    let i = Complex64::i();
    let spec = spec();
    let ray = |theta: f64| -> Result<Complex64> {
        let dir = Complex64::from_polar(1.0, theta);
        let lam = |s: f64| i * c + dir * s;
        let lam_cap = lam(S_CAP);
        let f_cap = f(lam_cap);
        let g = |s: f64| {
            let l = lam(s);
            let fv = if s <= S_CAP { f(l) } else { f_cap * (lam_cap / l).powf(decay) };
            fv * (i * l * x).exp() * dir
        };
        let (near, _) = integrate_pts(&g, &[0.0, 1.0, 4.0, 16.0, S_MAP], &spec)?;
        // s = S_MAP/v²
        let h = |v: f64| {
            if v == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let s = S_MAP / (v * v);
            g(s) * (2.0 * S_MAP / (v * v * v))
        };
        let v_cap = (S_MAP / S_CAP).sqrt();
        let (far, _) = integrate_pts(h, &[0.0, v_cap, 1e-2, 0.1, 0.4, 1.0], &spec)?;
        Ok(near + far)
    };
    let right = ray(FRAC_PI_4)?;
    let left = ray(3.0 * FRAC_PI_4)?;
    Ok((right - left) / (2.0 * PI * i))
}
