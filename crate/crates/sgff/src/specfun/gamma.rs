use num_complex::Complex64;
use std::f64::consts::PI;

const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_746,
    -0.491_913_816_097_620_2,
    0.339_946_499_848_118_9e-4,
    0.465_236_289_270_485_76e-4,
    -0.983_744_753_048_795_6e-4,
    0.158_088_703_224_912_5e-3,
    -0.210_264_441_724_104_9e-3,
    0.217_439_618_115_212_64e-3,
    -0.164_318_106_536_763_9e-3,
    0.844_182_239_838_527_4e-4,
    -0.261_908_384_015_814_1e-4,
    0.368_991_826_595_316_2e-5,
];
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// log Γ(z) for complex z. The imaginary part is only defined modulo 2π, which
/// is all that is needed since results are exponentiated.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // reflection
        return Complex64::new(PI.ln(), 0.0) - ln_sin_pi(z) - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut a = Complex64::new(LANCZOS[0], 0.0);
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    HALF_LN_2PI + (z + 0.5) * t.ln() - t + a.ln()
}

/// log sin(πz), stable for large |Im z|.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    if z.im > 1.0 {
        // sin πz = e^{-iπz} (e^{2iπz} - 1)/(2i)
        -i * PI * z + ((2.0 * i * PI * z).exp() - 1.0).ln() - (2.0 * i).ln()
    } else if z.im < -1.0 {
        i * PI * z + (1.0 - (-2.0 * i * PI * z).exp()).ln() - (2.0 * i).ln()
    } else {
        (z * PI).sin().ln()
    }
}

pub fn gamma_c(z: Complex64) -> Complex64 {
    ln_gamma(z).exp()
}

/// Γ(x) for real x > 0.
pub fn gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    ln_gamma(Complex64::new(x, 0.0)).re.exp()
}

pub fn ln_gamma_real(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    ln_gamma(Complex64::new(x, 0.0)).re
}

/// Digamma ψ(x) for real x not a non-positive integer.
pub fn digamma(x: f64) -> f64 {
    if x <= 0.0 {
        return digamma(1.0 - x) - PI / (PI * x).tan();
    }
    let mut acc = 0.0;
    let mut x = x;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    // Bernoulli tail: 1/12, 1/120, 1/252, 1/240, 1/132, 691/32760, 1/12
    let tail = x2
        * (1.0 / 12.0
            - x2 * (1.0 / 120.0
                - x2 * (1.0 / 252.0
                    - x2 * (1.0 / 240.0 - x2 * (1.0 / 132.0 - x2 * (691.0 / 32760.0 - x2 / 12.0))))));
    acc + x.ln() - 0.5 / x - tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_values() {
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(5.0) - 24.0).abs() < 1e-12);
        assert!((gamma(0.3) - 2.991_568_987_687_590_6).abs() < 1e-13);
        assert!((digamma(1.0) + 0.577_215_664_901_532_9).abs() < 1e-14);
        assert!((digamma(0.5) + 1.963_510_026_021_423_5).abs() < 1e-14);
        assert!((digamma(-0.5) - 0.036_489_973_978_576_52).abs() < 1e-13);
    }

    #[test]
    fn complex_values() {
        // |Γ(iy)|² = π/(y sinh πy)
        for &y in &[0.3, 2.0, 15.0, 120.0] {
            let g = gamma_c(Complex64::new(0.0, y));
            let expect = PI / (y * (PI * y).sinh());
            assert!((g.norm_sqr() / expect - 1.0).abs() < 1e-12, "y={y}");
        }
        // Γ(1+z) = zΓ(z)
        let z = Complex64::new(-2.3, 0.7);
        let r = gamma_c(z + 1.0) / (z * gamma_c(z));
        assert!((r - 1.0).norm() < 1e-13);
        let lg = ln_gamma(Complex64::new(3.0, 4.0)).exp();
        let expect = Complex64::new(0.005_225_538_471_369_214, -0.172_547_079_294_300_19);
        assert!((lg - expect).norm() < 1e-14);
    }
}
