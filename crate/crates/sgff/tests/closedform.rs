use num_complex::Complex64;
use proptest::prelude::*;
use sgff::closedform::boundary::*;
use sgff::closedform::series::{alzer_margin, r_d};
use sgff::closedform::*;
use sgff::specfun::quad::integrate;
use sgff::specfun::{potential_v, ModelParams, QuadratureSpec, WTable};
use std::f64::consts::PI;

fn p3() -> ModelParams {
    ModelParams::default()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// b values away from the rational coincidences of the residue series.
fn irrational() -> [ModelParams; 2] {
    [ModelParams::new(1.0 / (2.0 * 5f64.sqrt()), 1.0, 1.0).unwrap(), ModelParams::new(2f64.sqrt() - 1.0, 1.0, 1.0).unwrap()]
}

#[test]
fn laurent_identities() {
    let p = p3();
    for &x in &[5.0, 13.0, 30.0, 80.0] {
        let c = laurent_coeffs(x, &p).unwrap();
        assert!((c.c[0] - 1.0).norm() < 1e-10, "c0 at {x}: {}", c.c[0]);
        assert!((c.w[1] * c.w[1] - 2.0 * c.w[2]).abs() < 1e-8 * c.w[2].max(1.0), "w1^2 - 2w2 at {x}");
        for k in 0..4 {
            let expect = Complex64::new(0.0, -1.0).powi(k as i32) * c.w[k];
            assert!((c.c[k] - expect).norm() < 1e-9 * c.w[k].abs().max(1.0));
        }
    }
}

#[test]
fn laurent_values_at_30() {
    // mpmath, 30 digits, Taylor coefficients of the Gamma ratio times e^{−iλx̄}
    let c = laurent_coeffs(30.0, &p3()).unwrap();
    let oracle = [1.0, 33.4456003892490376, 559.304092698667690, 6236.69457380772915];
    for k in 0..4 {
        assert!(rel(c.w[k], oracle[k]) < 1e-11, "w{k}: {} vs {}", c.w[k], oracle[k]);
    }
}

#[test]
fn w_k_approach_monomials() {
    let p = p3();
    let mut prev = [f64::INFINITY; 4];
    for &x in &[20.0, 40.0, 80.0] {
        let c = laurent_coeffs(x, &p).unwrap();
        let mut fact = 1.0;
        for k in 1..4 {
            fact *= k as f64;
            let dev = (c.w[k] / (x.powi(k as i32) / fact) - 1.0).abs();
            assert!(dev < prev[k], "k={k} x={x}: {dev}");
            // O(1/x̄); the constant grows like k²
            assert!(dev * x < 4.0 * (k * k) as f64, "k={k} x={x}: {dev}");
            prev[k] = dev;
        }
    }
}

#[test]
fn frak_t_values_and_trend() {
    let p = p3();
    assert!(rel(frak_t(20.0, &p).unwrap(), 1.05092605087487828) < 1e-10);
    assert!(rel(frak_t(40.0, &p).unwrap(), 1.02405915794153327) < 1e-10);
    assert!((frak_t(40.0, &p).unwrap() - 1.0).abs() < 0.2);
    for b in [0.2, 0.3, 0.35] {
        let q = ModelParams::new(b, 1.0, 1.0).unwrap();
        let d: Vec<f64> = [20.0, 40.0, 80.0].iter().map(|&x| (frak_t(x, &q).unwrap() - 1.0).abs()).collect();
        assert!(d[0] > d[1] && d[1] > d[2], "b={b}: {d:?}");
    }
}

#[test]
fn vartheta_fixtures() {
    let p = p3();
    assert!(rel(vartheta(&p), 0.183192725940002289) < 1e-13);
    let q = ModelParams::new(0.25, 1.0, 1.0).unwrap();
    assert!(rel(vartheta(&q), 0.1771133166528072752) < 1e-13);
    assert!(rel(vartheta(&p.dual()), vartheta(&p)) < 1e-14);
    let k2 = p.with_kappa(2.0).unwrap();
    assert!(rel(vartheta(&k2), 2.0 * vartheta(&p)) < 1e-14);
}

#[test]
fn endpoint_root_and_monotonicity() {
    let p = p3();
    let g = solve_endpoint(10_000, &p).unwrap();
    assert!(rel(g.bbar, 6.9552673463073516) < 1e-10, "{}", g.bbar);
    assert!(g.is_symmetric() && (g.xbar - 2.0 * g.bbar).abs() < 1e-12);
    let mut last = 0.0;
    for &n in &[10_000u64, 20_000, 10u64.pow(8), 2 * 10u64.pow(8), 10u64.pow(16)] {
        let g = solve_endpoint(n, &p).unwrap();
        let resid = vartheta(&p) * g.bbar * g.bbar * g.bbar.exp() * frak_t(g.xbar, &p).unwrap() / n as f64;
        assert!((resid - 1.0).abs() < 1e-10, "N={n}: {resid}");
        assert!((normalization_integral(&g, &p).unwrap() - 1.0).abs() < 1e-10);
        assert!(g.bbar > last);
        last = g.bbar;
    }
    assert!(solve_endpoint(8, &p).is_err());
}

#[test]
fn endpoint_asymptotic_expansion() {
    let p = p3();
    let mut prev = f64::INFINITY;
    for &n in &[1e4f64, 1e8, 1e16] {
        let g = solve_endpoint(n as u64, &p).unwrap();
        let l = n.ln();
        let d = (g.bbar - (l - 2.0 * l.ln() - vartheta(&p).ln())).abs();
        assert!(d < prev, "N={n}: {d}");
        assert!(d / (l.ln() / l) < 5.0, "N={n}: {d}");
        prev = d;
    }
}

#[test]
fn chi_determinant_and_symmetry() {
    let p = p3();
    let g = ScaledGeometry::symmetric(10u64.pow(8), 15.0).unwrap();
    let i = Complex64::i();
    let up = chi_leading(3.0 * i, ChiRegion::AboveUp, &g, &p).unwrap();
    assert!((det(&up) - 1.0).norm() < 1e-6);
    let dn = chi_leading(Complex64::new(0.3, -0.2), ChiRegion::BelowDown, &g, &p).unwrap();
    assert!((det(&dn) + 1.0).norm() < 1e-6);
    // the region guard
    assert!(chi_leading(-i, ChiRegion::AboveUp, &g, &p).is_err());

    let g = solve_endpoint(10u64.pow(8), &p).unwrap();
    let chi = ChiLeadingOrder::new(&g, &p).unwrap();
    let a = chi.above(i).unwrap()[0][1];
    let b = chi.below(-i).unwrap()[0][1];
    assert!((a - b).norm() <= g.error_budget() * a.norm(), "{a} vs {b}");

    let u0 = chi.u_reg(Complex64::new(0.0, 0.0));
    assert!((u0 - chi.coeffs.c[3]).norm() < 1e-8 * chi.coeffs.c[3].norm().max(1.0));
}

#[test]
fn constraint_integral() {
    let p = p3();
    let g = solve_endpoint(10_000, &p).unwrap();
    assert_eq!(constraint_j12(&g, &p).unwrap(), 0.0);
    for &s in &[0.01, -0.01] {
        let h = ScaledGeometry::new(g.n, g.a_n + s, g.b_n).unwrap();
        let v = constraint_j12(&h, &p).unwrap();
        assert_eq!(v.signum(), s.signum(), "shift {s}: {v}");
        let q = constraint_j12_quadrature(&h, &p).unwrap();
        assert!(rel(q, v) < 1e-6, "shift {s}: {q} vs {v}");
    }
    // contour value at the +0.01 shift, frozen
    let h = ScaledGeometry::new(g.n, g.a_n + 0.01, g.b_n).unwrap();
    assert!(rel(constraint_j12(&h, &p).unwrap(), 1.659910532462527e-4) < 1e-8);
}

#[test]
fn closed_density_shape() {
    let p = p3();
    let g = solve_endpoint(10_000, &p).unwrap();
    let d = EquilibriumDensity::new(&g, &p).unwrap();
    assert!(d.eval(g.a_n).unwrap().abs() < 1e-6);
    assert!(d.eval(g.b_n).unwrap().abs() < 1e-6);
    // mpmath along the same rays
    assert!(rel(d.eval(0.0).unwrap(), 0.91436909678405579) < 1e-9);
    for &xi in &[0.1, 0.37, 0.7] {
        let (l, r) = (d.eval(-xi).unwrap(), d.eval(xi).unwrap());
        assert!((l - r).abs() < 1e-10, "xi={xi}");
    }
    for (xi, v) in d.sample(40).unwrap() {
        if xi > g.a_n && xi < g.b_n {
            assert!(v > 0.0, "rho({xi}) = {v}");
        }
    }
    // square-root edge
    let s = |delta: f64| d.eval(g.b_n - delta).unwrap() / delta.sqrt();
    assert!(rel(s(1e-4), s(1e-3)) < 0.02, "{} {}", s(1e-3), s(1e-4));
    assert!(density_eq(1.0, &g, &p).is_err());
}

#[test]
fn closed_density_mass() {
    let p = p3();
    let g = solve_endpoint(10_000, &p).unwrap();
    let d = EquilibriumDensity::new(&g, &p).unwrap();
    let mass = d.total_mass().unwrap();
    let norm = normalization_integral(&g, &p).unwrap();
    assert!((mass - 1.0).abs() < 0.01, "{mass}");
    assert!((mass - norm).abs() < 0.01);
    let exact = normalization_exact(&g, &p).unwrap();
    assert!((exact - norm).abs() < g.error_budget(), "{exact} vs {norm}");
}

#[test]
fn rho_bd_at_origin() {
    // ρ_bd(0) = (3/2)(1 + b ln b + b̂ ln b̂ − (3/2)ln 2)
    for p in [p3(), irrational()[0], irrational()[1]] {
        let (b, bh) = (p.b, p.bhat);
        let closed = 1.5 * (1.0 + b * b.ln() + bh * bh.ln() - 1.5 * 2f64.ln());
        assert!(rel(rho_bd_limit(0.0, &p).unwrap(), closed) < 1e-9);
    }
    assert!(rel(rho_bd_limit(0.0, &p3()).unwrap(), -1.084200291936778) < 1e-9);
}

#[test]
fn rho_bd_increases_from_origin() {
    let p = p3();
    let r0 = rho_bd_limit(0.0, &p).unwrap();
    for k in 1..=50 {
        let x = 10.0 * k as f64 / 50.0;
        assert!(rho_bd_limit(x, &p).unwrap() - r0 > 0.0, "x={x}");
    }
}

#[test]
fn rho_bd_coefficient_decay() {
    let p = p3();
    for bb in [p.b, p.bhat] {
        let ratio = frak_r(400.0 / bb, &p).unwrap() / frak_r(100.0 / bb, &p).unwrap();
        assert!((ratio / 0.25f64.powf(1.5) - 1.0).abs() < 0.2, "{ratio}");
    }
    assert!(frak_r(1.0, &p).is_err());
    assert!(frak_r(0.5, &p).is_err());
}

#[test]
fn residue_series_match_contours() {
    // irrational b: no coincident poles
    let table = [
        (0, 0.2, -0.34112268834356, -0.108631828596735),
        (0, 1.0, -0.042989888522251, 1.1600155051362),
        (0, 3.0, -7.414961627479e-4, 0.47022809060685),
        (1, 0.2, -0.37190469070700, 0.21669241614951),
        (1, 1.0, -0.074633782213411, 0.74424882253398),
        (1, 3.0, -0.0015989869061080, 0.24649011624670),
    ];
    for (k, x, rho, jx) in table {
        let p = irrational()[k];
        assert!((rho_bd_limit(x, &p).unwrap() - rho).abs() < 1e-12, "rho b={} x={x}", p.b);
        assert!((rho_bd_series(x, &p).unwrap() - rho).abs() < 2e-12, "rho series b={} x={x}", p.b);
        assert!((j_ext(x, &p).unwrap() - jx).abs() < 1e-12, "J b={} x={x}", p.b);
        assert!((j_ext_series(x, &p).unwrap() - jx).abs() < 2e-12, "J series b={} x={x}", p.b);
    }
    // b = 0.3: n = 5 puts sin(2πbn) on zero
    assert!(rho_bd_series(1.0, &p3()).is_err());
}

#[test]
fn j_ext_origin_and_total() {
    let p = p3();
    assert!(rel(j_ext_zero(&p), -2.729366012948329) < 1e-13);
    assert!(rel(j_ext(0.0, &p).unwrap(), j_ext_zero(&p)) < 1e-6);
    for q in irrational() {
        assert!(rel(j_ext(0.0, &q).unwrap(), j_ext_zero(&q)) < 1e-6);
    }
    for k in 1..=40 {
        let x = 10.0 * k as f64 / 40.0;
        assert!(j_tot(x, &p).unwrap() < 0.0, "x={x}");
    }
    let s = |x: f64| j_tot(x, &p).unwrap() / x.sqrt();
    assert!(rel(s(1e-6), s(1e-4)) < 0.02, "{} {}", s(1e-4), s(1e-6));
    assert!(s(1e-6) < 0.0);
}

#[test]
fn convolution_factor_signs() {
    let p = p3();
    let mut prev = f64::INFINITY;
    for k in 1..=50 {
        let x = 5.0 * k as f64 / 50.0;
        assert!(convolution_factors(x, ConvFactor::D, &p).unwrap() > 0.0);
        assert!(convolution_factors(x, ConvFactor::DTilde, &p).unwrap() >= 0.0);
        assert!(convolution_factors(x, ConvFactor::ATilde, &p).unwrap() > 0.0);
        let a = convolution_factors(x, ConvFactor::A, &p).unwrap();
        assert!(a < prev, "a not decreasing at {x}");
        prev = a;
    }
    for &x in &[0.5, 1.0, 2.0, 5.0] {
        assert!(alzer_margin(x) > 0.0);
    }
    assert!(convolution_factors(0.0, ConvFactor::D, &p).is_err());
}

/// ρ_bd(x) = ∫𝔞(x−y)𝔡(y)dy and J_ext(x) = ∫𝔞̃(x−y)𝔡̃(y)dy over ℝ, split into
/// the series part on (0, x) and the step-function parts; y = t² absorbs the
/// y^{−1/2} edge of 𝔡 and 𝔡̃.
#[test]
fn convolution_representations() {
    let p = p3();
    let s = QuadratureSpec { abs_tol: 1e-10, rel_tol: 1e-8, ..Default::default() };
    let f = |w, y: f64| convolution_factors(y, w, &p).unwrap();
    let tail = |g: &dyn Fn(f64) -> f64, x: f64| integrate(|t: f64| g(x + t / (1.0 - t)) / (1.0 - t).powi(2), 0.0, 1.0, &s).unwrap().0;
    let x: f64 = 1.0;
    let inner = |a, d| integrate(|t: f64| 2.0 * t * f(a, x - t * t) * f(d, t * t), 0.0, x.sqrt(), &s).unwrap().0;

    let rho = inner(ConvFactor::A, ConvFactor::D) - 0.75 * PI * tail(&|u| f(ConvFactor::A, u), x) - 2.0 / PI * tail(&|y| f(ConvFactor::D, y), x);
    assert!(rel(rho, rho_bd_limit(x, &p).unwrap()) < 1e-6, "{rho}");

    let j = inner(ConvFactor::ATilde, ConvFactor::DTilde) - 3.0 * PI * tail(&|y| (x - y).exp() * f(ConvFactor::DTilde, y), x);
    assert!(rel(j, j_ext(x, &p).unwrap()) < 1e-6, "{j}");
}

#[test]
fn effective_potential_off_support() {
    let p = p3();
    let g = solve_endpoint(10_000, &p).unwrap();
    let d = |delta: f64| effective_potential_closed(g.a_n - delta, &g, &p).unwrap();
    // derivative vanishes like a square root at the edge
    let s = |delta: f64| d(delta) / delta.sqrt();
    assert!(rel(s(1e-5), s(1e-4)) < 0.05, "{} {}", s(1e-4), s(1e-5));
    assert!(d(1.0) < 0.0);
    for &delta in &[0.01, 0.3, 1.0] {
        assert!(d(delta) < 0.0);
        let r = effective_potential_closed(g.b_n + delta, &g, &p).unwrap();
        assert!((r + d(delta)).abs() <= 1e-12 * r.abs());
        assert!(effective_potential_excess(g.a_n - delta, &g, &p).unwrap() > 0.0);
    }
    assert!(effective_potential_closed(0.0, &g, &p).is_err());
    assert!(edge_mismatch(&g, &p).unwrap().abs() < 1e-6);
}

#[test]
fn energy_integrals_against_quadrature() {
    let p = p3();
    let g = solve_endpoint(1_000_000, &p).unwrap();
    let e = energy_integrals(&g, &p).unwrap();
    let d = EquilibriumDensity::new(&g, &p).unwrap();
    let s = QuadratureSpec { abs_tol: 1e-12, rel_tol: 1e-7, ..Default::default() };
    let nf = g.n as f64;
    let v = 2.0 * integrate(|xi: f64| d.eval(xi).unwrap() * p.kappa * (g.tau * xi).cosh() / (2.0 * nf), 0.0, g.b_n, &s).unwrap().0;
    assert!(rel(e.v_integral, v) < 0.02, "{} vs {v}", e.v_integral);

    let table = WTable::new(&p, &QuadratureSpec::default()).unwrap();
    let alpha = 2.0 * PI * p.b;
    let wplus = |x: f64| table.eval(x) + 0.5 * potential_v(x, alpha, 0.0).unwrap();
    let pts = [g.a_n, 0.0, g.b_n - 0.1, g.b_n - 1e-3, g.b_n];
    let wq = sgff::specfun::quad::integrate_pts(|eta: f64| if eta >= g.b_n { 0.0 } else { wplus(g.tau * (g.b_n - eta)) * d.eval(eta).unwrap() }, &pts, &s)
        .unwrap()
        .0;
    assert!(rel(e.w_boundary, -0.5 * wq) < 0.02, "{} vs {}", e.w_boundary, -0.5 * wq);

    assert!(rel(e.cosh_edge, p.kappa * g.bbar.cosh() / (2.0 * nf)) < 1e-14);
    assert!(e.v_integral_leading.signum() == e.v_integral.signum());
    assert!(rel(e.v_integral_leading, e.v_integral) < 0.05);
    let w = laurent_coeffs(g.xbar, &p).unwrap().w;
    assert!(1.0 - 2.0 * w[1] / w[2] > 0.0);
    assert!(e.error_budget == g.error_budget() && e.error_budget > 0.0);
    assert!(solve_endpoint(10u64.pow(16), &p).unwrap().error_budget() < 1e-3 * e.error_budget);
}

#[test]
fn energy_fixtures_and_asymptotics() {
    let p = p3();
    let g = solve_endpoint(10_000, &p).unwrap();
    let e = energy_integrals(&g, &p).unwrap();
    assert!(rel(e.total(), 0.0115709) < 1e-4, "{}", e.total());

    let g8 = solve_endpoint(10u64.pow(8), &p).unwrap();
    let tot = energy_integrals(&g8, &p).unwrap().total();
    let asym = energy_asymptotic(10u64.pow(8), &p).unwrap();
    assert!(rel(tot, asym) < 0.05, "{tot} vs {asym}");
    assert!(rel(asym, 0.0013088066256486) < 1e-8);

    // N² × energy against the exponent 3π⁴bb̂N²/(4 ln³N): ratio in range and falling
    let ratio = |n: u64| {
        let l = (n as f64).ln();
        energy_asymptotic(n, &p).unwrap() / (3.0 * PI.powi(4) * p.b * p.bhat / (4.0 * l.powi(3)))
    };
    let (r8, r16, r32) = (ratio(10u64.pow(8)), ratio(10u64.pow(16)), ratio(u64::MAX / 2));
    assert!((0.5..=2.0).contains(&r8), "{r8}");
    assert!((r16 - 1.0).abs() < (r8 - 1.0).abs() && (r32 - 1.0).abs() < (r16 - 1.0).abs(), "{r8} {r16} {r32}");
    assert!(energy_asymptotic(100, &p).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prop_laurent(x in 2.0f64..120.0, b in 0.05f64..0.45) {
        let p = ModelParams::new(b, 1.0, 1.0).unwrap();
        let c = laurent_coeffs(x, &p).unwrap();
        prop_assert!((c.c[0] - 1.0).norm() < 1e-10);
        prop_assert!((c.w[1] * c.w[1] - 2.0 * c.w[2]).abs() < 1e-8 * c.w[2].max(1.0));
    }

    #[test]
    fn prop_vartheta_duality(b in 0.01f64..0.49, k in 0.1f64..10.0) {
        let p = ModelParams::new(b, 1.0, k).unwrap();
        prop_assert!(rel(vartheta(&p.dual()), vartheta(&p)) < 1e-12);
    }

    #[test]
    fn prop_d_positive(x in 1e-3f64..20.0, b in 0.05f64..0.45) {
        let p = ModelParams::new(b, 1.0, 1.0).unwrap();
        prop_assert!(convolution_factors(x, ConvFactor::D, &p).unwrap() > 0.0);
        prop_assert!(r_d(x + 1.0, &p) > 0.0);
        prop_assert!(alzer_margin(x) > 0.0);
    }

    #[test]
    fn prop_constraint_sign(shift in -0.05f64..0.05) {
        prop_assume!(shift.abs() > 1e-4);
        let p = p3();
        let g = ScaledGeometry::symmetric(10_000, 6.9552673463073516).unwrap();
        let h = ScaledGeometry::new(g.n, g.a_n + shift, g.b_n).unwrap();
        prop_assert_eq!(constraint_j12(&h, &p).unwrap().signum(), shift.signum());
    }
}
