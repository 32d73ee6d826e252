use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgff::closedform::solve_endpoint;
use sgff::eqmeasure::*;
use sgff::specfun::ModelParams;
use std::sync::OnceLock;

fn p3() -> ModelParams {
    ModelParams::default()
}

fn random_measure(grid: &Grid, rng: &mut ChaCha8Rng) -> GridMeasure {
    let m: Vec<f64> = (0..grid.n).map(|_| rng.gen::<f64>()).collect();
    GridMeasure::on_grid(grid, &m).unwrap()
}

fn zero_mass(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    v
}

fn small_model() -> &'static EnergyModel {
    static M: OnceLock<EnergyModel> = OnceLock::new();
    M.get_or_init(|| EnergyModel::new(Grid::new(-0.5, 0.5, 24).unwrap(), 10_000, &p3()).unwrap())
}

/// The minimiser at N = 10⁴ on the default grid, shared by several tests.
fn solution() -> &'static (EnergyModel, EquilibriumSolution) {
    static S: OnceLock<(EnergyModel, EquilibriumSolution)> = OnceLock::new();
    S.get_or_init(|| {
        let spec = GridSpec::default();
        let grid = Grid::localisation(spec.eps, spec.nodes).unwrap();
        let model = EnergyModel::new(grid, 10_000, &p3()).unwrap();
        let init = GridMeasure::uniform(&grid, -1.0, 1.0).unwrap();
        let sol = minimize_from(&model, &init.weights, &spec).unwrap();
        (model, sol)
    })
}

#[test]
fn grid_measure_validation() {
    assert!(GridMeasure::new(vec![0.0, 1.0], vec![0.5, 0.6], 1.0).is_err());
    assert!(GridMeasure::new(vec![1.0, 0.0], vec![0.5, 0.5], 1.0).is_err());
    assert!(GridMeasure::new(vec![0.0, 1.0], vec![1.5, -0.5], 1.0).is_err());
    assert!(GridMeasure::new(vec![0.0, 0.5, 2.0], vec![0.2, 0.3, 0.5], 0.5).is_err());
    let g = Grid::new(-1.0, 1.0, 8).unwrap();
    let u = GridMeasure::uniform(&g, -1.0, 1.0).unwrap();
    assert!(u.weights.iter().all(|&w| (w - 0.125).abs() < 1e-15));
}

#[test]
fn energy_nt_structure() {
    let model = small_model();
    let grid = model.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mu = random_measure(&grid, &mut rng);
    let nu1 = random_measure(&grid, &mut rng);
    let nu2 = random_measure(&grid, &mut rng);
    // t = 0 only sees μ
    assert_eq!(model.energy_nt(&mu, &nu1, 0.0).unwrap(), model.energy_nt(&mu, &nu2, 0.0).unwrap());
    // μ = ν, t = ½: ℰ⁽⁺⁾[μ] + ℰ⁽⁻⁾[0]
    let e = model.energy_nt(&mu, &mu, 0.5).unwrap();
    assert!((e - model.energy_plus(&mu).unwrap()).abs() < 1e-12);
    assert_eq!(model.energy_minus(&vec![0.0; grid.n]).unwrap(), 0.0);
    // ℰ_{N,t}[μ,ν] = Σ_± ℰ^{(±)}[tν ± (1−t)μ]
    for &t in &[0.2, 0.5, 0.9] {
        let e = model.energy_nt(&mu, &nu1, t).unwrap();
        let sp: Vec<f64> = nu1.weights.iter().zip(&mu.weights).map(|(v, m)| t * v + (1.0 - t) * m).collect();
        let sm: Vec<f64> = nu1.weights.iter().zip(&mu.weights).map(|(v, m)| t * v - (1.0 - t) * m).collect();
        let plus = GridMeasure::on_grid(&grid, &sp).unwrap();
        let sum = model.energy_plus(&plus).unwrap() + model.energy_minus(&sm).unwrap();
        assert!((e - sum).abs() < 1e-10, "t={t}: {e} vs {sum}");
    }
    assert!(model.energy_nt(&mu, &nu1, 1.5).is_err());
}

#[test]
fn atoms_have_infinite_energy() {
    let p = p3();
    assert_eq!(energy_plus(&GridMeasure::point_mass(0.0), 10_000, &p).unwrap(), f64::INFINITY);
    let g = Grid::new(-1.0, 1.0, 10).unwrap();
    let u = GridMeasure::uniform(&g, -1.0, 1.0).unwrap();
    assert_eq!(energy_nt(&u, &GridMeasure::point_mass(0.3), 10_000, 0.4, &p).unwrap(), f64::INFINITY);
    // t = 0 never sees ν
    assert!(energy_nt(&u, &GridMeasure::point_mass(0.3), 10_000, 0.0, &p).unwrap().is_finite());
}

#[test]
fn uniform_measure_fixture() {
    // κsinh(τ)/(Nτ) + ∫₀^∞ R⁽⁺⁾(λ)/λ · sin²(τλ)/(τλ)² dλ in mpmath
    let oracle = 0.0590494829657549723;
    for n in [50, 400] {
        let g = Grid::new(-1.0, 1.0, n).unwrap();
        let u = GridMeasure::uniform(&g, -1.0, 1.0).unwrap();
        let e = energy_plus(&u, 10_000, &p3()).unwrap();
        assert!((e - oracle).abs() < 1e-8, "n={n}: {e}");
    }
}

#[test]
fn refinement_is_second_order() {
    // smooth density: E(h) − E(h/2) ≈ 4(E(h/2) − E(h/4))
    let p = p3();
    let e = |n: usize| {
        let g = Grid::new(-1.0, 1.0, n).unwrap();
        let m = GridMeasure::from_density(&g, |x| (1.0 - x * x).powi(2)).unwrap();
        energy_plus(&m, 10_000, &p).unwrap()
    };
    let (e1, e2, e3) = (e(100), e(200), e(400));
    let ratio = (e1 - e2) / (e2 - e3);
    assert!((3.0..5.0).contains(&ratio), "{ratio}: {e1} {e2} {e3}");
}

#[test]
fn quadratic_form_positive_and_fourier() {
    let model = small_model();
    let n = model.grid.n;
    let zero = vec![0.0; n];
    assert_eq!(model.quadratic_form_d(&zero, &zero, 0.4).unwrap(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &t in &[0.0, 0.3, 0.7, 1.0] {
        let mu = zero_mass(n, &mut rng);
        let nu = zero_mass(n, &mut rng);
        let d = model.quadratic_form_d(&mu, &nu, t).unwrap();
        let f = model.quadratic_form_d_fourier(&mu, &nu, t).unwrap();
        assert!(d >= -1e-10, "t={t}: {d}");
        assert!((d - f).abs() < 1e-8, "t={t}: {d} vs {f}");
    }
    let mut bad = zero.clone();
    bad[0] = 1.0;
    assert!(model.quadratic_form_d(&bad, &zero, 0.5).is_err());
}

#[test]
fn minimiser_kkt_and_symmetry() {
    let (model, sol) = solution();
    assert!(sol.kkt_residual < 1e-6, "{}", sol.kkt_residual);
    assert!((sol.mass() - 1.0).abs() < 1e-12);
    assert!(sol.weights.iter().all(|&w| w >= 0.0));
    let n = sol.weights.len();
    let h = model.grid.h;
    let asym = (0..n).map(|i| (sol.weights[i] - sol.weights[n - 1 - i]).abs() / h).fold(0.0, f64::max);
    assert!(asym < 1e-6, "{asym}");
    // off the support the effective potential sits above C_eq
    for (&(_, v), &w) in sol.effective_potential.iter().zip(&sol.weights) {
        if w == 0.0 {
            assert!(v >= sol.lagrange_constant - 1e-6);
        }
    }
    // nothing reaches the edge of the localisation window
    assert!(sol.weights[..50].iter().chain(&sol.weights[n - 50..]).all(|&w| w < 1e-8));
    // energy decreases monotonically along the iterations
    assert!(sol.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-15));
}

#[test]
fn minimiser_beats_trial_measures() {
    let (model, sol) = solution();
    let g = model.grid;
    let uniform = GridMeasure::uniform(&g, -1.0, 1.0).unwrap();
    let gauss = GridMeasure::from_density(&g, |x| if x.abs() < 1.0 { (-x * x / 0.18).exp() } else { 0.0 }).unwrap();
    assert!(sol.energy <= model.energy_plus(&uniform).unwrap());
    assert!(sol.energy <= model.energy_plus(&gauss).unwrap());
    let m = GridMeasure::on_grid(&g, &sol.weights).unwrap();
    assert!((model.energy_plus(&m).unwrap() - sol.energy).abs() < 1e-12);
}

#[test]
fn minimiser_unique_from_other_start() {
    let (model, sol) = solution();
    let g = model.grid;
    let gauss = GridMeasure::from_density(&g, |x| (-x * x / 0.5).exp()).unwrap();
    let other = minimize_from(model, &gauss.weights, &GridSpec::default()).unwrap();
    let l1: f64 = sol.weights.iter().zip(&other.weights).map(|(a, b)| (a - b).abs()).sum();
    assert!(l1 < 1e-4, "{l1}");
}

#[test]
fn effective_potential_properties() {
    let (model, sol) = solution();
    let g = model.grid;
    let p = p3();
    let zero = vec![0.0; g.n];
    let x = 0.3;
    let v = effective_potential(&g, &zero, x, 10_000, &p).unwrap();
    assert!((v - p.kappa * (model.tau * x).cosh() / 1e4).abs() < 1e-15);
    // far outside: increasing with cosh growth
    let phi: Vec<f64> = sol.weights.iter().map(|w| w / g.h).collect();
    let mut prev = model.effective_potential(&phi, 1.0).unwrap();
    for k in 1..10 {
        let xi = 1.0 + 0.1 * k as f64;
        let v = model.effective_potential(&phi, xi).unwrap();
        assert!(v > prev);
        prev = v;
    }
    // flat on the support, pointwise
    let inner: Vec<f64> = (0..8).map(|k| model.effective_potential(&phi, -0.7 + 0.2 * k as f64).unwrap()).collect();
    let spread = inner.iter().cloned().fold(f64::MIN, f64::max) - inner.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1e-5, "{spread}");
}

#[test]
fn endpoints_match_closed_form_at_1e6() {
    let p = p3();
    let sol = minimize_energy_plus(1_000_000, &p, &GridSpec::default()).unwrap();
    let g = solve_endpoint(1_000_000, &p).unwrap();
    assert!((sol.b_n / g.b_n - 1.0).abs() < 0.05, "{} vs {}", sol.b_n, g.b_n);
    assert!((sol.a_n / g.a_n - 1.0).abs() < 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn prop_convexity_identity(seed in 0u64..1000, alpha in 0.05f64..0.95, ti in 0usize..2) {
        let t = [0.3, 0.7][ti];
        let model = small_model();
        let grid = model.grid;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mu, nu, sg, rh) = (random_measure(&grid, &mut rng), random_measure(&grid, &mut rng), random_measure(&grid, &mut rng), random_measure(&grid, &mut rng));
        let mix = |a: &GridMeasure, b: &GridMeasure| {
            let w: Vec<f64> = a.weights.iter().zip(&b.weights).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect();
            GridMeasure::on_grid(&grid, &w).unwrap()
        };
        let lhs = model.energy_nt(&mix(&mu, &sg), &mix(&nu, &rh), t).unwrap()
            - alpha * model.energy_nt(&mu, &nu, t).unwrap()
            - (1.0 - alpha) * model.energy_nt(&sg, &rh, t).unwrap();
        let dm: Vec<f64> = mu.weights.iter().zip(&sg.weights).map(|(a, b)| a - b).collect();
        let dn: Vec<f64> = nu.weights.iter().zip(&rh.weights).map(|(a, b)| a - b).collect();
        let rhs = -alpha * (1.0 - alpha) * model.quadratic_form_d(&dm, &dn, t).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-8, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn prop_quadratic_form_nonnegative(seed in 0u64..1000, t in 0.0f64..1.0) {
        let model = small_model();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = model.grid.n;
        let (mu, nu) = (zero_mass(n, &mut rng), zero_mass(n, &mut rng));
        prop_assert!(model.quadratic_form_d(&mu, &nu, t).unwrap() >= -1e-10);
    }

    #[test]
    fn prop_simplex_projection(v in prop::collection::vec(-3.0f64..3.0, 1..40)) {
        let p = project_simplex(&v);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
    }
}
