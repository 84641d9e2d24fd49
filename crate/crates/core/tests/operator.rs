use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stablelike::operator::function::audit_test_function;
use stablelike::operator::{
    apply_l, apply_l0, apply_lk, lp_norm, riesz_potential, tail_functional, truncation_part, validate_assumptions,
    BallIndicator, Bump, ClosureFunction, Combination, Constant, Cosine, FunctionalOptions, Gaussian,
    GeneratorOptions, Integrand, JumpKernel, SharedTest, Shifted, Tail,
};
use stablelike::quadrature::{integrate_panels, GaussKronrod, PanelGrowth, PanelOptions};
use stablelike::StableParams;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// One-dimensional symmetrized evaluation
/// `∫_0^∞ [f(x+h) + f(x-h) - 2f(x)] m(h) h^{-1-α} dh` for an even weight,
/// with `(0, δ]` taken from `f''(x) ∫_0^δ m h^{1-α}` and the moment
/// supplied in closed form by the caller.
fn symmetric_oracle_1d(
    f: &dyn Fn(f64) -> f64,
    f2: f64,
    m: &dyn Fn(f64) -> f64,
    inner_moment: f64,
    alpha: f64,
    x: f64,
    delta: f64,
) -> f64 {
    let gk = GaussKronrod::new(1e-13, 1e-9).lenient().with_max_intervals(20_000);
    let g = |h: f64| (f(x + h) + f(x - h) - 2.0 * f(x)) * m(h) * h.powf(-1.0 - alpha);
    let near = gk
        .integrate_with_breaks(|u: f64| g(u.exp()) * u.exp(), &[delta.ln(), -8.0, -4.0, 0.0])
        .unwrap()
        .value;
    let far = integrate_panels(
        &gk,
        g,
        1.0,
        &PanelOptions {
            growth: PanelGrowth::Geometric { first: 1.0, ratio: 2.0 },
            max_panels: 200,
            stop_at: None,
            accelerate: false,
        },
        |r: f64| 4.0 * 2.0 * r.powf(-alpha) / alpha,
    )
    .unwrap()
    .value;
    f2 * inner_moment + near + far
}

fn gaussian_1d(x: f64) -> f64 {
    (-x * x / 2.0).exp()
}

#[test]
fn constants_are_annihilated_exactly() {
    let opts = GeneratorOptions::default();
    let kernel = JumpKernel::holder_bump(0.5, 0.5).unwrap();
    for d in 1..=3 {
        for &alpha in &[0.5, 1.0, 1.5] {
            let p = StableParams::new(d, alpha, 1.0).unwrap();
            let c = Constant { dim: d, c: 2.5 };
            let x = vec![0.3; d];
            assert_eq!(apply_l0(&c, &x, &p, &opts).unwrap(), 0.0);
            assert_eq!(apply_l(&c, &x, &kernel, &p, &opts).unwrap(), 0.0);
            assert_eq!(apply_lk(&c, &x, &kernel, &p, 4, &opts).unwrap(), 0.0);
        }
    }
}

#[test]
fn cosine_is_an_eigenfunction() {
    let opts = GeneratorOptions::default();
    for &alpha in &[0.5, 1.0, 1.5, 1.8] {
        let p = StableParams::new(1, alpha, 1.0).unwrap();
        let f = Cosine::new(&[1.0], 1.0, 0.0);
        for &x in &[0.0, 0.7, 2.0] {
            let v = apply_l0(&f, &[x], &p, &opts).unwrap();
            let exact = -p.symbol_constant * x.cos();
            assert!(rel(v, exact) < 1e-5, "α={alpha} x={x}: {v} vs {exact}");
        }
    }
}

#[test]
fn cosine_symbol_in_higher_dimensions() {
    let opts = GeneratorOptions { directions: 400, ..Default::default() };
    for d in 2..=3 {
        let alpha = 1.3;
        let p = StableParams::new(d, alpha, 1.0).unwrap();
        let xi = [0.6, -0.5, 0.4];
        let f = Cosine::new(&xi[..d], 1.0, 0.0);
        let k: f64 = xi[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        let x = [0.2, 0.1, -0.3];
        let v = apply_l0(&f, &x[..d], &p, &opts).unwrap();
        let exact = -p.symbol_constant * k.powf(alpha) * f.value(&x[..d]);
        assert!(rel(v, exact) < 1e-5, "d={d}: {v} vs {exact}");
    }
}

#[test]
fn stable_generator_matches_refined_oracle() {
    let alpha = 1.5;
    let p = StableParams::new(1, alpha, 1.0).unwrap();
    let f = Gaussian::new(&[0.0], 1.0, 1.0);
    let delta: f64 = 1e-6;
    for &x in &[0.0, 0.8] {
        let f2 = (x * x - 1.0) * gaussian_1d(x);
        let oracle = symmetric_oracle_1d(&gaussian_1d, f2, &|_| 1.0, delta.powf(2.0 - alpha) / (2.0 - alpha), alpha, x, delta);
        let v = apply_l0(&f, &[x], &p, &GeneratorOptions::default()).unwrap();
        assert!(rel(v, oracle) < 1e-5, "x={x}: {v} vs {oracle}");
    }
}

#[test]
fn modulated_generator_matches_refined_oracle() {
    let alpha = 1.5;
    let p = StableParams::new(1, alpha, 1.0).unwrap();
    let kernel = JumpKernel::holder_bump(0.5, 0.5).unwrap();
    let f = Gaussian::new(&[0.0], 1.0, 1.0);
    let x = 0.3;
    let delta: f64 = 1e-6;
    let m = |h: f64| 1.0 + 0.5 * h.abs().powf(0.5).min(1.0);
    let moment = delta.powf(2.0 - alpha) / (2.0 - alpha) + 0.5 * delta.powf(2.5 - alpha) / (2.5 - alpha);
    let f2 = (x * x - 1.0) * gaussian_1d(x);
    let oracle = symmetric_oracle_1d(&gaussian_1d, f2, &m, moment, alpha, x, delta);
    let v = apply_l(&f, &[x], &kernel, &p, &GeneratorOptions::default()).unwrap();
    assert!(rel(v, oracle) < 1e-5, "{v} vs {oracle}");
}

#[test]
fn subcritical_index_without_compensator_matches_oracle() {
    let alpha = 0.6;
    let p = StableParams::new(1, alpha, 1.0).unwrap();
    let f = Gaussian::new(&[0.5], 0.7, 1.0);
    let fv = |y: f64| (-(y - 0.5) * (y - 0.5) / (2.0 * 0.49)).exp();
    let x = 0.1;
    let f2 = ((x - 0.5) * (x - 0.5) / 0.49 - 1.0) / 0.49 * fv(x);
    let delta: f64 = 1e-6;
    let oracle = symmetric_oracle_1d(&fv, f2, &|_| 1.0, delta.powf(2.0 - alpha) / (2.0 - alpha), alpha, x, delta);
    let v = apply_l0(&f, &[x], &p, &GeneratorOptions::default()).unwrap();
    assert!(rel(v, oracle) < 1e-5, "{v} vs {oracle}");
}

#[test]
fn refining_delta_does_not_move_the_value() {
    let p = StableParams::new(2, 1.2, 1.0).unwrap();
    let f = Bump::new(&[0.2, -0.1], 1.5, 1.0);
    let x = [0.4, 0.3];
    let a = apply_l0(&f, &x, &p, &GeneratorOptions::default()).unwrap();
    let b = apply_l0(&f, &x, &p, &GeneratorOptions { delta: 1e-5, ..Default::default() }).unwrap();
    assert!(rel(a, b) < 1e-6, "{a} vs {b}");
}

fn random_suite(d: usize, rng: &mut ChaCha8Rng) -> Vec<SharedTest> {
    let c: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let xi: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    vec![
        Arc::new(Gaussian::new(&c, rng.random_range(0.4..1.5), 1.0)),
        Arc::new(Bump::new(&c, rng.random_range(0.5..2.0), -0.7)),
        Arc::new(Cosine::new(&xi, 1.0, 0.3)),
    ]
}

#[test]
fn unit_kernel_reduces_to_stable_generator() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let unit = JumpKernel::new("one", 1.0, 1e-12, 0.5, |_, _| 1.0).unwrap();
    let opts = GeneratorOptions::default();
    for d in 1..=2 {
        let p = StableParams::new(d, 1.4, 1.0).unwrap();
        for f in random_suite(d, &mut rng) {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            let l0 = apply_l0(f.as_ref(), &x, &p, &opts).unwrap();
            let l = apply_l(f.as_ref(), &x, &unit, &p, &opts).unwrap();
            let lk = apply_lk(f.as_ref(), &x, &unit, &p, 3, &opts).unwrap();
            assert!(rel(l, l0) < 1e-8, "{l} vs {l0}");
            assert!(rel(lk, l0) < 1e-8, "{lk} vs {l0}");
        }
    }
}

#[test]
fn generator_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = StableParams::new(1, 1.5, 1.0).unwrap();
    let kernel = JumpKernel::holder_bump(0.4, 0.5).unwrap();
    let opts = GeneratorOptions::default();
    let fs = random_suite(1, &mut rng);
    let (a, b) = (1.7, -0.6);
    let combo = Combination { terms: vec![(a, fs[0].clone()), (b, fs[1].clone())] };
    for &x in &[-0.4, 0.9] {
        let lhs = apply_l(&combo, &[x], &kernel, &p, &opts).unwrap();
        let rhs = a * apply_l(fs[0].as_ref(), &[x], &kernel, &p, &opts).unwrap()
            + b * apply_l(fs[1].as_ref(), &[x], &kernel, &p, &opts).unwrap();
        assert!(rel(lhs, rhs) < 1e-8, "{lhs} vs {rhs}");
    }
}

#[test]
fn stable_generator_commutes_with_translation() {
    let p = StableParams::new(2, 0.8, 1.0).unwrap();
    let opts = GeneratorOptions::default();
    let inner: SharedTest = Arc::new(Gaussian::new(&[0.1, 0.4], 0.8, 1.0));
    let z = [0.35, -0.7];
    let shifted = Shifted { inner: inner.clone(), shift: z.to_vec() };
    let x = [0.2, 0.5];
    let xz = [x[0] + z[0], x[1] + z[1]];
    let a = apply_l0(&shifted, &x, &p, &opts).unwrap();
    let b = apply_l0(inner.as_ref(), &xz, &p, &opts).unwrap();
    assert!(rel(a, b) < 1e-8, "{a} vs {b}");
}

#[test]
fn missing_hessian_is_a_contract_error() {
    let f = ClosureFunction {
        dim: 1,
        value: Arc::new(|x: &[f64]| x[0].sin()),
        gradient: Arc::new(|x: &[f64], g: &mut [f64]| g[0] = x[0].cos()),
        hessian: None,
        tail: Tail::Bounded { sup: 1.0 },
        bounds: [1.0, 1.0, 1.0],
    };
    let p = StableParams::new(1, 1.5, 1.0).unwrap();
    let err = apply_l0(&f, &[0.0], &p, &GeneratorOptions::default()).unwrap_err();
    assert!(matches!(err, stablelike::Error::Contract(_)), "{err}");
}

#[test]
fn truncation_swallowing_the_perturbation_gives_stable_generator() {
    // n differs from 1 only for |h| < 0.2
    let kernel = JumpKernel::new("near", 0.5, 0.5, 0.5, |_, h: &[f64]| {
        let r = h[0].abs();
        if r < 0.2 { 1.0 + 0.5 * r.sqrt() } else { 1.0 }
    })
    .unwrap();
    let p = StableParams::new(1, 1.5, 1.0).unwrap();
    let f = Gaussian::new(&[0.0], 1.0, 1.0);
    let opts = GeneratorOptions::default();
    let l0 = apply_l0(&f, &[0.4], &p, &opts).unwrap();
    let lk = apply_lk(&f, &[0.4], &kernel, &p, 5, &opts).unwrap();
    let l = apply_l(&f, &[0.4], &kernel, &p, &opts).unwrap();
    assert!(rel(lk, l0) < 1e-8, "{lk} vs {l0}");
    assert!(rel(l, l0) > 1e-4);
}

#[test]
fn truncation_gap_halves_when_k_doubles() {
    let alpha = 1.5;
    let beta = 0.5;
    let p = StableParams::new(1, alpha, 1.0).unwrap();
    let kernel = JumpKernel::holder_bump(0.5, beta).unwrap();
    let f = Gaussian::new(&[0.0], 1.0, 1.0);
    let opts = GeneratorOptions::default();
    let x = [0.2];
    let l = apply_l(&f, &x, &kernel, &p, &opts).unwrap();
    let gap = |k: u32| (l - apply_lk(&f, &x, &kernel, &p, k, &opts).unwrap()).abs();
    let direct = |k: u32| truncation_part(&f, &x, &kernel, &p, k, &opts).unwrap().abs();
    let (g8, g16) = (gap(8), gap(16));
    assert!(rel(g8, direct(8)) < 1e-5, "{g8} vs {}", direct(8));
    let ratio = g16 / g8;
    let expected = 2f64.powf(-(2.0 - alpha + beta));
    assert!(ratio > expected / 1.5 && ratio < expected * 1.5, "ratio {ratio}");
}

#[test]
fn riesz_and_far_functionals_closed_forms() {
    let opts = FunctionalOptions::default();
    let one = Constant { dim: 1, c: 1.0 };
    let zero = Constant { dim: 1, c: 0.0 };
    assert_eq!(riesz_potential(&zero, &[0.0], 0.5, &opts).unwrap(), 0.0);
    assert!((riesz_potential(&one, &[0.3], 0.5, &opts).unwrap() - 4.0).abs() < 1e-6 * 4.0);
    let ind = BallIndicator { center: vec![1.2], radius: 0.5, amp: 1.0 };
    assert!((riesz_potential(&ind, &[1.2], 1.0, &opts).unwrap() - 1.0).abs() < 1e-6);
    assert!((tail_functional(&one, &[0.0], 1.0, &opts).unwrap() - 2.0).abs() < 1e-6 * 2.0);
    assert!((tail_functional(&one, &[0.0], 2.0, &opts).unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(tail_functional(&ind, &[1.2], 1.0, &opts).unwrap(), 0.0);
    // ball of radius 0.5 seen from distance 3 in d = 1: ∫_{2.5}^{3.5} r^{-3} dr
    let j = tail_functional(&ind, &[4.2], 2.0, &opts).unwrap();
    let exact = 0.5 * (2.5f64.powi(-2) - 3.5f64.powi(-2));
    assert!(rel(j, exact) < 1e-6, "{j} vs {exact}");
}

#[test]
fn functionals_in_three_dimensions() {
    let opts = FunctionalOptions::default();
    let one = Constant { dim: 3, c: 1.0 };
    // |S²| ∫_0^1 r^{γ-1} dr = 4π/γ and |S²| ∫_1^∞ r^{-1-γ} dr = 4π/γ
    let i = riesz_potential(&one, &[0.0; 3], 1.5, &opts).unwrap();
    let j = tail_functional(&one, &[0.0; 3], 1.5, &opts).unwrap();
    let exact = 4.0 * std::f64::consts::PI / 1.5;
    assert!(rel(i, exact) < 1e-6);
    assert!(rel(j, exact) < 1e-6);
}

#[test]
fn lp_norm_of_gaussian() {
    let f = Gaussian::new(&[0.3], 0.5, 2.0);
    let v = lp_norm(&f, &[0.3], 2.0, &FunctionalOptions::default()).unwrap();
    // ∫ 4 exp(-y²/σ²) dy = 4 σ √π
    let exact = (4.0 * 0.5 * std::f64::consts::PI.sqrt()).sqrt();
    assert!(rel(v, exact) < 1e-6, "{v} vs {exact}");
}

#[test]
fn kernel_presets_satisfy_assumptions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kernel in [
        JumpKernel::stable(),
        JumpKernel::holder_bump(0.5, 0.5).unwrap(),
        JumpKernel::holder_bump(-0.4, 0.3).unwrap(),
        JumpKernel::discontinuous_in_x(0.4, 0.5, 0.25).unwrap(),
    ] {
        let rep = validate_assumptions(&kernel, 2, 10_000, 3.0, &mut rng);
        assert!(rep.pass(), "{}: {rep:?}", kernel.label);
    }
    assert!((JumpKernel::holder_bump(-0.4, 0.3).unwrap().kappa - 0.6).abs() < 1e-15);
    let bad = JumpKernel::new("lies", 1.0, 0.1, 0.5, |_, h: &[f64]| 1.0 + 0.5 * h[0].abs().min(1.0)).unwrap();
    assert!(!validate_assumptions(&bad, 1, 10_000, 1.0, &mut rng).pass());
    assert!(JumpKernel::holder_bump(0.5, 1.0).is_err());
    assert!(JumpKernel::discontinuous_in_x(1.0, 0.5, 0.1).is_err());
}

#[test]
fn test_functions_pass_audit() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let fs: Vec<SharedTest> = vec![
        Arc::new(Gaussian::new(&[0.1, -0.2], 0.7, 1.3)),
        Arc::new(Bump::new(&[0.0, 0.5], 1.2, -2.0)),
        Arc::new(Cosine::new(&[1.0, 2.0], 0.5, 0.1)),
    ];
    for f in &fs {
        let worst = audit_test_function(f.as_ref(), 2.0, 2000, &mut rng).unwrap();
        assert!(worst < 1e-4, "{worst}");
    }
}

mod potentials {
    use super::*;
    use std::sync::OnceLock;
    use stablelike::operator::{
        double_integral_check, perturbation_gap_check, potential_bound_check, truncation_gap_bound, verify_poisson,
        LineGrid, PotentialFunction, PotentialOptions, PotentialSetup, TestFunction,
    };
    use stablelike::stable::{RadiusGrid, ResolventTable};

    fn table() -> Arc<ResolventTable> {
        static T: OnceLock<Arc<ResolventTable>> = OnceLock::new();
        T.get_or_init(|| {
            let p = StableParams::new(1, 1.5, 1.0).unwrap();
            Arc::new(ResolventTable::build(&p, RadiusGrid::default()).unwrap())
        })
        .clone()
    }

    /// `u = r^λ * g` for `g = exp(-y²/2σ²)` from `û = ĝ / (λ + A|ξ|^α)`;
    /// `order` 0 gives `u`, 1 gives `u'`.
    fn fourier_potential(p: &StableParams, sigma: f64, x: f64, order: usize) -> f64 {
        let gk = GaussKronrod::new(1e-15, 1e-12).lenient().with_max_intervals(20_000);
        let ghat = |xi: f64| sigma * (2.0 * std::f64::consts::PI).sqrt() * (-0.5 * sigma * sigma * xi * xi).exp();
        let top = 9.0 / sigma;
        let integrand = |xi: f64| {
            let w = ghat(xi) / (p.lambda + p.symbol_constant * xi.powf(p.alpha));
            if order == 0 { w * (xi * x).cos() } else { -w * xi * (xi * x).sin() }
        };
        gk.integrate(integrand, 0.0, top).unwrap().value / std::f64::consts::PI
    }

    #[test]
    fn potential_matches_fourier_representation() {
        let t = table();
        let g: SharedTest = Arc::new(Gaussian::new(&[0.0], 0.5, 1.0));
        let u = PotentialFunction::new(t.clone(), g, PotentialOptions::default()).unwrap();
        let mut grad = [0.0];
        for &x in &[0.0, 0.4, 1.3, 3.0] {
            let oracle = fourier_potential(&t.params, 0.5, x, 0);
            assert!(rel(u.value(&[x]), oracle) < 1e-5, "x={x}: {} vs {oracle}", u.value(&[x]));
            u.gradient(&[x], &mut grad);
            let d_oracle = fourier_potential(&t.params, 0.5, x, 1);
            assert!((grad[0] - d_oracle).abs() < 1e-5 * (1.0 + d_oracle.abs()), "x={x}: {} vs {d_oracle}", grad[0]);
        }
    }

    #[test]
    fn poisson_identity_holds_and_improves_with_tolerance() {
        let p = table().params;
        let g: SharedTest = Arc::new(Gaussian::new(&[0.0], 0.5, 1.0));
        let grid = LineGrid::new(-3.0, 3.0, 13).unwrap();
        let rep = verify_poisson(g, &p, &grid, &[1e-4, 1e-6]).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.get("max_residual").unwrap() <= 1e-2);
        assert!(rep.get("residual_tol_1e-6").unwrap() <= rep.get("residual_tol_1e-4").unwrap());
    }

    #[test]
    fn zero_source_gives_zero_everywhere() {
        let t = table();
        let p = t.params;
        let g: SharedTest = Arc::new(Gaussian::new(&[0.0], 0.5, 0.0));
        let rep = verify_poisson(g.clone(), &p, &LineGrid::new(-1.0, 1.0, 3).unwrap(), &[1e-6]).unwrap();
        assert_eq!(rep.get("max_residual"), Some(0.0));
        let kernel = JumpKernel::holder_bump(0.5, 0.5).unwrap();
        let setup = PotentialSetup::new(t);
        let rep = perturbation_gap_check(g, &kernel, &LineGrid::new(-1.0, 1.0, 3).unwrap(), &setup).unwrap();
        assert_eq!(rep.fitted_constant, Some(0.0));
    }

    #[test]
    fn perturbation_gap_ratio_is_finite_and_stable() {
        let setup = PotentialSetup::new(table());
        let g: SharedTest = Arc::new(Gaussian::new(&[0.0], 0.5, 1.0));
        let kernel = JumpKernel::holder_bump(0.5, 0.5).unwrap();
        let grid = LineGrid::new(-2.0, 2.0, 9).unwrap();
        let rep = perturbation_gap_check(g.clone(), &kernel, &grid, &setup).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.get("route_disagreement").unwrap() < 1e-6);
        let unit = perturbation_gap_check(g, &JumpKernel::stable(), &grid, &setup).unwrap();
        assert_eq!(unit.fitted_constant, Some(0.0));
    }

    #[test]
    fn perturbation_gap_ratio_grows_away_from_the_source() {
        // the far part of ℒu - ℒ₀u decays like |x|^{-d-α}, the far functional
        // of order 2α like |x|^{-d-2α}
        let setup = PotentialSetup::new(table());
        let g: SharedTest = Arc::new(Gaussian::new(&[0.0], 0.5, 1.0));
        let kernel = JumpKernel::holder_bump(0.5, 0.5).unwrap();
        let at = |x: f64| {
            perturbation_gap_check(g.clone(), &kernel, &LineGrid::new(x, x, 1).unwrap(), &setup)
                .unwrap()
                .fitted_constant
                .unwrap()
        };
        let (a, b, c) = (at(2.0), at(4.0), at(8.0));
        assert!(a < b && b < c, "{a} {b} {c}");
        assert!(c / b > 2.0);
    }

    #[test]
    fn double_integrals_against_local_and_far_functionals() {
        let t = table();
        let g = Gaussian::new(&[0.0], 0.5, 1.0);
        let kernel = JumpKernel::holder_bump(0.5, 0.5).unwrap();
        let rep = double_integral_check(&g, &kernel, 0.3, &t, 1e-4).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.get("near").unwrap() > 0.0 && rep.get("far").unwrap() > 0.0);
        let unit = double_integral_check(&g, &JumpKernel::stable(), 0.3, &t, 1e-4).unwrap();
        assert_eq!(unit.get("near"), Some(0.0));
        assert_eq!(unit.get("far"), Some(0.0));
        let zero = Gaussian::new(&[0.0], 0.5, 0.0);
        let rep = double_integral_check(&zero, &kernel, 0.3, &t, 1e-4).unwrap();
        assert_eq!(rep.fitted_constant, Some(0.0));
    }

    #[test]
    fn potential_of_ball_indicator_is_bounded_by_functionals() {
        let setup = PotentialSetup::new(table());
        let ind: Arc<dyn Integrand> = Arc::new(BallIndicator { center: vec![0.0], radius: 1.0, amp: 1.0 });
        let rep = potential_bound_check(ind, &LineGrid::new(-3.0, 3.0, 13).unwrap(), &setup).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.fitted_constant.unwrap() > 0.0);
        let zero: Arc<dyn Integrand> = Arc::new(BallIndicator { center: vec![0.0], radius: 1.0, amp: 0.0 });
        let rep = potential_bound_check(zero, &LineGrid::new(-1.0, 1.0, 3).unwrap(), &setup).unwrap();
        assert_eq!(rep.fitted_constant, Some(0.0));
    }

    #[test]
    fn truncation_gap_rate() {
        let p = StableParams::new(1, 1.5, 1.0).unwrap();
        let f = Gaussian::new(&[0.0], 1.0, 1.0);
        let grid = LineGrid::new(-1.0, 1.0, 5).unwrap();
        let opts = GeneratorOptions::default();
        let kernel = JumpKernel::holder_bump(0.5, 0.5).unwrap();
        let rep = truncation_gap_bound(&f, &kernel, &p, &[4, 8, 16, 32], &grid, &opts).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.get("slope").unwrap() <= -0.75);
        assert_eq!(rep.get("monotone"), Some(1.0));
        let gaps: Vec<f64> = rep.cells.iter().map(|c| c.estimate).collect();
        for (g, k) in gaps.iter().zip([4.0f64, 8.0, 16.0, 32.0]) {
            assert!(*g <= rep.fitted_constant.unwrap() * k.powf(-1.0) * (1.0 + 1e-12));
        }
        let unit = truncation_gap_bound(&f, &JumpKernel::stable(), &p, &[4, 8, 16, 32], &grid, &opts).unwrap();
        assert!(unit.pass);
        assert!(unit.cells.iter().all(|c| c.estimate == 0.0));
        assert!(truncation_gap_bound(&f, &kernel, &p, &[8, 4, 16], &grid, &opts).is_err());
    }
}
