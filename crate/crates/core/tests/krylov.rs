use std::f64::consts::PI;
use std::sync::Arc;

use stablelike::krylov::martingale::{cosine_semigroup, GeneratorField};
use stablelike::krylov::{
    default_p, exit_probability_check, krylov_lhs, krylov_ratio_study, krylov_suite, lp_norm, martingale_residual,
    martingale_study, occupation_functional, weak_convergence_study, ConvergenceStudy, ExitGrid, KrylovExperiment,
    MartingaleStudy, Observable, SuiteFunction, YSpec,
};
use stablelike::meyer::{PathSkeleton, SimConfig};
use stablelike::operator::{Constant, Cosine, Gaussian, GeneratorOptions, JumpKernel, Operator, SharedTest};
use stablelike::operator::function::Integrand;
use stablelike::stats::{pooled_stderr, MCEstimate};
use stablelike::{Error, StableParams};

fn params() -> StableParams {
    StableParams::new(1, 1.5, 1.0).unwrap()
}

fn member(suite: &[SuiteFunction], id: &str) -> SuiteFunction {
    suite.iter().find(|f| f.id == id).unwrap().clone()
}

fn experiment(r: f64, replicas: usize, seed: u64) -> KrylovExperiment {
    let kern = JumpKernel::holder_bump(0.5, 0.5).unwrap();
    let sim = SimConfig { seed, ..SimConfig::default() };
    KrylovExperiment::new(&[0.0], r, 1.0, 2.0, krylov_suite(&[0.0], r, 7), replicas, &kern, &params(), &sim).unwrap()
}

/// `∫ (1 - cos h) |h|^{-1-α} dh = -2Γ(-α)cos(πα/2)` at α = 3/2, with
/// `Γ(-3/2) = 4√π/3`.
fn symbol_at_three_halves() -> f64 {
    -2.0 * (4.0 * PI.sqrt() / 3.0) * (0.75 * PI).cos()
}

mod occupation {
    use super::*;

    fn path(states: Vec<f64>, dt: f64) -> PathSkeleton {
        let horizon = dt * (states.len() - 1) as f64;
        PathSkeleton::from_states(1, states, SimConfig { dt, horizon, ..SimConfig::default() }).unwrap()
    }

    #[test]
    fn zero_function_gives_zero() {
        let p = path(vec![0.0, 0.1, 0.2, 0.9], 0.25);
        let zero = Constant { dim: 1, c: 0.0 };
        assert_eq!(occupation_functional(&p, &zero, &[0.0], 0.5, 0.75), 0.0);
    }

    #[test]
    fn unit_function_gives_horizon_without_exit() {
        let p = path(vec![0.0; 41], 0.025);
        let one = Constant { dim: 1, c: 1.0 };
        let v = occupation_functional(&p, &one, &[0.0], 0.5, 1.0);
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn unit_function_stops_at_exit() {
        // exits at the fourth grid time, 3 · 0.25
        let p = path(vec![0.0, 0.1, -0.2, 0.6, 0.0], 0.25);
        let one = Constant { dim: 1, c: 1.0 };
        assert!((occupation_functional(&p, &one, &[0.0], 0.5, 1.0) - 0.75).abs() < 1e-15);
        // and at t when t comes first
        assert!((occupation_functional(&p, &one, &[0.0], 0.5, 0.5) - 0.5).abs() < 1e-15);
    }
}

mod norms {
    use super::*;

    #[test]
    fn unit_function_on_half_ball() {
        let suite = krylov_suite(&[0.0], 0.5, 1);
        let v = lp_norm(&member(&suite, "one"), &[0.0], 0.5, 4.0).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn half_ball_indicator() {
        for r in [0.5, 0.25] {
            let suite = krylov_suite(&[0.3], r, 1);
            let v = lp_norm(&member(&suite, "ind_half"), &[0.3], r, 4.0).unwrap();
            assert!((v - r.powf(0.25)).abs() < 1e-10, "{r}: {v}");
        }
    }

    #[test]
    fn zero_and_bad_exponent() {
        let suite = krylov_suite(&[0.0], 0.5, 1);
        let zero = member(&suite, "bump").scaled(0.0);
        assert_eq!(lp_norm(&zero, &[0.0], 0.5, 2.0).unwrap(), 0.0);
        assert!(matches!(lp_norm(&zero, &[0.0], 0.5, 0.5), Err(Error::Parameter { .. })));
    }

    #[test]
    fn bump_in_two_dimensions() {
        // ∫_{|s|<1} (1 - |s|²)^4 ds = π/5 in the plane
        let suite = krylov_suite(&[0.0, 0.0], 0.5, 1);
        let v = lp_norm(&member(&suite, "bump"), &[0.0, 0.0], 0.5, 2.0).unwrap();
        let expected = (0.25 * PI / 5.0).sqrt();
        assert!((v / expected - 1.0).abs() < 1e-6, "{v} vs {expected}");
    }

    #[test]
    fn default_exponent() {
        assert_eq!(default_p(1, 1.5, 0.5), 2.0);
        assert_eq!(default_p(2, 1.5, 0.5), 4.0);
        assert_eq!(default_p(1, 1.5, 0.9), 2.0);
    }
}

mod suite {
    use super::*;

    #[test]
    fn twenty_members_supported_in_the_ball() {
        let suite = krylov_suite(&[0.2], 0.25, 3);
        assert_eq!(suite.len(), 20);
        for f in &suite {
            assert_eq!(f.value(&[0.2 + 0.25]), 0.0, "{}", f.id);
            assert_eq!(f.value(&[0.2 - 0.26]), 0.0, "{}", f.id);
            assert!(lp_norm(f, &[0.2], 0.25, 2.0).unwrap() > 0.0, "{}", f.id);
        }
        let again = krylov_suite(&[0.2], 0.25, 3);
        for (a, b) in suite.iter().zip(&again) {
            assert_eq!(a.value(&[0.27]), b.value(&[0.27]));
        }
    }

    #[test]
    fn members_are_distinct_on_the_line() {
        let suite = krylov_suite(&[0.0], 0.5, 3);
        let xs: Vec<f64> = (0..41).map(|i| -0.5 + 0.025 * i as f64 + 0.003).collect();
        for (i, a) in suite.iter().enumerate() {
            for b in &suite[i + 1..] {
                assert!(xs.iter().any(|&x| a.value(&[x]) != b.value(&[x])), "{} = {}", a.id, b.id);
            }
        }
    }

    #[test]
    fn members_scale_with_the_radius() {
        let big = krylov_suite(&[0.0], 0.5, 3);
        let small = krylov_suite(&[0.0], 0.125, 3);
        for (a, b) in big.iter().zip(&small) {
            assert_eq!(a.value(&[0.2]), b.value(&[0.05]), "{}", a.id);
        }
    }
}

mod ratios {
    use super::*;

    #[test]
    fn experiment_validation() {
        let kern = JumpKernel::holder_bump(0.5, 0.5).unwrap();
        let sim = SimConfig::default();
        let p = params();
        let suite = krylov_suite(&[0.0], 0.5, 1);
        let bad_r = KrylovExperiment::new(&[0.0], 0.6, 1.0, 2.0, suite.clone(), 1000, &kern, &p, &sim);
        assert!(matches!(bad_r, Err(Error::Parameter { .. })));
        let bad_p = KrylovExperiment::new(&[0.0], 0.5, 1.0, 1.5, suite.clone(), 1000, &kern, &p, &sim);
        assert!(matches!(bad_p, Err(Error::Parameter { .. })));
        let few = KrylovExperiment::new(&[0.0], 0.5, 1.0, 2.0, suite, 99, &kern, &p, &sim);
        assert!(matches!(few, Err(Error::Parameter { .. })));
    }

    #[test]
    fn lhs_sanity() {
        let exp = experiment(0.5, 500, 11);
        let zero = member(&exp.suite, "bump").scaled(0.0);
        let z = krylov_lhs(&exp, &zero).unwrap();
        assert_eq!((z.mean, z.stderr), (0.0, 0.0));
        let one = krylov_lhs(&exp, &member(&exp.suite, "one")).unwrap();
        assert!(one.mean > 0.0 && one.mean <= exp.t);
    }

    #[test]
    fn homogeneity_of_the_ratio() {
        let exp = experiment(0.25, 300, 5);
        let f = member(&exp.suite, "random_bump_1");
        let g = f.scaled(3.5);
        let a = krylov_lhs(&exp, &f).unwrap().mean / lp_norm(&f, &[0.0], 0.25, 2.0).unwrap();
        let b = krylov_lhs(&exp, &g).unwrap().mean / lp_norm(&g, &[0.0], 0.25, 2.0).unwrap();
        assert!((a / b - 1.0).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn estimate_is_robust_to_the_master_seed() {
        let a = experiment(0.25, 2000, 1);
        let b = experiment(0.25, 2000, 2);
        let f = member(&a.suite, "shrink_4");
        let ea = krylov_lhs(&a, &f).unwrap();
        let eb = krylov_lhs(&b, &f).unwrap();
        assert!((ea.mean - eb.mean).abs() <= 3.0 * pooled_stderr(&ea, &eb), "{ea:?} vs {eb:?}");
    }

    #[test]
    fn ratio_study_passes_with_decreasing_constant() {
        let exps: Vec<_> = [0.5, 0.25, 0.125].iter().map(|&r| experiment(r, 1500, 9)).collect();
        let rep = krylov_ratio_study(&exps).unwrap();
        assert!(rep.pass, "{:?}", rep.metrics);
        assert!(rep.metrics["c_R0.125"] < rep.metrics["c_R0.5"]);
        assert_eq!(rep.cells.len(), 60);
        let backwards: Vec<_> = exps.into_iter().rev().collect();
        assert!(krylov_ratio_study(&backwards).is_err());
    }
}

mod exits {
    use super::*;

    #[test]
    fn exit_check_on_standard_grid() {
        let kern = JumpKernel::holder_bump(0.5, 0.5).unwrap();
        let sim = SimConfig { seed: 3, ..SimConfig::default() };
        let rep = exit_probability_check(&kern, &params(), &sim, &[0.0], &ExitGrid::standard(sim.dt), 3000).unwrap();
        assert!(rep.pass, "{:?}", rep.metrics);
        assert!(rep.metrics["earliest_exit_probability"] <= 0.05);
        assert!(rep.fitted_constant.unwrap().is_finite());
        // vacuous cells are labelled and carry no ratio
        for cell in &rep.cells {
            let vacuous = cell.t.unwrap() / cell.r.unwrap().powi(2) > 1.0;
            assert_eq!(cell.ratio.is_none(), vacuous);
            assert!((0.0..=1.0).contains(&cell.estimate));
        }
    }

    #[test]
    fn grid_validation() {
        let kern = JumpKernel::stable();
        let sim = SimConfig::default();
        let grid = ExitGrid { radii: vec![0.5], times: vec![1e-4] };
        assert!(exit_probability_check(&kern, &params(), &sim, &[0.0], &grid, 200).is_err());
        let empty = ExitGrid { radii: vec![], times: vec![0.01] };
        assert!(exit_probability_check(&kern, &params(), &sim, &[0.0], &empty, 200).is_err());
    }
}

mod martingale {
    use super::*;

    /// `E[cos X_t] - cos x - A dt Σ_{i<n} (-E cos X_{i dt})` when grid states
    /// are exact stable marginals.
    fn exact_cos_residual(a: f64, t: f64, dt: f64, x: f64) -> f64 {
        let n = (t / dt).round() as usize;
        let integral: f64 = (0..n).map(|i| (-a * i as f64 * dt).exp()).sum::<f64>() * dt;
        (-t * a).exp() * x.cos() - x.cos() + a * integral * x.cos()
    }

    #[test]
    fn constant_function_has_zero_residual() {
        let f: SharedTest = Arc::new(Constant { dim: 1, c: 2.5 });
        let kern = JumpKernel::holder_bump(0.5, 0.5).unwrap();
        let sim = SimConfig { k: 2, dt: 1e-2, ..SimConfig::default() };
        let m = martingale_residual(&kern, &params(), &sim, f, &[0.0], 1.0, 200).unwrap();
        assert_eq!((m.mean, m.stderr), (0.0, 0.0));
    }

    #[test]
    fn generator_field_table_matches_direct_evaluation() {
        let p = params();
        let f: SharedTest = Arc::new(Gaussian::new(&[0.0], 1.0, 1.0));
        let kern = JumpKernel::discontinuous_in_x(0.5, 0.5, 0.5).unwrap();
        let op = Operator::Truncated(kern, 4);
        let opts = GeneratorOptions::default().with_tolerance(1e-8);
        let table = GeneratorField::tabulated(f.clone(), op.clone(), &p, opts, -3.0, 3.0).unwrap();
        for &x in &[-2.9, -0.77, 0.1, 0.26, 1.3, 2.2] {
            let direct = op.apply(f.as_ref(), &[x], &p, &opts).unwrap();
            assert!((table.at(&[x]).unwrap() - direct).abs() < 3e-5, "{x}");
        }
        // outside the box it falls back to quadrature
        let direct = op.apply(f.as_ref(), &[5.0], &p, &opts).unwrap();
        assert_eq!(table.at(&[5.0]).unwrap(), direct);
    }

    #[test]
    fn cosine_matches_exact_residual_and_semigroup() {
        let p = params();
        let a = symbol_at_three_halves();
        assert!((a / p.symbol_constant - 1.0).abs() < 1e-8);
        let cos = Cosine::new(&[1.0], 1.0, 0.0);
        let v = cosine_semigroup(&p, &cos, &[0.0], 1.0);
        assert!((v - (-a).exp()).abs() < 1e-8);
        let f: SharedTest = Arc::new(cos);
        let sim = SimConfig { k: 1, seed: 21, ..SimConfig::default() };
        let study = MartingaleStudy {
            replicas: 6000,
            ..MartingaleStudy::standard(1)
        };
        let rep = martingale_study(&JumpKernel::stable(), &p, &sim, f, &study, Some(v)).unwrap();
        assert!(rep.pass, "{:?}", rep.metrics);
        for &dt in &study.dts {
            let mean = rep.metrics[&format!("residual_dt{dt}")];
            let se = rep.metrics[&format!("stderr_dt{dt}")];
            let exact = exact_cos_residual(a, 1.0, dt, 0.0);
            assert!((mean - exact).abs() <= 3.0 * se, "dt {dt}: {mean} vs {exact} ± {se}");
        }
    }

    #[test]
    fn perturbed_kernel_residual_shrinks_with_dt() {
        let f: SharedTest = Arc::new(Gaussian::new(&[0.0], 1.0, 1.0));
        let kern = JumpKernel::holder_bump(0.5, 0.5).unwrap();
        let sim = SimConfig { k: 1, seed: 7, ..SimConfig::default() };
        let study = MartingaleStudy {
            dts: vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0],
            replicas: 20_000,
            ..MartingaleStudy::standard(1)
        };
        let rep = martingale_study(&kern, &params(), &sim, f, &study, None).unwrap();
        assert!(rep.pass, "{:?}", rep.metrics);
        let coarse = rep.metrics["residual_dt0.03125"];
        let fine = rep.metrics["residual_dt0.0078125"];
        assert!(fine.abs() < coarse.abs());
    }

    #[test]
    fn rejects_non_decreasing_steps() {
        let f: SharedTest = Arc::new(Constant { dim: 1, c: 1.0 });
        let study = MartingaleStudy {
            dts: vec![0.01, 0.02],
            ..MartingaleStudy::standard(1)
        };
        let r = martingale_study(&JumpKernel::stable(), &params(), &SimConfig::default(), f, &study, None);
        assert!(matches!(r, Err(Error::Parameter { .. })));
    }
}

mod convergence {
    use super::*;

    fn study(replicas: usize, y: YSpec) -> ConvergenceStudy {
        ConvergenceStudy {
            replicas,
            y,
            ..ConvergenceStudy::standard(1)
        }
    }

    #[test]
    fn observables_and_y_validation() {
        assert_eq!(Observable::Constant.eval(&[3.0]), 1.0);
        assert!((Observable::Cos { freq: 2.0 }.eval(&[0.5]) - 1f64.cos()).abs() < 1e-15);
        assert!((Observable::Gaussian { width: 1.0 }.eval(&[1.0]) - (-0.5f64).exp()).abs() < 1e-15);
        let f: SharedTest = Arc::new(Constant { dim: 1, c: 1.0 });
        let late = YSpec { times: vec![0.9], observables: vec![Observable::Constant] };
        let sim = SimConfig { dt: 5e-4, ..SimConfig::default() };
        let r = weak_convergence_study(&JumpKernel::stable(), &params(), &sim, f.clone(), &study(200, late));
        assert!(r.is_err());
        let mut s = study(200, YSpec::one());
        s.k_list = vec![8, 4];
        assert!(weak_convergence_study(&JumpKernel::stable(), &params(), &sim, f, &s).is_err());
    }

    #[test]
    fn constant_function_gives_zero_everywhere() {
        let f: SharedTest = Arc::new(Constant { dim: 1, c: 1.0 });
        let kern = JumpKernel::discontinuous_in_x(0.5, 0.5, 0.5).unwrap();
        let sim = SimConfig { dt: 5e-4, ..SimConfig::default() };
        let rep = weak_convergence_study(&kern, &params(), &sim, f, &study(200, YSpec::one())).unwrap();
        for cell in &rep.cells {
            assert_eq!(cell.estimate, 0.0);
        }
    }

    #[test]
    fn unit_kernel_is_independent_of_k() {
        let f: SharedTest = Arc::new(Gaussian::new(&[0.0], 1.0, 1.0));
        let sim = SimConfig { dt: 5e-4, seed: 4, ..SimConfig::default() };
        let rep = weak_convergence_study(&JumpKernel::stable(), &params(), &sim, f, &study(1000, YSpec::standard(0.5)))
            .unwrap();
        for k in [8, 16] {
            let d = rep.metrics[&format!("diff_k{k}")];
            let se = rep.metrics[&format!("diff_stderr_k{k}")];
            assert!(d.abs() <= 3.0 * se, "k {k}: {d} ± {se}");
        }
    }

    #[test]
    fn discontinuous_kernel_differences_shrink() {
        let f: SharedTest = Arc::new(Gaussian::new(&[0.0], 1.0, 1.0));
        let kern = JumpKernel::discontinuous_in_x(0.5, 0.5, 0.5).unwrap();
        let sim = SimConfig { dt: 5e-4, seed: 8, ..SimConfig::default() };
        let rep = weak_convergence_study(&kern, &params(), &sim, f, &study(1000, YSpec::standard(0.5))).unwrap();
        assert!(rep.pass, "{:?}", rep.metrics);
        let estimates: Vec<MCEstimate> = rep
            .cells
            .iter()
            .filter(|c| c.f_id == "estimate")
            .map(|c| MCEstimate { mean: c.estimate, stderr: c.stderr.unwrap(), n: 1000, seed: 8 })
            .collect();
        assert_eq!(estimates.len(), 3);
        assert!(estimates.iter().all(|e| e.mean.is_finite()));
    }
}
