use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use stablelike::meyer::{
    cache_excess_rate, excess_rate, first_exit_time, read_path, sample_insertion_jump, simulate_base_step,
    simulate_path, truncated_second_moment, write_path, BaseStep, ExcessRate, Mark, PathSkeleton, SimConfig,
    Simulator,
};
use stablelike::operator::JumpKernel;
use stablelike::rng::SeedTree;
use stablelike::stable::sample_stable_increment;
use stablelike::stats::{chi_square_poisson, ks_one_sample, ks_two_sample, MCEstimate};
use stablelike::table::AdaptiveTable;
use stablelike::{Error, StableParams};

fn params(alpha: f64) -> StableParams {
    StableParams::new(1, alpha, 1.0).unwrap()
}

/// `N` for `n = 1 + a(1 ∧ |h|^β)` in d = 1, integrated by hand.
fn holder_rate(alpha: f64, beta: f64, a: f64, k: f64) -> f64 {
    2.0 * (k.powf(alpha) / alpha + a * ((k.powf(alpha - beta) - 1.0) / (alpha - beta) + 1.0 / alpha))
}

#[test]
fn excess_rate_of_unit_kernel_at_level_one() {
    let p = params(1.0);
    // a constant kernel that is not flagged as the stable one goes through quadrature
    let one = JumpKernel::new("one", 1.0, 0.1, 0.5, |_, _| 1.0).unwrap();
    let n = excess_rate(&one, &p, 1, &[0.3]).unwrap();
    assert!((n - 2.0).abs() < 1e-10, "{n}");
    assert_eq!(excess_rate(&JumpKernel::stable(), &p, 1, &[0.3]).unwrap(), 2.0);
}

#[test]
fn excess_rate_matches_closed_form_and_bounds() {
    for &alpha in &[0.6, 1.5] {
        let p = params(alpha);
        let kern = JumpKernel::holder_bump(0.5, 0.5).unwrap();
        for &k in &[1u32, 4, 8, 32] {
            let n = excess_rate(&kern, &p, k, &[0.0]).unwrap();
            let oracle = holder_rate(alpha, 0.5, 0.5, k as f64);
            assert!((n - oracle).abs() < 1e-9 * oracle, "α={alpha} k={k}: {n} vs {oracle}");
        }
        let disc = JumpKernel::discontinuous_in_x(0.5, 0.5, 0.5).unwrap();
        for &x in &[0.1, 0.7, -1.2] {
            for &k in &[2u32, 8] {
                let n = excess_rate(&disc, &p, k, &[x]).unwrap();
                let unit = 2.0 * (k as f64).powf(alpha) / alpha;
                assert!(n >= disc.kappa * unit && n <= disc.upper() * unit, "{n}");
            }
        }
    }
    // d = 3, unit kernel, against the polar formula
    let p3 = StableParams::new(3, 1.2, 1.0).unwrap();
    let one = JumpKernel::new("one", 1.0, 0.1, 0.5, |_, _| 1.0).unwrap();
    let n = excess_rate(&one, &p3, 4, &[0.0, 0.0, 0.0]).unwrap();
    let oracle = 4.0 * std::f64::consts::PI * 4f64.powf(1.2) / 1.2;
    assert!((n - oracle).abs() < 1e-9 * oracle);
}

#[test]
fn insertion_jumps_follow_truncated_stable_law() {
    let p = params(1.5);
    let one = JumpKernel::new("one", 1.0, 0.1, 0.5, |_, _| 1.0).unwrap();
    let k = 4u32;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let mut h = [0.0];
    let mut sizes = Vec::with_capacity(n);
    let mut positive = 0usize;
    for _ in 0..n {
        sample_insertion_jump(&one, &p, k, &[0.0], &mut rng, &mut h).unwrap();
        assert!(h[0].abs() > 0.25);
        sizes.push(h[0].abs());
        positive += (h[0] > 0.0) as usize;
    }
    let ks = ks_one_sample(&sizes, |r| 1.0 - (k as f64 * r).powf(-1.5));
    assert!(ks.passes(0.01), "{ks:?}");
    let frac = positive as f64 / n as f64;
    assert!((frac - 0.5).abs() <= 3.0 / (2.0 * (n as f64).sqrt()), "{frac}");
}

#[test]
fn insertion_jumps_of_holder_kernel_follow_its_tail() {
    let (alpha, beta, a) = (1.5, 0.5, 0.5);
    let p = params(alpha);
    let kern = JumpKernel::holder_bump(a, beta).unwrap();
    let k = 4u32;
    let total = holder_rate(alpha, beta, a, k as f64);
    // mass of |h| > ρ, for ρ ≥ 1/k
    let tail = |rho: f64| {
        if rho >= 1.0 {
            2.0 * (1.0 + a) * rho.powf(-alpha) / alpha
        } else {
            2.0 * (rho.powf(-alpha) / alpha + a * ((rho.powf(beta - alpha) - 1.0) / (alpha - beta) + 1.0 / alpha))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut h = [0.0];
    let sizes: Vec<f64> = (0..100_000)
        .map(|_| {
            sample_insertion_jump(&kern, &p, k, &[0.0], &mut rng, &mut h).unwrap();
            h[0].abs()
        })
        .collect();
    let ks = ks_one_sample(&sizes, |r| 1.0 - tail(r) / total);
    assert!(ks.passes(0.01), "{ks:?}");
}

#[test]
fn rejection_loop_gives_up() {
    let p = params(1.5);
    let bad = JumpKernel::new("tiny", 1e-12, 1e12, 0.5, |_, _| 1e-12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut h = [0.0];
    let err = sample_insertion_jump(&bad, &p, 2, &[0.0], &mut rng, &mut h).unwrap_err();
    assert!(matches!(err, Error::Sampler(_)));
}

#[test]
fn base_step_second_moment_scales_with_truncation() {
    for &alpha in &[0.5, 1.0, 1.5] {
        let p = params(alpha);
        let dt = 1e-3;
        for &k in &[4u32, 16, 64] {
            let step = BaseStep::new(&p, k, dt).unwrap();
            let mut rng = SeedTree::new(5).child(k as u64).stream();
            let mut out = [0.0];
            let xs: Vec<f64> = (0..200_000)
                .map(|_| {
                    step.sample(&mut rng, &mut out);
                    out[0]
                })
                .collect();
            let sq: Vec<f64> = xs.iter().map(|x| x * x / dt).collect();
            let m2 = MCEstimate::from_samples(&sq, 0);
            let oracle = truncated_second_moment(&p, k);
            assert!(m2.within(oracle, 4.0, 0.0), "α={alpha} k={k}: {m2:?} vs {oracle}");
            let mean = MCEstimate::from_samples(&xs, 0);
            assert!(mean.within(0.0, 3.0, 0.0), "α={alpha} k={k}: {mean:?}");
        }
    }
}

#[test]
fn base_step_without_truncation_is_the_stable_increment() {
    let p = params(1.5);
    let dt = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a: Vec<f64> = (0..10_000).map(|_| simulate_base_step(&p, 1, dt, &mut rng).unwrap()[0]).collect();
    let mut out = [0.0];
    let b: Vec<f64> = (0..10_000)
        .map(|_| {
            sample_stable_increment(&p, dt, &mut rng, &mut out).unwrap();
            out[0]
        })
        .collect();
    let ks = ks_two_sample(&a, &b);
    assert!(ks.passes(0.01), "{ks:?}");
}

#[test]
fn unit_kernel_reproduces_the_stable_process() {
    let p = params(1.5);
    let cfg = SimConfig { seed: 21, ..SimConfig::default() };
    let sim = Simulator::direct(&JumpKernel::stable(), &p, &cfg).unwrap();
    let ends = sim.replicas(&[0.0], 10_000, |_| false, |_, path| Ok(path.last_state()[0])).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut out = [0.0];
    let direct: Vec<f64> = (0..10_000)
        .map(|_| {
            sample_stable_increment(&p, 1.0, &mut rng, &mut out).unwrap();
            out[0]
        })
        .collect();
    let ks = ks_two_sample(&ends, &direct);
    assert!(ks.passes(0.01), "{ks:?}");
    let counts = sim.replicas(&[0.0], 200, |_| false, |_, path| Ok(path.insertions.len())).unwrap();
    assert!(counts.iter().sum::<usize>() > 0);
}

#[test]
fn insertion_counts_are_poisson_and_clock_increments_exponential() {
    let p = params(1.5);
    let kern = JumpKernel::holder_bump(0.5, 0.5).unwrap();
    let cfg = SimConfig { seed: 9, ..SimConfig::default() };
    let sim = Simulator::direct(&kern, &p, &cfg).unwrap();
    assert!(sim.rates.is_constant());
    let nu = sim.rates.sup();
    let runs = sim
        .replicas(&[0.0], 10_000, |_| false, |_, path| {
            Ok((path.insertions.len() as u64, path.insertions.iter().map(|i| i.consumed).collect::<Vec<_>>()))
        })
        .unwrap();
    let counts: Vec<u64> = runs.iter().map(|r| r.0).collect();
    let gof = chi_square_poisson(&counts, nu * cfg.horizon).unwrap();
    assert!(gof.passes(0.01), "{gof:?}");
    // the horizon censors the last threshold of each path, which biases the
    // pool of completed ones; the first νT/4 thresholds are uncensored to
    // within P(Gamma(νT/4) > νT)
    let early = (nu * cfg.horizon / 4.0).floor() as usize;
    let consumed: Vec<f64> = runs.iter().flat_map(|r| r.1.iter().take(early).copied()).collect();
    assert!(consumed.len() >= 10_000);
    let ks = ks_one_sample(&consumed, |s| 1.0 - (-s).exp());
    assert!(ks.passes(0.01), "{ks:?}");
}

#[test]
fn paths_are_deterministic_per_replica() {
    let p = params(1.5);
    let kern = JumpKernel::discontinuous_in_x(0.5, 0.5, 0.5).unwrap();
    let cfg = SimConfig { horizon: 0.2, seed: 4, replica_id: 3, ..SimConfig::default() };
    let a = simulate_path(&kern, &p, &cfg, &[0.1]).unwrap();
    let b = simulate_path(&kern, &p, &cfg, &[0.1]).unwrap();
    assert_eq!(a, b);
    let c = simulate_path(&kern, &p, &SimConfig { replica_id: 4, ..cfg.clone() }, &[0.1]).unwrap();
    assert_ne!(a.states, c.states);
    assert_eq!(a.len(), 201);
    assert!(a.times.windows(2).all(|w| w[1] > w[0]));
    assert!(a.states.iter().all(|v| v.is_finite()));
}

#[test]
fn marks_agree_with_recorded_jumps() {
    let p = params(1.5);
    let kern = JumpKernel::holder_bump(0.5, 0.5).unwrap();
    let cfg = SimConfig { seed: 2, ..SimConfig::default() };
    let path = simulate_path(&kern, &p, &cfg, &[0.0]).unwrap();
    let marked: Vec<usize> = (0..path.len()).filter(|&i| path.marks[i] == Mark::MeyerInsertion).collect();
    let mut steps: Vec<usize> = path.insertions.iter().map(|i| i.step).collect();
    steps.dedup();
    assert_eq!(marked, steps);
    assert_eq!(path.clock.insertions as usize, path.insertions.len());
    assert!(path.insertions.iter().all(|i| i.h[0].abs() > 1.0 / 8.0));
    assert!(path.marks.contains(&Mark::StableBigJump));
}

#[test]
fn clock_guard_and_evenness_are_enforced() {
    let p = params(1.5);
    let cfg = SimConfig { dt: 1e-2, k: 64, ..SimConfig::default() };
    let err = Simulator::direct(&JumpKernel::stable(), &p, &cfg).unwrap_err();
    assert!(matches!(err, Error::Parameter { name: "dt", .. }));
    let skew = JumpKernel::new("skew", 0.5, 0.5, 0.5, |_, h| if h[0] > 0.0 { 1.5 } else { 1.0 }).unwrap();
    let err = Simulator::direct(&skew, &p, &SimConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Contract(_)));
    let bad = SimConfig { horizon: 1e-4, ..SimConfig::default() };
    assert!(bad.validate().is_err());
}

#[test]
fn exit_times_on_handmade_paths() {
    let cfg = SimConfig { horizon: 0.003, ..SimConfig::default() };
    let still = PathSkeleton::from_states(1, vec![0.0; 4], cfg.clone()).unwrap();
    assert_eq!(first_exit_time(&still, &[0.0], 0.5), (0.003, false));
    let out = PathSkeleton::from_states(1, vec![0.0, 0.7, 0.0, 0.0], cfg).unwrap();
    assert_eq!(first_exit_time(&out, &[0.0], 0.5), (out.times[1], true));
}

#[test]
fn exit_probability_is_antitone_in_radius() {
    let p = params(1.5);
    let cfg = SimConfig { horizon: 0.05, seed: 8, ..SimConfig::default() };
    let sim = Simulator::direct(&JumpKernel::holder_bump(0.5, 0.5).unwrap(), &p, &cfg).unwrap();
    let rows = sim
        .replicas(&[0.0], 10_000, |_| false, |_, path| {
            let small = first_exit_time(path, &[0.0], 0.25).1 as u8 as f64;
            let large = first_exit_time(path, &[0.0], 0.5).1 as u8 as f64;
            Ok((small, large))
        })
        .unwrap();
    let a = MCEstimate::from_samples(&rows.iter().map(|r| r.0).collect::<Vec<_>>(), 0);
    let b = MCEstimate::from_samples(&rows.iter().map(|r| r.1).collect::<Vec<_>>(), 0);
    assert!(a.mean >= b.mean - 3.0 * stablelike::stats::pooled_stderr(&a, &b));
    assert!(a.mean > b.mean);
}

#[test]
fn excess_rate_cache() {
    let p = params(1.5);
    let flat = cache_excess_rate(&JumpKernel::holder_bump(0.5, 0.5).unwrap(), &p, 8, -5.0, 5.0).unwrap();
    assert!(flat.is_constant());
    assert_eq!(flat.at(&[3.0]).unwrap(), flat.at(&[-1.0]).unwrap());

    let disc = JumpKernel::discontinuous_in_x(0.5, 0.5, 0.5).unwrap();
    let rate = cache_excess_rate(&disc, &p, 8, -4.0, 4.0).unwrap();
    assert!(rate.validation_error.unwrap() <= 0.01);
    let table = rate.table().unwrap();
    let min_n = table.min_value();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let x: f64 = rng.random_range(-4.0..4.0);
        let direct = excess_rate(&disc, &p, 8, &[x]).unwrap();
        assert!((rate.at(&[x]).unwrap() - direct).abs() <= 0.01 * min_n);
    }
    // outside the box the rate falls back to quadrature
    assert_eq!(rate.at(&[9.3]).unwrap(), excess_rate(&disc, &p, 8, &[9.3]).unwrap());
}

#[test]
fn excess_rate_interpolation_error_shrinks_under_refinement() {
    let p = params(1.5);
    let smooth = JumpKernel::new("wavy", 0.5, 0.5, 0.5, |x, h| 1.0 + 0.5 * x[0].sin() * h[0].abs().powf(0.5).min(1.0))
        .unwrap();
    let f = |x: f64| excess_rate(&smooth, &p, 8, &[x]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let coarse = AdaptiveTable::uniform(f, -3.0, 3.0, 17).unwrap();
    let fine = AdaptiveTable::uniform(f, -3.0, 3.0, 33).unwrap();
    let ec = coarse.worst_error(f, 300, &mut rng).unwrap();
    let ef = fine.worst_error(f, 300, &mut rng).unwrap();
    assert!(ef <= 0.5 * ec, "{ec} {ef}");
}

#[test]
fn direct_rate_for_x_dependent_kernel() {
    let p = params(1.5);
    let disc = JumpKernel::discontinuous_in_x(0.5, 0.5, 0.5).unwrap();
    let r = ExcessRate::direct(&disc, &p, 4).unwrap();
    assert!(!r.is_constant());
    assert!(r.at(&[0.2]).unwrap() > r.at(&[0.7]).unwrap());
}

#[test]
fn path_dump_round_trip() {
    let p = params(1.5);
    let cfg = SimConfig { horizon: 0.05, seed: 1, ..SimConfig::default() };
    let path = simulate_path(&JumpKernel::stable(), &p, &cfg, &[0.0]).unwrap();
    let mut buf = Vec::new();
    write_path(&path, &mut buf).unwrap();
    assert_eq!(buf.len(), 4 + 8 + path.len() * (8 + 8 + 1));
    assert_eq!(&buf[..4], &0x4D59_5201u32.to_le_bytes());
    let rec = read_path(buf.as_slice()).unwrap();
    assert_eq!(rec.times, path.times);
    assert_eq!(rec.states, path.states);
    assert_eq!(rec.marks, path.marks);
    buf[0] ^= 0xFF;
    assert!(matches!(read_path(buf.as_slice()), Err(Error::Schema(_))));
}

#[test]
fn replica_runner_preserves_order() {
    let p = params(1.5);
    let cfg = SimConfig { horizon: 0.01, ..SimConfig::default() };
    let sim = Simulator::direct(&JumpKernel::stable(), &p, &cfg).unwrap();
    let ids = sim.replicas(&[0.0], 64, |_| false, |r, _| Ok(r)).unwrap();
    assert_eq!(ids, (0..64).collect::<Vec<u64>>());
    let serial: Vec<f64> = (0..64).map(|r| sim.path(&[0.0], r).unwrap().last_state()[0]).collect();
    let parallel: Vec<f64> = (0..64u64).into_par_iter().map(|r| sim.path(&[0.0], r).unwrap().last_state()[0]).collect();
    assert_eq!(serial, parallel);
}

#[test]
fn construction_check_report() {
    let p = params(1.5);
    let kern = JumpKernel::holder_bump(0.5, 0.5).unwrap();
    let cfg = SimConfig { seed: 11, horizon: 0.5, ..SimConfig::default() };
    let r = stablelike::meyer::meyer_construction_check(&kern, &p, &cfg, 2000).unwrap();
    assert!(r.pass, "{:?}", r.metrics);
    let rate = excess_rate(&kern, &p, cfg.k, &[0.0]).unwrap();
    assert!((r.metrics["rate"] / rate - 1.0).abs() < 1e-9);
    for key in ["poisson_p_value", "clock_ks_p_value", "terminal_ks_p_value"] {
        assert!(r.metrics[key] >= 0.01, "{key}");
    }
    let moving = JumpKernel::discontinuous_in_x(0.5, 0.5, 0.5).unwrap();
    assert!(stablelike::meyer::meyer_construction_check(&moving, &p, &cfg, 10).is_err());
}
