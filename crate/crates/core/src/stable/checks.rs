//! Report-producing checks of the sampler law, the density and the
//! resolvent mass.

use std::f64::consts::PI;

use serde_json::json;

use super::density::{transition_density_with, StandardDensity};
use super::params::StableParams;
use super::resolvent::Resolvent;
use super::sampler::sample_stable_increment;
use crate::error::{Error, Result};
use crate::quadrature::GaussKronrod;
use crate::report::{CheckReport, StudyCell};
use crate::rng::SeedTree;
use crate::stats::empirical_cf;

/// Empirical characteristic function of `n` time-one increments in d = 1
/// for each `α` at each `ξ`, against `exp(-A|ξ|^α)`. Passes when every
/// modulus error is within `4/√n + 1e-3`. Cells carry the real part; the
/// imaginary parts go to the metrics.
pub fn sampler_law_check(alphas: &[f64], xis: &[f64], n: usize, seed: u64) -> Result<CheckReport> {
    if n < 100 {
        return Err(Error::param("samples", format!("{n} below 100")));
    }
    let tol = 4.0 / (n as f64).sqrt() + 1e-3;
    let mut report = CheckReport::new("sampler_law");
    report.params = json!({ "alphas": alphas, "samples": n, "seed": seed, "t": 1.0 });
    report.grid_spec = json!({ "xi": xis });
    let mut worst: f64 = 0.0;
    let tree = SeedTree::new(seed).named("sampler-law");
    for (i, &alpha) in alphas.iter().enumerate() {
        let p = StableParams::new(1, alpha, 1.0)?;
        let mut rng = tree.child(i as u64).stream();
        let mut xs = Vec::with_capacity(n);
        let mut buf = [0.0];
        for _ in 0..n {
            sample_stable_increment(&p, 1.0, &mut rng, &mut buf)?;
            xs.push(vec![buf[0]]);
        }
        for &xi in xis {
            let (re, im) = empirical_cf(&xs, &[xi]);
            let exact = (-p.symbol_constant * xi.abs().powf(alpha)).exp();
            let err = ((re - exact).powi(2) + im * im).sqrt();
            worst = worst.max(err);
            report.metric(format!("cf_re_alpha{alpha}_xi{xi}"), re);
            report.metric(format!("cf_im_alpha{alpha}_xi{xi}"), im);
            report.cells.push(StudyCell {
                study: "sampler_law".into(),
                r: None,
                t: Some(1.0),
                k: None,
                f_id: format!("alpha={alpha},xi={xi}"),
                estimate: re,
                stderr: Some(1.0 / (n as f64).sqrt()),
                ratio: Some(err / tol),
                pass: err <= tol,
            });
        }
    }
    report.metric("tolerance", tol);
    report.worst_ratio = Some(worst / tol);
    report.pass = worst <= tol;
    Ok(report)
}

/// `p_t(x)` in d = 1 by cosine inversion with the time kept explicit,
/// independent of the scaled profile used by [`transition_density_with`].
pub fn density_by_inversion(params: &StableParams, t: f64, x: f64) -> Result<f64> {
    let (alpha, a) = (params.alpha, params.symbol_constant);
    let gk = GaussKronrod::new(1e-16, 1e-11).lenient();
    let vmax = (45.0 / (t * a)).powf(1.0 / alpha);
    let n = ((vmax * x.abs() / PI).ceil() as usize).max(1);
    let first = vmax / n as f64;
    // geometric breaks resolve the cusp of ξ^α at the origin
    let mut breaks: Vec<f64> = (0..12).map(|j| first * 0.25f64.powi(12 - j)).collect();
    breaks.insert(0, 0.0);
    breaks.extend((1..=n).map(|i| vmax * i as f64 / n as f64));
    let v = gk.integrate_with_breaks(|xi: f64| (xi * x).cos() * (-t * a * xi.powf(alpha)).exp(), &breaks)?;
    Ok(v.value / PI)
}

/// `∫_L^∞ q(x) dx` for `q(x) ~ x^{-1-α}` through `u = x^{-α}`, which turns
/// the tail into a bounded integrand on `[0, L^{-α}]`.
fn power_tail<F: Fn(f64) -> Result<f64>>(q: F, l: f64, alpha: f64, rel: f64) -> Result<f64> {
    let gk = GaussKronrod::new(1e-300, rel);
    let mut failure = None;
    let v = gk.integrate(
        |u: f64| {
            let x = u.powf(-1.0 / alpha);
            match q(x) {
                Ok(v) => v * x / (alpha * u),
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        0.0,
        l.powf(-alpha),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(v?.value)
}

/// Total mass of `p_1`: quadrature on `[0, L]` and a transformed tail.
fn density_mass(std: &StandardDensity, p: &StableParams) -> Result<f64> {
    let l = 100.0;
    let gk = GaussKronrod::new(1e-12, 1e-10);
    let body = gk.integrate_with_breaks(
        |x: f64| transition_density_with(std, p, 1.0, &[x]).unwrap_or(f64::NAN),
        &[0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0, l],
    )?;
    let tail = power_tail(|x| transition_density_with(std, p, 1.0, &[x]), l, p.alpha, 1e-10)?;
    Ok(2.0 * (body.value + tail))
}

/// `∫ r^λ` by log-radial quadrature on `[1e-4, 1e2]`, an analytic cap at
/// the origin and a transformed far tail.
fn resolvent_mass(p: &StableParams) -> Result<f64> {
    let r = Resolvent::new(p)?;
    let (lo, hi) = (1e-4f64, 1e2f64);
    let gk = GaussKronrod::new(1e-12, 1e-8);
    let mut failure = None;
    let body = gk.integrate_with_breaks(
        |w: f64| {
            let rho = w.exp();
            match r.radial(rho, 0) {
                Ok(v) => rho * v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &[lo.ln(), -3.0, 0.0, 3.0, hi.ln()],
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let near = r.radial(lo, 0)? * lo / p.alpha.min(1.0);
    let far = power_tail(|rho| r.radial(rho, 0), hi, p.alpha, 1e-8)?;
    Ok(2.0 * (body?.value + near + far))
}

/// Mass of `p_1`, self-similarity `p_t(x) = t^{-1/α} p_1(x t^{-1/α})`
/// against explicit-time inversion, resolvent mass `1/λ`, and the Cauchy
/// values `p_1(x)` for α = 1 at `x ∈ {0, 1, 5}` (closed form
/// `1/(π² + x²)`). One-dimensional.
pub fn density_resolvent_check(alpha: f64, lambda: f64) -> Result<CheckReport> {
    let p = StableParams::new(1, alpha, lambda)?;
    let std = StandardDensity::new(1, alpha)?;
    let mut report = CheckReport::new("density_resolvent");
    report.params = json!(p);
    let times = [0.25, 2.0, 7.0];
    let points = [0.0, 0.3, 1.7, 6.0];
    report.grid_spec = json!({ "times": times, "points": points, "cauchy_points": [0.0, 1.0, 5.0] });

    let mass = density_mass(&std, &p)?;
    let mut self_similarity: f64 = 0.0;
    for &t in &times {
        for &x in &points {
            let direct = density_by_inversion(&p, t, x)?;
            let s = t.powf(-1.0 / alpha);
            let scaled = s * transition_density_with(&std, &p, 1.0, &[x * s])?;
            self_similarity = self_similarity.max(((scaled - direct) / direct).abs());
        }
    }
    let res_mass = resolvent_mass(&p)?;

    let cauchy = StableParams::new(1, 1.0, lambda)?;
    let cstd = StandardDensity::new(1, 1.0)?;
    let mut cauchy_err: f64 = 0.0;
    for &x in &[0.0, 1.0, 5.0] {
        let v = transition_density_with(&cstd, &cauchy, 1.0, &[x])?;
        let exact = 1.0 / (PI * PI + x * x);
        cauchy_err = cauchy_err.max(((v - exact) / exact).abs());
        report.metric(format!("cauchy_p1_x{x}"), v);
    }
    report
        .metric("density_mass", mass)
        .metric("self_similarity_max_rel", self_similarity)
        .metric("resolvent_mass", res_mass)
        .metric("resolvent_mass_target", 1.0 / lambda)
        .metric("cauchy_max_rel", cauchy_err);
    report.pass = (mass - 1.0).abs() <= 1e-3
        && self_similarity <= 1e-6
        && (res_mass - 1.0 / lambda).abs() <= 1e-3
        && cauchy_err <= 1e-6;
    Ok(report)
}
