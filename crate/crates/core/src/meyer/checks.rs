//! Statistical checks of the construction itself.

use serde_json::json;

use super::{SimConfig, Simulator};
use crate::error::{Error, Result};
use crate::operator::JumpKernel;
use crate::report::{CheckReport, StudyCell};
use crate::rng::SeedTree;
use crate::stable::{sample_stable_increment, StableParams};
use crate::stats::{chi_square_poisson, ks_one_sample, ks_two_sample, TestOutcome};

/// Significance level of every test here.
pub const LEVEL: f64 = 0.01;

fn cell(name: &str, outcome: &TestOutcome, k: u32) -> StudyCell {
    StudyCell {
        study: "meyer".into(),
        r: None,
        t: None,
        k: Some(k),
        f_id: name.into(),
        estimate: outcome.statistic,
        stderr: None,
        ratio: Some(outcome.p_value),
        pass: outcome.passes(LEVEL),
    }
}

/// Three tests at the 1% level over `replicas` paths of length `sim.horizon`
/// from the origin:
///
/// - insertion counts under the x-independent `kernel` against Poisson(νT);
/// - consumed clock increments against Exp(1), using the first `⌊νT/4⌋`
///   thresholds of each path (the last one is censored by the horizon);
/// - the terminal law under `n ≡ 1` against as many direct stable draws.
pub fn meyer_construction_check(
    kernel: &JumpKernel,
    params: &StableParams,
    sim: &SimConfig,
    replicas: usize,
) -> Result<CheckReport> {
    if !kernel.x_independent {
        return Err(Error::Contract(format!("kernel `{}` has a state-dependent rate", kernel.label)));
    }
    let x0 = vec![0.0; params.d];
    let simulator = Simulator::direct(kernel, params, sim)?;
    let nu = simulator.rates.sup();
    let runs = simulator.replicas(&x0, replicas, |_| false, |_, path| {
        Ok((path.insertions.len() as u64, path.insertions.iter().map(|i| i.consumed).collect::<Vec<_>>()))
    })?;
    let counts: Vec<u64> = runs.iter().map(|r| r.0).collect();
    let poisson = chi_square_poisson(&counts, nu * sim.horizon)?;
    let early = ((nu * sim.horizon / 4.0).floor() as usize).max(1);
    let consumed: Vec<f64> = runs.iter().flat_map(|r| r.1.iter().take(early).copied()).collect();
    let clock = ks_one_sample(&consumed, |s| 1.0 - (-s).exp());

    let unit = Simulator::direct(&JumpKernel::stable(), params, sim)?;
    let ends = unit.replicas(&x0, replicas, |_| false, |_, path| Ok(path.last_state()[0]))?;
    let mut rng = SeedTree::new(sim.seed).named("direct-stable").stream();
    let mut buf = vec![0.0; params.d];
    let mut direct = Vec::with_capacity(replicas);
    for _ in 0..replicas {
        sample_stable_increment(params, sim.horizon, &mut rng, &mut buf)?;
        direct.push(buf[0]);
    }
    let terminal = ks_two_sample(&ends, &direct);

    let mut report = CheckReport::new("meyer_construction");
    report.params = json!({ "stable": params, "kernel": kernel.describe(), "sim": sim, "replicas": replicas });
    report.grid_spec = json!({ "level": LEVEL, "thresholds_per_path": early });
    report
        .metric("rate", nu)
        .metric("mean_count", counts.iter().sum::<u64>() as f64 / replicas as f64)
        .metric("poisson_statistic", poisson.statistic)
        .metric("poisson_p_value", poisson.p_value)
        .metric("clock_samples", consumed.len() as f64)
        .metric("clock_ks_statistic", clock.statistic)
        .metric("clock_ks_p_value", clock.p_value)
        .metric("terminal_ks_statistic", terminal.statistic)
        .metric("terminal_ks_p_value", terminal.p_value);
    report.cells.push(cell("insertion_counts", &poisson, sim.k));
    report.cells.push(cell("clock_increments", &clock, sim.k));
    report.cells.push(cell("unit_terminal_law", &terminal, sim.k));
    report.pass = poisson.passes(LEVEL) && clock.passes(LEVEL) && terminal.passes(LEVEL);
    Ok(report)
}
