//! Exit probabilities `P(τ_{B(x,R)} ≤ t)` against the envelope `c₁ t / R²`.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::meyer::{SimConfig, Simulator};
use crate::operator::JumpKernel;
use crate::report::{CheckReport, StudyCell};
use crate::sphere::distance;
use crate::stable::StableParams;
use crate::stats::{pooled_stderr, MCEstimate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitGrid {
    pub radii: Vec<f64>,
    pub times: Vec<f64>,
}

impl ExitGrid {
    /// Radii `{1/2, 1/4, 1/8}` and times from one step up to `1/16`.
    pub fn standard(dt: f64) -> Self {
        Self {
            radii: vec![0.5, 0.25, 0.125],
            times: vec![dt, 0.005, 0.01, 0.02, 0.04, 0.0625],
        }
    }

    fn validate(&self, dt: f64) -> Result<()> {
        if self.radii.is_empty() || self.times.is_empty() {
            return Err(Error::param("grid", "need at least one radius and one time"));
        }
        if self.radii.iter().any(|&r| !(r > 0.0)) || self.times.iter().any(|&t| !(t >= dt)) {
            return Err(Error::param("grid", "radii must be positive and times at least dt"));
        }
        Ok(())
    }
}

/// Exit indicators `[radius][time]` per replica from one set of paths.
fn exit_table(sim: &Simulator, center: &[f64], grid: &ExitGrid, replicas: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    let r_max = grid.radii.iter().copied().fold(0.0, f64::max);
    sim.replicas(
        center,
        replicas,
        |x| distance(x, center) >= r_max,
        |_, path| {
            let mut rows = Vec::with_capacity(grid.radii.len());
            for &r in &grid.radii {
                let tau = (0..path.len())
                    .find(|&i| distance(path.state(i), center) >= r)
                    .map_or(f64::INFINITY, |i| path.times[i]);
                // grid times are multiples of dt; compare with half a step of slack
                let half = 0.5 * sim.config.dt;
                rows.push(grid.times.iter().map(|&t| (tau <= t + half) as u8 as f64).collect());
            }
            Ok(rows)
        },
    )
}

fn estimates(table: &[Vec<Vec<f64>>], i: usize, j: usize, seed: u64) -> MCEstimate {
    let samples: Vec<f64> = table.iter().map(|rep| rep[i][j]).collect();
    MCEstimate::from_samples(&samples, seed)
}

/// Fits the smallest `c₁` with `P̂ - 2σ ≤ c₁ t / R²` over the non-vacuous
/// cells (`t/R² ≤ 1`), checks monotonicity in `t` and antitonicity in `R`
/// within two pooled standard errors, and reruns at `dt/2` to report the
/// discretization sensitivity.
pub fn exit_probability_check(
    kernel: &JumpKernel,
    params: &StableParams,
    sim: &SimConfig,
    center: &[f64],
    grid: &ExitGrid,
    replicas: usize,
) -> Result<CheckReport> {
    grid.validate(sim.dt)?;
    let t_max = grid.times.iter().copied().fold(0.0, f64::max);
    let cfg = SimConfig {
        horizon: t_max,
        ..sim.clone()
    };
    let c = center[0];
    let r_max = grid.radii.iter().copied().fold(0.0, f64::max);
    let simulator = Simulator::on_box(kernel, params, &cfg, c - r_max - 1.0, c + r_max + 1.0)?;
    let table = exit_table(&simulator, center, grid, replicas)?;
    let half_cfg = SimConfig {
        dt: 0.5 * cfg.dt,
        ..cfg.clone()
    };
    let half_sim = Simulator::on_box(kernel, params, &half_cfg, c - r_max - 1.0, c + r_max + 1.0)?;
    let half_table = exit_table(&half_sim, center, grid, replicas)?;

    let mut report = CheckReport::new("exit_probability");
    report.params = json!({ "stable": params, "kernel": kernel.describe(), "sim": cfg, "replicas": replicas });
    report.grid_spec = json!({ "radii": grid.radii, "times": grid.times, "center": center });
    let nr = grid.radii.len();
    let nt = grid.times.len();
    let est: Vec<Vec<MCEstimate>> =
        (0..nr).map(|i| (0..nt).map(|j| estimates(&table, i, j, cfg.seed)).collect()).collect();
    let mut c1: f64 = 0.0;
    let mut in_range = true;
    let mut sensitivity: f64 = 0.0;
    for i in 0..nr {
        for j in 0..nt {
            let (r, t) = (grid.radii[i], grid.times[j]);
            let e = est[i][j];
            in_range &= (0.0..=1.0).contains(&e.mean);
            let vacuous = t / (r * r) > 1.0;
            if !vacuous {
                c1 = c1.max((e.mean - 2.0 * e.stderr).max(0.0) * r * r / t);
            }
            let half = estimates(&half_table, i, j, cfg.seed);
            sensitivity = sensitivity.max((half.mean - e.mean).abs());
            report.cells.push(StudyCell {
                study: "exit".into(),
                r: Some(r),
                t: Some(t),
                k: Some(cfg.k),
                f_id: if vacuous { "vacuous".into() } else { "exit".into() },
                estimate: e.mean,
                stderr: Some(e.stderr),
                ratio: (!vacuous).then(|| e.mean * r * r / t),
                pass: (0.0..=1.0).contains(&e.mean),
            });
        }
    }
    let mut monotone_t = true;
    let mut antitone_r = true;
    for i in 0..nr {
        for j in 0..nt {
            for j2 in 0..nt {
                if grid.times[j2] > grid.times[j] {
                    let (a, b) = (est[i][j], est[i][j2]);
                    monotone_t &= b.mean >= a.mean - 2.0 * pooled_stderr(&a, &b);
                }
            }
            for i2 in 0..nr {
                if grid.radii[i2] > grid.radii[i] {
                    let (a, b) = (est[i][j], est[i2][j]);
                    antitone_r &= b.mean <= a.mean + 2.0 * pooled_stderr(&a, &b);
                }
            }
        }
    }
    // the earliest time at the largest radius should see almost no exits
    let (i_big, _) = grid.radii.iter().enumerate().fold((0, 0.0), |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc });
    let (j_small, _) =
        grid.times.iter().enumerate().fold((0, f64::INFINITY), |acc, (j, &t)| if t < acc.1 { (j, t) } else { acc });
    let early = est[i_big][j_small].mean;
    let early_ok = grid.times[j_small] > cfg.dt * 1.5 || early <= 0.05;
    report.fitted_constant = Some(c1);
    report.metric("c1", c1);
    report.metric("monotone_in_t", monotone_t as u8 as f64);
    report.metric("antitone_in_R", antitone_r as u8 as f64);
    report.metric("earliest_exit_probability", early);
    report.metric("dt_halving_max_delta", sensitivity);
    report.pass = c1.is_finite() && in_range && monotone_t && antitone_r && early_ok;
    Ok(report)
}
