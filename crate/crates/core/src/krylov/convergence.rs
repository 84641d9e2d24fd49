//! The functional `E[Y · ∫₀ᵗ ℒ_k f(X_s) ds]` across truncation levels `k`,
//! where `Y` is a product of bounded observables at fixed times.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::meyer::{SimConfig, Simulator};
use crate::operator::function::SharedTest;
use crate::operator::JumpKernel;
use crate::report::{CheckReport, StudyCell};
use crate::stable::StableParams;
use crate::stats::MCEstimate;

use super::martingale::{field_options, truncated_operator, GeneratorField};

/// A bounded function of the state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    Constant,
    /// `cos(freq · x₁)`
    Cos { freq: f64 },
    /// `exp(-|x|² / (2 width²))`
    Gaussian { width: f64 },
}

impl Observable {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Observable::Constant => 1.0,
            Observable::Cos { freq } => (freq * x[0]).cos(),
            Observable::Gaussian { width } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (-r2 / (2.0 * width * width)).exp()
            }
        }
    }
}

/// `Y = Π_i h_i(X_{r_i})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YSpec {
    pub times: Vec<f64>,
    pub observables: Vec<Observable>,
}

impl YSpec {
    pub fn one() -> Self {
        Self {
            times: Vec::new(),
            observables: Vec::new(),
        }
    }

    /// `cos(X_{t/4}) · exp(-X_{t/2}²/2)`
    pub fn standard(t: f64) -> Self {
        Self {
            times: vec![0.25 * t, 0.5 * t],
            observables: vec![Observable::Cos { freq: 1.0 }, Observable::Gaussian { width: 1.0 }],
        }
    }

    fn validate(&self, t: f64) -> Result<()> {
        if self.times.len() != self.observables.len() {
            return Err(Error::param("y", "times and observables differ in length"));
        }
        if self.times.iter().any(|&r| !(0.0..=t).contains(&r)) {
            return Err(Error::param("y", format!("observation times must lie in [0, {t}]")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceStudy {
    pub x0: Vec<f64>,
    pub t: f64,
    /// Increasing truncation levels, each double the previous.
    pub k_list: Vec<u32>,
    pub replicas: usize,
    pub y: YSpec,
    pub table_half_width: f64,
}

impl ConvergenceStudy {
    pub fn standard(d: usize) -> Self {
        Self {
            x0: vec![0.0; d],
            t: 0.5,
            k_list: vec![4, 8, 16],
            replicas: 4000,
            y: YSpec::standard(0.5),
            table_half_width: 12.0,
        }
    }
}

/// Estimates the functional for each `k` on common random numbers (every
/// simulator resolves jumps up to `1/k_min`, so replica `i` shares its noise
/// across levels) and checks that successive paired differences `D_j`
/// contract at least like `2^{-(2-α+β)}` per doubling, with a factor 1.5 of
/// slack on the rate and two standard errors of noise.
pub fn weak_convergence_study(
    kernel: &JumpKernel,
    params: &StableParams,
    sim: &SimConfig,
    f: SharedTest,
    study: &ConvergenceStudy,
) -> Result<CheckReport> {
    study.y.validate(study.t)?;
    if study.k_list.len() < 2 || study.k_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("k_list", "need at least two increasing truncation levels"));
    }
    let dt = sim.dt;
    let indices: Vec<usize> = study.y.times.iter().map(|r| (r / dt).round() as usize).collect();
    let c = study.x0[0];
    let (lo, hi) = (c - study.table_half_width, c + study.table_half_width);
    let k_min = study.k_list[0];
    let opts = field_options();

    let mut per_k: Vec<Vec<f64>> = Vec::new();
    for &k in &study.k_list {
        let cfg = SimConfig {
            k,
            horizon: study.t,
            ..sim.clone()
        };
        let simulator = Simulator::on_box(kernel, params, &cfg, lo, hi)?.with_coupling_radius(1.0 / k_min as f64)?;
        let op = truncated_operator(kernel, k);
        let field = if params.d == 1 {
            GeneratorField::tabulated(f.clone(), op, params, opts, lo, hi)?
        } else {
            GeneratorField::direct(f.clone(), op, params, opts)
        };
        let samples = simulator.replicas(
            &study.x0,
            study.replicas,
            |_| false,
            |_, path| {
                let mut y = 1.0;
                for (h, &i) in study.y.observables.iter().zip(&indices) {
                    y *= h.eval(path.state(i.min(path.len() - 1)));
                }
                if y == 0.0 {
                    return Ok(0.0);
                }
                let mut integral = 0.0;
                for i in 0..path.len() - 1 {
                    integral += field.at(path.state(i))? * (path.times[i + 1] - path.times[i]);
                }
                Ok(y * integral)
            },
        )?;
        per_k.push(samples);
    }

    let seed = sim.seed;
    let gamma = 2.0 - params.alpha + kernel.beta;
    let mut report = CheckReport::new("weak_convergence");
    report.params = json!({ "stable": params, "kernel": kernel.describe(), "sim": sim, "gamma": gamma });
    report.grid_spec = json!({ "x0": study.x0, "t": study.t, "k_list": study.k_list, "y": study.y, "replicas": study.replicas });
    for (j, &k) in study.k_list.iter().enumerate() {
        let e = MCEstimate::from_samples(&per_k[j], seed);
        report.metric(format!("estimate_k{k}"), e.mean);
        report.metric(format!("stderr_k{k}"), e.stderr);
        report.cells.push(StudyCell {
            study: "convergence".into(),
            r: None,
            t: Some(study.t),
            k: Some(k),
            f_id: "estimate".into(),
            estimate: e.mean,
            stderr: Some(e.stderr),
            ratio: None,
            pass: e.mean.is_finite(),
        });
    }
    let diffs: Vec<MCEstimate> = per_k
        .windows(2)
        .map(|w| {
            let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect();
            MCEstimate::from_samples(&d, seed)
        })
        .collect();
    let mut contracting = true;
    for (j, d) in diffs.iter().enumerate() {
        let k = study.k_list[j + 1];
        let mut ok = d.mean.is_finite();
        let mut ratio = None;
        if j > 0 {
            let prev = diffs[j - 1];
            let steps = (study.k_list[j + 1] as f64 / study.k_list[j] as f64).log2();
            let factor = 1.5 * 2f64.powf(-gamma * steps);
            let noise = 2.0 * (d.stderr.powi(2) + (factor * prev.stderr).powi(2)).sqrt();
            ok &= d.mean.abs() <= factor * prev.mean.abs() + noise;
            ratio = Some(d.mean / prev.mean);
        }
        contracting &= ok;
        report.metric(format!("diff_k{k}"), d.mean);
        report.metric(format!("diff_stderr_k{k}"), d.stderr);
        report.cells.push(StudyCell {
            study: "convergence".into(),
            r: None,
            t: Some(study.t),
            k: Some(k),
            f_id: "paired_difference".into(),
            estimate: d.mean,
            stderr: Some(d.stderr),
            ratio,
            pass: ok,
        });
    }
    report.metric("contracting", contracting as u8 as f64);
    report.pass = contracting;
    Ok(report)
}
