//! The martingale identity `E[f(X_t) - f(X_0) - ∫₀ᵗ ℒ_k f(X_s) ds] = 0`
//! along simulated paths, and its time-step bias.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::meyer::{SimConfig, Simulator};
use crate::operator::function::{Cosine, SharedTest, TestFunction};
use crate::operator::{GeneratorOptions, JumpKernel, Operator};
use crate::report::{CheckReport, StudyCell};
use crate::stable::StableParams;
use crate::stats::{loglog_fit, pooled_stderr, MCEstimate};
use crate::table::{AdaptiveTable, TableOptions};

/// Quadrature settings for generator fields: an absolute floor of `1e-7`
/// of the norm scale, well under the table tolerance, so evaluation near
/// zeros of `ℒ_k f` does not chase a vanishing relative target.
pub fn field_options() -> GeneratorOptions {
    GeneratorOptions {
        rel_tol: 1e-8,
        abs_tol: 1e-7,
        ..GeneratorOptions::default()
    }
}

/// `x ↦ (ℒ_k f)(x)`, tabulated along a line in d = 1 and evaluated by
/// quadrature elsewhere.
pub struct GeneratorField {
    f: SharedTest,
    op: Operator,
    params: StableParams,
    opts: GeneratorOptions,
    table: Option<AdaptiveTable>,
}

impl GeneratorField {
    pub fn direct(f: SharedTest, op: Operator, params: &StableParams, opts: GeneratorOptions) -> Self {
        Self {
            f,
            op,
            params: *params,
            opts,
            table: None,
        }
    }

    /// Linear-interpolation table on `[lo, hi]` with error below `1e-5` of
    /// `‖f‖ + ‖∇f‖ + ‖∇²f‖`; jumps of `ℒ_k f` are isolated by bisection.
    pub fn tabulated(
        f: SharedTest,
        op: Operator,
        params: &StableParams,
        opts: GeneratorOptions,
        lo: f64,
        hi: f64,
    ) -> Result<Self> {
        if params.d != 1 {
            return Err(Error::Contract("generator tables are one-dimensional".into()));
        }
        let mut field = Self::direct(f, op, params, opts);
        let scale = field.f.sup_norm() + field.f.grad_sup_norm() + field.f.hess_sup_norm();
        if scale == 0.0 {
            field.table = Some(AdaptiveTable::constant(lo, hi, 0.0));
            return Ok(field);
        }
        let table_opts = TableOptions {
            initial: 129,
            abs_tol: 1e-5 * scale,
            ..TableOptions::default()
        };
        let table = AdaptiveTable::build(|x| field.eval(&[x]), lo, hi, table_opts)?;
        field.table = Some(table);
        Ok(field)
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        self.op.apply(self.f.as_ref(), x, &self.params, &self.opts)
    }

    pub fn at(&self, x: &[f64]) -> Result<f64> {
        match self.table.as_ref().and_then(|t| t.get(x[0])) {
            Some(v) => Ok(v),
            None => self.eval(x),
        }
    }

    pub fn table(&self) -> Option<&AdaptiveTable> {
        self.table.as_ref()
    }
}

/// Per-replica `(f(X_t) - f(X_0) - Σ ℒ_k f(X_{s_i}) Δs, f(X_t))`.
pub fn residual_samples(
    sim: &Simulator,
    f: &dyn TestFunction,
    field: &GeneratorField,
    x0: &[f64],
    replicas: usize,
) -> Result<Vec<(f64, f64)>> {
    sim.replicas(
        x0,
        replicas,
        |_| false,
        |_, path| {
            let n = path.len();
            let mut integral = 0.0;
            for i in 0..n - 1 {
                integral += field.at(path.state(i))? * (path.times[i + 1] - path.times[i]);
            }
            let end = f.value(path.last_state());
            Ok((end - f.value(path.state(0)) - integral, end))
        },
    )
}

/// Generator used along paths of the `ℒ_k` process.
pub fn truncated_operator(kernel: &JumpKernel, k: u32) -> Operator {
    if kernel.unit {
        Operator::Stable
    } else {
        Operator::Truncated(kernel.clone(), k)
    }
}

/// Mean martingale residual over `replicas` paths of length `t` from `x0`.
pub fn martingale_residual(
    kernel: &JumpKernel,
    params: &StableParams,
    sim: &SimConfig,
    f: SharedTest,
    x0: &[f64],
    t: f64,
    replicas: usize,
) -> Result<MCEstimate> {
    let cfg = SimConfig { horizon: t, ..sim.clone() };
    let c = x0[0];
    let simulator = Simulator::on_box(kernel, params, &cfg, c - 12.0, c + 12.0)?;
    let op = truncated_operator(kernel, cfg.k);
    let opts = field_options();
    let field = if params.d == 1 {
        GeneratorField::tabulated(f.clone(), op, params, opts, c - 12.0, c + 12.0)?
    } else {
        GeneratorField::direct(f.clone(), op, params, opts)
    };
    let rows = residual_samples(&simulator, f.as_ref(), &field, x0, replicas)?;
    let samples: Vec<f64> = rows.iter().map(|r| r.0).collect();
    Ok(MCEstimate::from_samples(&samples, cfg.seed))
}

/// `E cos(ξ·X_t + φ)` for the stable process started at `x0`.
pub fn cosine_semigroup(params: &StableParams, f: &Cosine, x0: &[f64], t: f64) -> f64 {
    let k2: f64 = f.wavevector.iter().map(|v| v * v).sum();
    let phase: f64 = f.wavevector.iter().zip(x0).map(|(a, b)| a * b).sum::<f64>() + f.phase;
    f.amp * (-t * params.symbol_constant * k2.powf(0.5 * params.alpha)).exp() * phase.cos()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MartingaleStudy {
    pub x0: Vec<f64>,
    pub t: f64,
    /// Decreasing time steps, each half the previous.
    pub dts: Vec<f64>,
    pub replicas: usize,
    /// Half-width of the interval about `x0` on which `ℒ_k f` is tabulated.
    pub table_half_width: f64,
}

impl MartingaleStudy {
    pub fn standard(d: usize) -> Self {
        Self {
            x0: vec![0.0; d],
            t: 1.0,
            dts: vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            replicas: 10_000,
            table_half_width: 12.0,
        }
    }
}

/// Residuals at each time step of a halving sequence.
///
/// The bias budget is `c_bias · dt` with `c_bias` the least-squares slope
/// through the origin of `|mean|` against `dt`. Passes when every residual
/// lies within `3σ + c_bias·dt`, each halving shrinks a significant residual
/// by a factor in `[1.4, 2.8]` (or keeps an insignificant one insignificant),
/// and, when `semigroup` gives `E f(X_t)`, the terminal means match it
/// within `3σ`.
pub fn martingale_study(
    kernel: &JumpKernel,
    params: &StableParams,
    sim: &SimConfig,
    f: SharedTest,
    study: &MartingaleStudy,
    semigroup: Option<f64>,
) -> Result<CheckReport> {
    if study.dts.is_empty() || study.dts.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::param("dts", "need a decreasing list of time steps"));
    }
    let c = study.x0[0];
    let (lo, hi) = (c - study.table_half_width, c + study.table_half_width);
    let op = truncated_operator(kernel, sim.k);
    let opts = field_options();
    let field = if params.d == 1 {
        GeneratorField::tabulated(f.clone(), op, params, opts, lo, hi)?
    } else {
        GeneratorField::direct(f.clone(), op, params, opts)
    };
    let mut residuals = Vec::new();
    let mut terminals = Vec::new();
    for &dt in &study.dts {
        let cfg = SimConfig {
            dt,
            horizon: study.t,
            ..sim.clone()
        };
        let simulator = Simulator::on_box(kernel, params, &cfg, lo, hi)?;
        let rows = residual_samples(&simulator, f.as_ref(), &field, &study.x0, study.replicas)?;
        let r: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let e: Vec<f64> = rows.iter().map(|r| r.1).collect();
        residuals.push(MCEstimate::from_samples(&r, cfg.seed));
        terminals.push(MCEstimate::from_samples(&e, cfg.seed));
    }
    let num: f64 = residuals.iter().zip(&study.dts).map(|(m, dt)| m.mean.abs() * dt).sum();
    let den: f64 = study.dts.iter().map(|dt| dt * dt).sum();
    let c_bias = num / den;

    let mut report = CheckReport::new("martingale_residual");
    report.params = json!({ "stable": params, "kernel": kernel.describe(), "sim": sim, "k": sim.k });
    report.grid_spec = json!({ "x0": study.x0, "t": study.t, "dts": study.dts, "replicas": study.replicas });
    let mut within = true;
    let mut semigroup_ok = true;
    for (i, &dt) in study.dts.iter().enumerate() {
        let m = residuals[i];
        let ok = m.mean.abs() <= 3.0 * m.stderr + c_bias * dt;
        within &= ok;
        if let Some(v) = semigroup {
            let tm = terminals[i];
            semigroup_ok &= tm.within(v, 3.0, 0.0);
            report.metric(format!("terminal_dt{dt}"), tm.mean);
        }
        report.metric(format!("residual_dt{dt}"), m.mean);
        report.metric(format!("stderr_dt{dt}"), m.stderr);
        report.cells.push(StudyCell {
            study: "martingale".into(),
            r: None,
            t: Some(study.t),
            k: Some(sim.k),
            f_id: format!("dt={dt}"),
            estimate: m.mean,
            stderr: Some(m.stderr),
            ratio: Some(m.mean / dt),
            pass: ok,
        });
    }
    let mut halving = true;
    for pair in residuals.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.mean.abs() > 3.0 * a.stderr && b.mean.abs() > 3.0 * b.stderr {
            let ratio = a.mean / b.mean;
            halving &= (1.4..=2.8).contains(&ratio);
        } else {
            halving &= b.mean.abs() <= a.mean.abs() + 3.0 * pooled_stderr(&a, &b);
        }
    }
    if residuals.iter().all(|m| m.mean.abs() > 0.0) && residuals.len() > 1 {
        let means: Vec<f64> = residuals.iter().map(|m| m.mean.abs()).collect();
        report.metric("dt_slope", loglog_fit(&study.dts, &means).0);
    }
    if let Some(v) = semigroup {
        report.metric("semigroup_value", v);
        report.metric("semigroup_match", semigroup_ok as u8 as f64);
    }
    report.metric("c_bias", c_bias);
    report.metric("within_budget", within as u8 as f64);
    report.metric("linear_halving", halving as u8 as f64);
    report.fitted_constant = Some(c_bias);
    report.pass = within && halving && semigroup_ok;
    Ok(report)
}
