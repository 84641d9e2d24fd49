//! One function per command; each turns a resolved configuration into
//! check reports.

use std::path::Path;
use std::sync::Arc;

use serde_json::json;
use stablelike::krylov::martingale::cosine_semigroup;
use stablelike::krylov::{
    default_p, exit_probability_check, krylov_ratio_study, krylov_suite, martingale_study, weak_convergence_study,
    ConvergenceStudy, ExitGrid, KrylovExperiment, MartingaleStudy, YSpec,
};
use stablelike::meyer::{meyer_construction_check, write_path, SimConfig, Simulator};
use stablelike::operator::{
    apply_l, apply_l0, apply_lk, double_integral_check, perturbation_gap_check, potential_bound_check,
    truncation_gap_bound, verify_poisson, BallIndicator, Cosine, Gaussian, GeneratorOptions, Integrand, JumpKernel,
    PotentialFunction, PotentialOptions, PotentialSetup, SharedTest,
};
use stablelike::stable::{
    check_resolvent_bounds, density_resolvent_check, sampler_law_check, RadiusGrid, ResolventTable,
};
use stablelike::{CheckReport, StableParams, StudyCell};

use crate::config::{Command, ExperimentConfig, StudyConfig};
use crate::error::CliError;
use crate::output::create_dir;

/// Half-width of the generator tables used by the martingale and
/// convergence studies.
const TABLE_HALF_WIDTH: f64 = 12.0;

/// A command with everything it needs, built before any output is written.
pub struct Plan {
    pub command: Command,
    pub config: ExperimentConfig,
    pub params: StableParams,
    pub kernel: Option<JumpKernel>,
}

impl Plan {
    pub fn new(command: Command, base: &ExperimentConfig, quick: bool) -> Result<Self, CliError> {
        let config = base.resolve(command, quick);
        let params = config.params.build()?;
        let kernel = config.kernel.as_ref().map(|k| k.build(params.d)).transpose()?;
        let plan = Self {
            command,
            config,
            params,
            kernel,
        };
        plan.precheck()?;
        Ok(plan)
    }

    fn study(&self) -> &StudyConfig {
        &self.config.study
    }

    fn kernel(&self) -> Result<&JumpKernel, CliError> {
        self.kernel
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("`{}` needs a kernel", self.command)))
    }

    fn x0(&self) -> Result<Vec<f64>, CliError> {
        let x0 = need(&self.study().x0, "x0")?;
        if x0.len() != self.params.d {
            return Err(CliError::Config(format!("study.x0 has {} coordinates for d = {}", x0.len(), self.params.d)));
        }
        Ok(x0)
    }

    /// Cheap checks that would otherwise surface only after output began.
    fn precheck(&self) -> Result<(), CliError> {
        let one_d = matches!(
            self.command,
            Command::Density | Command::MartingaleCheck | Command::ConvergenceStudy | Command::EstimatesCheck
        );
        if one_d && self.params.d != 1 {
            return Err(CliError::Config(format!("`{}` is implemented for d = 1", self.command)));
        }
        if matches!(self.command, Command::Simulate) && !self.kernel()?.x_independent {
            return Err(CliError::Config("`simulate` needs a kernel whose rate does not depend on x".into()));
        }
        if self.study().x0.is_some() {
            self.x0()?;
        }
        Ok(())
    }
}

fn need<T: Clone>(v: &Option<T>, key: &str) -> Result<T, CliError> {
    v.clone().ok_or_else(|| CliError::Config(format!("study.{key} is required")))
}

fn on_axis(x: f64, d: usize) -> Vec<f64> {
    let mut p = vec![0.0; d];
    p[0] = x;
    p
}

fn origin(d: usize) -> Vec<f64> {
    vec![0.0; d]
}

fn renamed(mut r: CheckReport, suffix: &str) -> CheckReport {
    r.check_name = format!("{}/{suffix}", r.check_name);
    r
}

/// Runs one command. `out` receives binary path dumps when asked for.
pub fn execute(plan: &Plan, out: Option<&Path>) -> Result<Vec<CheckReport>, CliError> {
    let s = plan.study();
    let p = &plan.params;
    let sim = &plan.config.sim;
    let reports = match plan.command {
        Command::Sample => vec![sampler_law_check(
            &need(&s.alphas, "alphas")?,
            &need(&s.xis, "xis")?,
            need(&s.samples, "samples")?,
            sim.seed,
        )?],
        Command::Density => vec![density_resolvent_check(p.alpha, p.lambda)?],
        Command::Resolvent => vec![check_resolvent_bounds(p, need(&s.radius_grid, "radius_grid")?)?],
        Command::OperatorEval => vec![operator_eval(plan)?],
        Command::PoissonCheck => poisson(plan)?,
        Command::EstimatesCheck => estimates(plan)?,
        Command::Simulate => simulate(plan, out)?,
        Command::KrylovStudy => vec![krylov(plan)?],
        Command::ExitStudy => {
            let grid = ExitGrid {
                radii: need(&s.radii, "radii")?,
                times: s.times.clone().unwrap_or_else(|| ExitGrid::standard(sim.dt).times),
            };
            vec![exit_probability_check(
                plan.kernel()?,
                p,
                sim,
                &plan.x0()?,
                &grid,
                need(&s.replicas, "replicas")?,
            )?]
        }
        Command::MartingaleCheck => martingale(plan)?,
        Command::ConvergenceStudy => vec![convergence(plan)?],
        Command::VerifyAll => return Err(CliError::Usage("verify-all runs through `run_all`".into())),
    };
    Ok(reports)
}

/// `ℒ₀f`, `ℒf` and `ℒ_k f` for a Gaussian at the study points, and the
/// eigenrelation `ℒ₀ cos = -A cos` as the pass criterion.
fn operator_eval(plan: &Plan) -> Result<CheckReport, CliError> {
    let s = plan.study();
    let p = &plan.params;
    let kernel = plan.kernel()?;
    let points = need(&s.points, "points")?;
    let ks = need(&s.truncation_k, "truncation_k")?;
    let sigma = s.sigmas.as_ref().and_then(|v| v.first().copied()).unwrap_or(1.0);
    let opts = GeneratorOptions::default().with_tolerance(1e-10);
    let f = Gaussian::new(&origin(p.d), sigma, 1.0);
    let cos = Cosine::new(&on_axis(1.0, p.d), 1.0, 0.0);

    let mut report = CheckReport::new("operator_eval");
    report.params = json!({ "stable": p, "kernel": kernel.describe(), "gaussian_sigma": sigma });
    report.grid_spec = json!({ "points": points, "k": ks });
    let mut worst: f64 = 0.0;
    let cell = |f_id: String, k: Option<u32>, x: f64, v: f64, pass: bool| StudyCell {
        study: "operator_eval".into(),
        r: None,
        t: Some(x),
        k,
        f_id,
        estimate: v,
        stderr: None,
        ratio: None,
        pass,
    };
    for &x in &points {
        let xv = on_axis(x, p.d);
        let l0 = apply_l0(&f, &xv, p, &opts)?;
        let l = apply_l(&f, &xv, kernel, p, &opts)?;
        report.metric(format!("l0_gaussian_x{x}"), l0);
        report.metric(format!("l_gaussian_x{x}"), l);
        report.cells.push(cell("l0_gaussian".into(), None, x, l0, l0.is_finite()));
        report.cells.push(cell("l_gaussian".into(), None, x, l, l.is_finite()));
        for &k in &ks {
            let lk = apply_lk(&f, &xv, kernel, p, k, &opts)?;
            report.metric(format!("lk_gaussian_k{k}_x{x}"), lk);
            report.cells.push(cell("lk_gaussian".into(), Some(k), x, lk, lk.is_finite()));
        }
        let lc = apply_l0(&cos, &xv, p, &opts)?;
        let err = (lc + p.symbol_constant * cos.value(&xv)).abs() / p.symbol_constant;
        worst = worst.max(err);
        report.metric(format!("l0_cos_x{x}"), lc);
        report.cells.push(cell("l0_cos".into(), None, x, lc, err <= 1e-6));
    }
    report.metric("cos_eigen_max_rel", worst);
    report.worst_ratio = Some(worst);
    report.pass = worst <= 1e-6 && report.cells.iter().all(|c| c.pass);
    Ok(report)
}

fn resolvent_table(p: &StableParams) -> Result<Arc<ResolventTable>, CliError> {
    Ok(Arc::new(ResolventTable::cached(p, RadiusGrid::default())?))
}

/// The Poisson identity for each Gaussian source, then the potential
/// values at the study points for an outside comparison.
fn poisson(plan: &Plan) -> Result<Vec<CheckReport>, CliError> {
    let s = plan.study();
    let p = &plan.params;
    let grid = need(&s.grid, "grid")?;
    let tols = need(&s.tolerances, "tolerances")?;
    let sigmas = need(&s.sigmas, "sigmas")?;
    let points = need(&s.points, "points")?;
    let mut reports = Vec::new();
    for &sigma in &sigmas {
        let g: SharedTest = Arc::new(Gaussian::new(&origin(p.d), sigma, 1.0));
        reports.push(renamed(verify_poisson(g, p, &grid, &tols)?, &format!("sigma{sigma}")));
    }
    let table = resolvent_table(p)?;
    let mut values = CheckReport::new("potential_values");
    values.params = json!({ "stable": p, "table": table.grid, "sources": "gaussian", "sigmas": sigmas });
    values.grid_spec = json!({ "points": points });
    for &sigma in &sigmas {
        let g: SharedTest = Arc::new(Gaussian::new(&origin(p.d), sigma, 1.0));
        let u = PotentialFunction::new(table.clone(), g, PotentialOptions::default())?;
        for &x in &points {
            let v = u.value(&on_axis(x, p.d));
            values.metric(format!("u_sigma{sigma}_x{x}"), v);
            values.cells.push(StudyCell {
                study: "potential_values".into(),
                r: None,
                t: Some(x),
                k: None,
                f_id: format!("sigma={sigma}"),
                estimate: v,
                stderr: None,
                ratio: None,
                pass: v.is_finite() && v > 0.0,
            });
        }
    }
    values.pass = values.cells.iter().all(|c| c.pass);
    reports.push(values);
    Ok(reports)
}

/// Perturbation gap and double integrals for the configured kernel and for
/// `n ≡ 1`, the truncation rate, and the potential bound on an indicator.
fn estimates(plan: &Plan) -> Result<Vec<CheckReport>, CliError> {
    let s = plan.study();
    let p = &plan.params;
    let kernel = plan.kernel()?;
    let unit = JumpKernel::stable();
    let grid = need(&s.grid, "grid")?;
    let x = need(&s.x, "x")?;
    let tol = need(&s.tolerances, "tolerances")?.first().copied().unwrap_or(1e-4);
    let sigma = s.sigmas.as_ref().and_then(|v| v.first().copied()).unwrap_or(0.5);
    let ks = need(&s.truncation_k, "truncation_k")?;
    let table = resolvent_table(p)?;
    let setup = PotentialSetup::new(table.clone());
    let source = Gaussian::new(&origin(p.d), sigma, 1.0);
    let g: SharedTest = Arc::new(source.clone());

    let mut reports = Vec::new();
    for k in [kernel, &unit] {
        let label = k.label.clone();
        reports.push(renamed(perturbation_gap_check(g.clone(), k, &grid, &setup)?, &label));
        reports.push(renamed(double_integral_check(&source, k, x, &table, tol)?, &label));
    }
    let f = Gaussian::new(&origin(p.d), 1.0, 1.0);
    let trunc = truncation_gap_bound(&f, kernel, p, &ks, &grid, &GeneratorOptions::default())?;
    reports.push(renamed(trunc, &kernel.label));
    let ind: Arc<dyn Integrand> = Arc::new(BallIndicator {
        center: origin(p.d),
        radius: 1.0,
        amp: 1.0,
    });
    reports.push(potential_bound_check(ind, &grid, &setup)?);
    Ok(reports)
}

fn simulate(plan: &Plan, out: Option<&Path>) -> Result<Vec<CheckReport>, CliError> {
    let s = plan.study();
    let kernel = plan.kernel()?;
    let sim = &plan.config.sim;
    let report = meyer_construction_check(kernel, &plan.params, sim, need(&s.replicas, "replicas")?)?;
    let dumps = s.dump_paths.unwrap_or(0);
    if let (Some(dir), true) = (out, dumps > 0) {
        let dir = dir.join("paths");
        create_dir(&dir)?;
        let simulator = Simulator::direct(kernel, &plan.params, sim)?;
        let x0 = plan.x0()?;
        for i in 0..dumps {
            let path = simulator.path(&x0, i as u64)?;
            let file = dir.join(format!("path_{i:05}.bin"));
            let mut bytes = Vec::new();
            write_path(&path, &mut bytes)?;
            crate::output::write_file(&file, &bytes)?;
        }
    }
    Ok(vec![report])
}

fn krylov(plan: &Plan) -> Result<CheckReport, CliError> {
    let s = plan.study();
    let p = &plan.params;
    let kernel = plan.kernel()?;
    let sim = &plan.config.sim;
    let x0 = plan.x0()?;
    let t = need(&s.t, "t")?;
    let exponent = s.p.unwrap_or_else(|| default_p(p.d, p.alpha, kernel.beta));
    let replicas = need(&s.replicas, "replicas")?;
    let experiments = need(&s.radii, "radii")?
        .iter()
        .map(|&r| {
            KrylovExperiment::new(&x0, r, t, exponent, krylov_suite(&x0, r, sim.seed), replicas, kernel, p, sim)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(krylov_ratio_study(&experiments)?)
}

/// The cosine under `n ≡ 1` against its closed-form semigroup, then a
/// Gaussian under the configured kernel.
fn martingale(plan: &Plan) -> Result<Vec<CheckReport>, CliError> {
    let s = plan.study();
    let p = &plan.params;
    let kernel = plan.kernel()?;
    let x0 = plan.x0()?;
    let t = need(&s.t, "t")?;
    let sim = SimConfig {
        k: need(&s.k, "k")?,
        ..plan.config.sim.clone()
    };
    let cos = Cosine::new(&on_axis(1.0, p.d), 1.0, 0.0);
    let exact = cosine_semigroup(p, &cos, &x0, t);
    let stable = MartingaleStudy {
        x0: x0.clone(),
        t,
        dts: need(&s.dts, "dts")?,
        replicas: need(&s.replicas, "replicas")?,
        table_half_width: TABLE_HALF_WIDTH,
    };
    let first = martingale_study(&JumpKernel::stable(), p, &sim, Arc::new(cos), &stable, Some(exact))?;
    let perturbed = MartingaleStudy {
        dts: need(&s.perturbed_dts, "perturbed_dts")?,
        replicas: need(&s.perturbed_replicas, "perturbed_replicas")?,
        ..stable
    };
    let gauss: SharedTest = Arc::new(Gaussian::new(&origin(p.d), 1.0, 1.0));
    let second = martingale_study(kernel, p, &sim, gauss, &perturbed, None)?;
    Ok(vec![
        renamed(first, "cos_stable"),
        renamed(second, &format!("gaussian_{}", kernel.label)),
    ])
}

fn convergence(plan: &Plan) -> Result<CheckReport, CliError> {
    let s = plan.study();
    let t = need(&s.t, "t")?;
    let sim = SimConfig {
        dt: need(&s.dt, "dt")?,
        ..plan.config.sim.clone()
    };
    sim.validate()?;
    let study = ConvergenceStudy {
        x0: plan.x0()?,
        t,
        k_list: need(&s.k_list, "k_list")?,
        replicas: need(&s.replicas, "replicas")?,
        y: YSpec::standard(t),
        table_half_width: TABLE_HALF_WIDTH,
    };
    let f: SharedTest = Arc::new(Gaussian::new(&origin(plan.params.d), 1.0, 1.0));
    Ok(weak_convergence_study(plan.kernel()?, &plan.params, &sim, f, &study)?)
}
