//! Experiment configuration: TOML file, `--set` overrides, and per-command
//! defaults.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stablelike::meyer::SimConfig;
use stablelike::operator::LineGrid;
use stablelike::stable::RadiusGrid;
use stablelike::StableParams;

use crate::error::CliError;
use crate::kernel_spec::KernelConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Sample,
    Density,
    Resolvent,
    OperatorEval,
    PoissonCheck,
    EstimatesCheck,
    Simulate,
    KrylovStudy,
    ExitStudy,
    MartingaleCheck,
    ConvergenceStudy,
    VerifyAll,
}

impl Command {
    /// Every check suite, in the order `verify-all` runs them.
    pub const SUITES: [Command; 11] = [
        Command::Sample,
        Command::Density,
        Command::Resolvent,
        Command::OperatorEval,
        Command::PoissonCheck,
        Command::EstimatesCheck,
        Command::Simulate,
        Command::MartingaleCheck,
        Command::KrylovStudy,
        Command::ExitStudy,
        Command::ConvergenceStudy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Density => "density",
            Command::Resolvent => "resolvent",
            Command::OperatorEval => "operator-eval",
            Command::PoissonCheck => "poisson-check",
            Command::EstimatesCheck => "estimates-check",
            Command::Simulate => "simulate",
            Command::KrylovStudy => "krylov-study",
            Command::ExitStudy => "exit-study",
            Command::MartingaleCheck => "martingale-check",
            Command::ConvergenceStudy => "convergence-study",
            Command::VerifyAll => "verify-all",
        }
    }

    /// Kernel used when the config has no `[kernel]` table.
    pub fn default_kernel(&self) -> Option<&'static str> {
        match self {
            Command::Sample | Command::Density | Command::Resolvent | Command::PoissonCheck | Command::VerifyAll => None,
            Command::ConvergenceStudy => Some("discontinuous_in_x"),
            _ => Some("holder_bump"),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub d: usize,
    pub alpha: f64,
    pub lambda: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            d: 1,
            alpha: 1.5,
            lambda: 1.0,
        }
    }
}

impl ParamsConfig {
    pub fn build(&self) -> Result<StableParams, CliError> {
        Ok(StableParams::new(self.d, self.alpha, self.lambda)?)
    }
}

/// Study knobs. Unset fields take the command's defaults (see
/// [`StudyConfig::defaults`]); the resolved values are echoed in every
/// output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xis: Option<Vec<f64>>,
    /// Evaluation points on the first axis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius_grid: Option<RadiusGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<LineGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Vec<f64>>,
    /// Widths of the Gaussian sources.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_k: Option<Vec<u32>>,
    /// Point of the double-integral check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dts: Option<Vec<f64>>,
    /// Time steps of the perturbed-kernel martingale run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbed_dts: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbed_replicas: Option<usize>,
    /// Truncation level for the martingale runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_list: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Number of simulated paths written as binary records.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_paths: Option<usize>,
}

macro_rules! fill {
    ($dst:ident, $src:ident, $($field:ident),*) => {
        $( if $dst.$field.is_none() { $dst.$field = $src.$field.clone(); } )*
    };
}

impl StudyConfig {
    /// Defaults for `command`; `quick` trims sample and replica counts.
    pub fn defaults(command: Command, quick: bool, d: usize) -> Self {
        let n = |full: usize, fast: usize| Some(if quick { fast } else { full });
        let mut s = Self::default();
        match command {
            Command::Sample => {
                s.samples = n(200_000, 20_000);
                s.alphas = Some(vec![0.5, 1.0, 1.5]);
                s.xis = Some(vec![0.5, 1.0, 2.0, 4.0]);
            }
            Command::Density => {}
            Command::Resolvent => {
                s.radius_grid = Some(RadiusGrid {
                    rho_min: 0.05,
                    rho_max: 10.0,
                    points: if quick { 21 } else { 41 },
                });
            }
            Command::OperatorEval => {
                s.points = Some(vec![0.0, 0.5, 1.0, 2.0]);
                s.truncation_k = Some(vec![8]);
            }
            Command::PoissonCheck => {
                s.grid = Some(LineGrid {
                    lo: -3.0,
                    hi: 3.0,
                    points: if quick { 7 } else { 13 },
                });
                s.tolerances = Some(if quick { vec![1e-4] } else { vec![1e-4, 1e-6] });
                s.sigmas = Some(vec![0.5, 1.0]);
                s.points = Some(vec![0.0, 0.4, 1.3, 3.0]);
            }
            Command::EstimatesCheck => {
                s.grid = Some(LineGrid {
                    lo: -2.0,
                    hi: 2.0,
                    points: if quick { 5 } else { 9 },
                });
                s.truncation_k = Some(vec![4, 8, 16, 32]);
                s.x = Some(0.3);
                s.tolerances = Some(vec![1e-4]);
            }
            Command::Simulate => {
                s.replicas = n(10_000, 2_000);
                s.dump_paths = Some(0);
            }
            Command::KrylovStudy => {
                s.replicas = n(4_000, 500);
                s.radii = Some(vec![0.5, 0.25, 0.125]);
                s.t = Some(1.0);
            }
            Command::ExitStudy => {
                s.replicas = n(4_000, 1_000);
                s.radii = Some(vec![0.5, 0.25, 0.125]);
            }
            Command::MartingaleCheck => {
                s.replicas = n(200_000, 10_000);
                s.perturbed_replicas = n(100_000, 10_000);
                s.dts = Some(vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]);
                s.perturbed_dts = Some(vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]);
                s.k = Some(1);
                s.t = Some(1.0);
            }
            Command::ConvergenceStudy => {
                s.replicas = n(4_000, 500);
                s.k_list = Some(vec![4, 8, 16]);
                s.dt = Some(5e-4);
                s.t = Some(0.5);
            }
            Command::VerifyAll => {}
        }
        if matches!(
            command,
            Command::Simulate
                | Command::KrylovStudy
                | Command::ExitStudy
                | Command::MartingaleCheck
                | Command::ConvergenceStudy
        ) {
            s.x0 = Some(vec![0.0; d]);
        }
        s
    }

    /// Fills unset fields from `defaults`.
    pub fn resolved(&self, defaults: &Self) -> Self {
        let mut out = self.clone();
        fill!(
            out,
            defaults,
            samples,
            alphas,
            xis,
            points,
            radius_grid,
            grid,
            tolerances,
            sigmas,
            truncation_k,
            x,
            replicas,
            radii,
            times,
            t,
            p,
            dts,
            perturbed_dts,
            perturbed_replicas,
            k,
            dt,
            k_list,
            x0,
            dump_paths
        );
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub params: ParamsConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    pub sim: SimConfig,
    pub study: StudyConfig,
}

impl ExperimentConfig {
    /// Parses TOML text after applying `key=value` overrides, where `key` is
    /// a dotted path such as `sim.dt` and `value` is TOML (bare words are
    /// taken as strings).
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = text.parse().map_err(|e| CliError::Config(format!("{e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p.display().to_string(), e))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params.build()?;
        self.sim.validate()?;
        if let Some(k) = &self.kernel {
            k.build(self.params.d)?;
        }
        Ok(())
    }

    /// The configuration a command actually runs with.
    pub fn resolve(&self, command: Command, quick: bool) -> Self {
        let defaults = StudyConfig::defaults(command, quick, self.params.d);
        let kernel = self
            .kernel
            .clone()
            .or_else(|| command.default_kernel().map(KernelConfig::preset));
        Self {
            params: self.params,
            kernel,
            sim: self.sim.clone(),
            study: self.study.resolved(&defaults),
        }
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("`--set {assignment}` is not of the form key=value")))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("bad key `{key}`")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{part}` in `{key}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}
