//! The excess jump rate `N(x) = ∫_{|h|>1/k} n(x,h) |h|^{-d-α} dh` and the
//! insertion-jump sampler.

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::operator::JumpKernel;
use crate::quadrature::GaussKronrod;
use crate::rng::SeedTree;
use crate::sphere::{sample_direction, Directions};
use crate::stable::StableParams;
use crate::table::{AdaptiveTable, TableOptions};

/// Proposal cap of the rejection sampler.
pub const MAX_REJECTIONS: usize = 1_000_000;

fn check(params: &StableParams, k: u32, x: &[f64]) -> Result<()> {
    if k == 0 {
        return Err(Error::param("k", "truncation level must be at least 1"));
    }
    if x.len() != params.d {
        return Err(Error::Contract(format!("point of dimension {} for d = {}", x.len(), params.d)));
    }
    Ok(())
}

/// `N(x)` by quadrature in `v = ρ^{-α}`, which maps `|h| > 1/k` onto the
/// bounded interval `(0, k^α)` with integrand `n(x, v^{-1/α}θ)/α`.
pub fn excess_rate(kernel: &JumpKernel, params: &StableParams, k: u32, x: &[f64]) -> Result<f64> {
    check(params, k, x)?;
    let r = 1.0 / k as f64;
    if kernel.unit {
        return Ok(params.tail_mass(r));
    }
    let a = params.alpha;
    let top = r.powf(-a);
    let mut pts = vec![0.0, top];
    pts.extend(kernel.h_breaks.iter().filter(|&&b| b > r).map(|b| b.powf(-a)));
    pts.sort_by(f64::total_cmp);
    let gk = GaussKronrod::new(1e-13 * top, 1e-11).with_max_intervals(2000);
    let d = params.d;
    let mut h = [0.0; 3];
    let mut total = 0.0;
    for (theta, w) in Directions::new(d, 24)?.iter() {
        let res = gk.integrate_with_breaks(
            |v: f64| {
                let rho = v.powf(-1.0 / a);
                for i in 0..d {
                    h[i] = rho * theta[i];
                }
                kernel.eval(x, &h[..d])
            },
            &pts,
        )?;
        total += w * res.value / a;
    }
    Ok(total)
}

/// One draw from `n(x,h)|h|^{-d-α}/N(x)` on `|h| > 1/k`, written into `out`.
/// Proposals follow the truncated stable jump law (Pareto radius, uniform
/// direction) and are accepted with probability `n(x,h)/(1+K)`.
pub fn sample_insertion_jump<R: Rng + ?Sized>(
    kernel: &JumpKernel,
    params: &StableParams,
    k: u32,
    x: &[f64],
    rng: &mut R,
    out: &mut [f64],
) -> Result<()> {
    check(params, k, x)?;
    let d = params.d;
    let r = 1.0 / k as f64;
    let upper = kernel.upper();
    for _ in 0..MAX_REJECTIONS {
        let u = 1.0 - rng.random::<f64>();
        let rho = r * u.powf(-1.0 / params.alpha);
        sample_direction(d, rng, out);
        for v in out.iter_mut().take(d) {
            *v *= rho;
        }
        if kernel.unit || rng.random::<f64>() * upper < kernel.eval(x, &out[..d]) {
            return Ok(());
        }
    }
    Err(Error::Sampler(format!(
        "insertion jump rejected {MAX_REJECTIONS} times at x = {x:?}; kappa/(1+K) is too small"
    )))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
enum Field {
    Constant(f64),
    /// Tabulated along `x₁` on the simulation box.
    Table(AdaptiveTable),
    Direct,
}

/// `N` as the simulator consumes it: a constant, a validated table along
/// `x₁` with direct quadrature outside the box, or quadrature at every call.
#[derive(Clone, Debug)]
pub struct ExcessRate {
    kernel: JumpKernel,
    params: StableParams,
    k: u32,
    field: Field,
    /// Worst relative interpolation error found by validation.
    pub validation_error: Option<f64>,
}

impl ExcessRate {
    /// Constant for x-independent kernels, quadrature per call otherwise.
    pub fn direct(kernel: &JumpKernel, params: &StableParams, k: u32) -> Result<Self> {
        let field = if kernel.x_independent {
            Field::Constant(excess_rate(kernel, params, k, &vec![0.0; params.d])?)
        } else {
            Field::Direct
        };
        Ok(Self {
            kernel: kernel.clone(),
            params: *params,
            k,
            field,
            validation_error: None,
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn at(&self, x: &[f64]) -> Result<f64> {
        match &self.field {
            Field::Constant(v) => Ok(*v),
            Field::Table(t) => match t.get(x[0]) {
                Some(v) => Ok(v),
                None => excess_rate(&self.kernel, &self.params, self.k, x),
            },
            Field::Direct => excess_rate(&self.kernel, &self.params, self.k, x),
        }
    }

    /// Upper bound on `N` used by the step-size guard.
    pub fn sup(&self) -> f64 {
        match &self.field {
            Field::Constant(v) => *v,
            _ => self.kernel.upper() * self.params.tail_mass(1.0 / self.k as f64),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.field, Field::Constant(_))
    }

    pub fn table(&self) -> Option<&AdaptiveTable> {
        match &self.field {
            Field::Table(t) => Some(t),
            _ => None,
        }
    }
}

/// Interpolation error allowed by validation, relative to `min N`.
pub const CACHE_TOLERANCE: f64 = 0.01;

/// Tabulates `N` along `x₁ ∈ [lo, hi]` and validates it against direct
/// quadrature at 100 random points; a table missing `1%` of `min N` is
/// refused. Tables are stored under `STABLELIKE_CACHE_DIR` when set.
pub fn cache_excess_rate(kernel: &JumpKernel, params: &StableParams, k: u32, lo: f64, hi: f64) -> Result<ExcessRate> {
    let mut rate = ExcessRate::direct(kernel, params, k)?;
    if rate.is_constant() {
        rate.validation_error = Some(0.0);
        return Ok(rate);
    }
    if !(kernel.x_axis_only || params.d == 1) {
        return Err(Error::Contract(format!(
            "kernel `{}` depends on more than x₁; only direct evaluation is available",
            kernel.label
        )));
    }
    let floor = kernel.kappa * params.tail_mass(1.0 / k as f64);
    let along = |s: f64| {
        let mut x = vec![0.0; params.d];
        x[0] = s;
        excess_rate(kernel, params, k, &x)
    };
    let path = cache_path(kernel, params, k, lo, hi);
    let stored = path
        .as_ref()
        .and_then(|p| std::fs::read_to_string(p).ok())
        .and_then(|text| serde_json::from_str::<AdaptiveTable>(&text).ok())
        .filter(|t| t.lo() == lo && t.hi() == hi);
    let table = match stored {
        Some(t) => t,
        None => {
            let opts = TableOptions {
                abs_tol: 1e-3 * floor,
                ..TableOptions::default()
            };
            AdaptiveTable::build(along, lo, hi, opts)?
        }
    };
    let min_n = table.min_value();
    let mut rng = SeedTree::new(k as u64).named("excess-rate-validation").stream();
    let worst = table.worst_error(along, 100, &mut rng)? / min_n;
    if !(worst <= CACHE_TOLERANCE) {
        return Err(Error::Validation(format!(
            "excess-rate table misses direct quadrature by {:.3}% of min N",
            100.0 * worst
        )));
    }
    if let Some(p) = path {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&p, serde_json::to_string(&table)?)?;
    }
    rate.field = Field::Table(table);
    rate.validation_error = Some(worst);
    Ok(rate)
}

fn cache_path(kernel: &JumpKernel, params: &StableParams, k: u32, lo: f64, hi: f64) -> Option<PathBuf> {
    let dir = std::env::var_os("STABLELIKE_CACHE_DIR")?;
    let key = serde_json::json!({
        "kernel": kernel.describe(),
        "params": params,
        "k": k,
        "box": [lo, hi],
        "tol": CACHE_TOLERANCE,
    });
    let digest = hex::encode(Sha256::digest(key.to_string().as_bytes()));
    Some(PathBuf::from(dir).join(format!("excess_rate_{}.json", &digest[..16])))
}
