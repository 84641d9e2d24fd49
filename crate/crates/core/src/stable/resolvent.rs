//! The λ-resolvent kernel `r^λ(x) = ∫₀^∞ e^{-λt} p_t(0,x) dt` and its radial
//! derivatives, plus a cached interpolation table.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::density::StandardDensity;
use super::params::StableParams;
use crate::error::{Error, Result};
use crate::quadrature::GaussKronrod;
use crate::sphere::norm;

pub const DEFAULT_FLOOR: f64 = 1e-4;

/// Value and first two radial derivatives of a radial function at one radius.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RadialJet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl RadialJet {
    /// Cartesian gradient of the radial function at `x`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let rho = norm(x);
        x.iter().map(|v| self.d1 * v / rho).collect()
    }

    /// Cartesian Hessian `r'' x̂x̂ᵀ + (r'/ρ)(I - x̂x̂ᵀ)` at `x`, row-major.
    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let rho = norm(x);
        let d = x.len();
        let mut h = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                let uu = x[i] * x[j] / (rho * rho);
                let id = if i == j { 1.0 } else { 0.0 };
                h[i][j] = self.d2 * uu + self.d1 / rho * (id - uu);
            }
        }
        h
    }
}

/// Direct evaluation of the resolvent by a one-dimensional time integral.
///
/// With the symbol constant `A`, `μ = λ/A` and the substitution
/// `tA = ρ^α e^s`, the j-th radial derivative is
/// `∂_ρ^j r^λ(ρ) = A^{-1} ρ^{α-d-j} ∫ exp(-μ ρ^α e^s) e^{s(1-(d+j)/α)} q^{(j)}(e^{-s/α}) ds`
/// where `q` is the standardized density profile. The integrand peaks near
/// `s = 0`, i.e. `tA ≈ ρ^α`, decays like `e^{2s}` as `s → -∞` and
/// double-exponentially as `s → ∞`.
#[derive(Clone, Copy, Debug)]
pub struct Resolvent {
    pub params: StableParams,
    density: StandardDensity,
    pub floor: f64,
    pub rel_tol: f64,
}

impl Resolvent {
    pub fn new(params: &StableParams) -> Result<Self> {
        Ok(Self {
            params: *params,
            density: StandardDensity::new(params.d, params.alpha)?,
            floor: DEFAULT_FLOOR,
            rel_tol: 1e-9,
        })
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn density(&self) -> &StandardDensity {
        &self.density
    }

    /// `∂_ρ^order r^λ(ρ)` for `order ∈ {0,1,2}`.
    pub fn radial(&self, rho: f64, order: usize) -> Result<f64> {
        if !(rho >= self.floor) {
            return Err(Error::Domain(format!(
                "resolvent evaluated at |x| = {rho:e}, below the floor {:e}",
                self.floor
            )));
        }
        let p = &self.params;
        let (alpha, d) = (p.alpha, p.d as f64);
        let mu = p.lambda / p.symbol_constant;
        let c = mu * rho.powf(alpha);
        let expo = 1.0 - (d + order as f64) / alpha;
        let s_hi = (40.0 / c).ln();
        let s_lo = (-18.0f64).min(s_hi - 25.0);
        let mut failure = None;
        let integrand = |s: f64| {
            let q = match self.density.radial((-s / alpha).exp(), order) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            };
            (-c * s.exp() + expo * s).exp() * q
        };
        let mut breaks = vec![s_lo];
        for b in [-6.0, 0.0, 6.0] {
            if b > s_lo && b < s_hi {
                breaks.push(b);
            }
        }
        breaks.push(s_hi);
        let gk = GaussKronrod::new(1e-300, self.rel_tol).lenient();
        let res = gk.integrate_with_breaks(integrand, &breaks)?;
        if let Some(e) = failure {
            return Err(e);
        }
        if res.error > 1e-7 * res.value.abs() {
            return Err(Error::Numerical {
                context: "resolvent time integral".into(),
                estimate: res.value,
                error: res.error,
                requested: self.rel_tol * res.value.abs(),
                detail: format!("|x| = {rho}, order {order}"),
            });
        }
        Ok(rho.powf(alpha - d - order as f64) * res.value / p.symbol_constant)
    }

    pub fn jet(&self, rho: f64) -> Result<RadialJet> {
        Ok(RadialJet {
            value: self.radial(rho, 0)?,
            d1: self.radial(rho, 1)?,
            d2: self.radial(rho, 2)?,
        })
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.radial(norm(x), 0)
    }

    /// Cartesian gradient and Hessian at `x ≠ 0`.
    pub fn derivatives(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        self.check_point(x)?;
        let rho = norm(x);
        let jet = RadialJet {
            value: 0.0,
            d1: self.radial(rho, 1)?,
            d2: self.radial(rho, 2)?,
        };
        Ok((jet.gradient(x), jet.hessian(x)))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.params.d {
            return Err(Error::Contract(format!(
                "point has dimension {} not {}",
                x.len(),
                self.params.d
            )));
        }
        Ok(())
    }
}

/// Log-spaced radius grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusGrid {
    pub rho_min: f64,
    pub rho_max: f64,
    pub points: usize,
}

impl RadiusGrid {
    pub fn radii(&self) -> Vec<f64> {
        let (a, b) = (self.rho_min.ln(), self.rho_max.ln());
        (0..self.points)
            .map(|i| (a + (b - a) * i as f64 / (self.points - 1) as f64).exp())
            .collect()
    }

    /// Grid with twice the resolution (every old node kept).
    pub fn refined(&self) -> Self {
        Self {
            points: 2 * self.points - 1,
            ..*self
        }
    }

    /// Default range with the resolution scaled so the interpolation error
    /// (fourth order in the spacing) is about `tol`; 225 points at 1e-6.
    pub fn for_tolerance(tol: f64) -> Self {
        let base = Self::default();
        let points = (224.0 * (tol / 1e-6).powf(-0.25)).ceil().clamp(16.0, 4096.0) as usize + 1;
        Self { points, ..base }
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for r in self.radii() {
            h.update(r.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

impl Default for RadiusGrid {
    fn default() -> Self {
        Self {
            rho_min: 1e-4,
            rho_max: 1e3,
            points: 225,
        }
    }
}

pub const TABLE_SCHEMA_VERSION: u32 = 1;

/// Resolvent and radial derivatives tabulated on a log-spaced grid.
///
/// Between nodes, `ln r` and `ln(-r')` are cubic Hermite interpolants in
/// `ln ρ` (their slopes are known exactly from the next derivative), and
/// `ρ² r''/r` is a Catmull–Rom spline. Outside the grid both ends are
/// continued as power laws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventTable {
    pub schema_version: u32,
    pub params: StableParams,
    pub grid: RadiusGrid,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl ResolventTable {
    pub fn build(params: &StableParams, grid: RadiusGrid) -> Result<Self> {
        if grid.points < 4 || !(grid.rho_min > 0.0 && grid.rho_max > grid.rho_min) {
            return Err(Error::param("grid", "need at least 4 points on 0 < rho_min < rho_max"));
        }
        let res = Resolvent::new(params)?.with_floor(grid.rho_min.min(DEFAULT_FLOOR));
        let radii = grid.radii();
        let jets: Vec<RadialJet> = radii.par_iter().map(|&r| res.jet(r)).collect::<Result<_>>()?;
        let table = Self {
            schema_version: TABLE_SCHEMA_VERSION,
            params: *params,
            grid,
            values: jets.iter().map(|j| j.value).collect(),
            grad: jets.iter().map(|j| j.d1).collect(),
            hess: jets.iter().map(|j| j.d2).collect(),
            radii,
        };
        table.validate()?;
        Ok(table)
    }

    /// Loads from `STABLELIKE_CACHE_DIR` when a matching table exists,
    /// otherwise builds and (if the variable is set) stores it.
    pub fn cached(params: &StableParams, grid: RadiusGrid) -> Result<Self> {
        let Some(path) = Self::cache_path(params, &grid) else {
            return Self::build(params, grid);
        };
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(t) = serde_json::from_str::<Self>(&text) {
                if t.schema_version == TABLE_SCHEMA_VERSION && t.params == *params && t.grid == grid {
                    return Ok(t);
                }
            }
        }
        let t = Self::build(params, grid)?;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, serde_json::to_string(&t)?)?;
        Ok(t)
    }

    pub fn cache_path(params: &StableParams, grid: &RadiusGrid) -> Option<PathBuf> {
        let dir = std::env::var_os("STABLELIKE_CACHE_DIR")?;
        let name = format!(
            "resolvent_d{}_a{}_l{}_{}.json",
            params.d,
            params.alpha,
            params.lambda,
            &grid.hash()[..16]
        );
        Some(PathBuf::from(dir).join(name))
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.radii.len() {
            if !(self.values[i] > 0.0) || !(self.grad[i] < 0.0) {
                return Err(Error::Validation(format!(
                    "resolvent not positive and decreasing at |x| = {}",
                    self.radii[i]
                )));
            }
            if i > 0 && self.values[i] > self.values[i - 1] {
                return Err(Error::Validation(format!(
                    "resolvent increases between {} and {}",
                    self.radii[i - 1],
                    self.radii[i]
                )));
            }
        }
        Ok(())
    }

    fn step(&self) -> f64 {
        (self.grid.rho_max / self.grid.rho_min).ln() / (self.radii.len() - 1) as f64
    }

    /// Log-slope of r and of -r' at node i.
    fn slopes(&self, i: usize) -> (f64, f64) {
        let rho = self.radii[i];
        (rho * self.grad[i] / self.values[i], rho * self.hess[i] / self.grad[i])
    }

    fn scaled_hess(&self, i: usize) -> f64 {
        let rho = self.radii[i];
        rho * rho * self.hess[i] / self.values[i]
    }

    pub fn jet(&self, rho: f64) -> RadialJet {
        let n = self.radii.len();
        let lr = rho.ln();
        let l0 = self.grid.rho_min.ln();
        let h = self.step();
        if rho <= self.radii[0] || rho >= self.radii[n - 1] {
            let i = if rho <= self.radii[0] { 0 } else { n - 1 };
            let (s0, s1) = self.slopes(i);
            let ratio = rho / self.radii[i];
            let value = self.values[i] * ratio.powf(s0);
            let d1 = self.grad[i] * ratio.powf(s1);
            return RadialJet {
                value,
                d1,
                d2: (s1 - 1.0) * d1 / rho,
            };
        }
        let i = (((lr - l0) / h).floor() as usize).min(n - 2);
        let t = ((lr - (l0 + i as f64 * h)) / h).clamp(0.0, 1.0);
        let (s0a, s1a) = self.slopes(i);
        let (s0b, s1b) = self.slopes(i + 1);
        let ln_r = hermite(self.values[i].ln(), self.values[i + 1].ln(), s0a * h, s0b * h, t);
        let ln_g = hermite((-self.grad[i]).ln(), (-self.grad[i + 1]).ln(), s1a * h, s1b * h, t);
        let value = ln_r.exp();
        let k = |j: usize| self.scaled_hess(j.min(n - 1));
        let m0 = if i == 0 { k(1) - k(0) } else { 0.5 * (k(i + 1) - k(i - 1)) };
        let m1 = if i + 2 >= n { k(i + 1) - k(i) } else { 0.5 * (k(i + 2) - k(i)) };
        let sh = hermite(k(i), k(i + 1), m0, m1, t);
        RadialJet {
            value,
            d1: -ln_g.exp(),
            d2: sh * value / (rho * rho),
        }
    }

    pub fn value(&self, rho: f64) -> f64 {
        self.jet(rho).value
    }
}

#[inline]
fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
}
