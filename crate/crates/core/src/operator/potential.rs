//! The resolvent potential `u = r^λ * g` of a localized source `g`.
//!
//! Evaluation is polar about the evaluation point, `u(x) = Σ_θ ∫ r^λ(ρ)
//! g(x + ρθ) ρ^{d-1} dρ`, on a fixed composite Gauss–Legendre rule in `ln ρ`
//! whose cells are the resolvent table's cells cut at the source's support
//! crossings. A fixed rule keeps `u` a smooth function of `x`, so the
//! generator's difference quotients see no quadrature noise. Derivatives go
//! onto the source: `∇u = r^λ * ∇g`, `∇²u = r^λ * ∇²g`.

use std::sync::Arc;

use super::function::{point, Integrand, SharedTest, Tail, TestFunction};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::special::sphere_area;
use crate::sphere::{distance, ray_sphere_crossings, Directions, MAX_DIM};
use crate::stable::ResolventTable;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialOptions {
    /// Gauss–Legendre nodes per table cell.
    pub order: usize,
    pub directions: usize,
}

impl Default for PotentialOptions {
    fn default() -> Self {
        Self {
            order: 8,
            directions: 24,
        }
    }
}

impl PotentialOptions {
    /// Rule order matched to a target relative accuracy.
    pub fn for_tolerance(tol: f64) -> Self {
        let order = ((-tol.log10()).ceil() as usize).clamp(2, 16);
        Self { order, ..Self::default() }
    }
}

pub struct PotentialFunction {
    pub table: Arc<ResolventTable>,
    source: Arc<dyn Integrand>,
    smooth: Option<SharedTest>,
    center: [f64; MAX_DIM],
    /// Radius outside which the source is zero (or negligible, for Gaussians).
    radius: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    dirs: Directions,
    tail: Tail,
}

/// Ball outside which a source vanishes to double precision.
fn support_ball(tail: Tail) -> Option<([f64; MAX_DIM], f64)> {
    match tail {
        Tail::Compact { center, radius } => Some((center, radius)),
        // exp(-ρ²/2σ²) < 1e-17
        Tail::Gaussian { center, sigma, .. } => Some((center, sigma * (2.0 * 39.2f64).sqrt())),
        _ => None,
    }
}

impl PotentialFunction {
    /// Potential of a smooth source; derivatives are available.
    pub fn new(table: Arc<ResolventTable>, source: SharedTest, opts: PotentialOptions) -> Result<Self> {
        let src: Arc<dyn Integrand> = Arc::new(AsIntegrand(source.clone()));
        let mut u = Self::of_integrand(table, src, opts)?;
        u.smooth = Some(source);
        Ok(u)
    }

    /// Potential of a merely integrable source; only values are available.
    pub fn of_integrand(table: Arc<ResolventTable>, source: Arc<dyn Integrand>, opts: PotentialOptions) -> Result<Self> {
        let d = table.params.d;
        if source.dim() != d {
            return Err(Error::Contract(format!("source on R^{} for d = {d}", source.dim())));
        }
        let (center, radius) = support_ball(source.tail())
            .ok_or_else(|| Error::Contract("potential needs a compactly supported or Gaussian source".into()))?;
        let (nodes, weights) = gauss_legendre::<f64>(opts.order.max(1));
        let p = &table.params;
        let sup = source.sup_norm();
        // |u(y)| ≤ ‖g‖∞ |B_R| r(s/2) for s = |y - c| ≥ 2R, and r(ρ) ≤ C ρ^{-d-α} for ρ ≥ R
        let power = d as f64 + p.alpha;
        let c_r = table
            .radii
            .iter()
            .zip(&table.values)
            .filter(|(rho, _)| **rho >= radius)
            .map(|(rho, v)| v * rho.powf(power))
            .fold(0.0f64, f64::max)
            * 1.1;
        let vol = sphere_area(d) * radius.powi(d as i32) / d as f64;
        let tail = Tail::Power {
            center,
            r0: 2.0 * radius,
            c: sup * vol * c_r * 2f64.powf(power),
            power,
            sup: sup / p.lambda,
        };
        Ok(Self {
            dirs: Directions::new(d, opts.directions)?,
            table,
            source,
            smooth: None,
            center,
            radius,
            nodes,
            weights,
            tail,
        })
    }

    pub fn source(&self) -> &Arc<dyn Integrand> {
        &self.source
    }

    /// `Σ_θ ∫ r(ρ) s(x + ρθ) ρ^{d-1} dρ` for the scalar field `s`.
    fn convolve(&self, x: &[f64], s: &dyn Fn(&[f64]) -> f64) -> f64 {
        let d = x.len();
        let table = &self.table;
        let rho0 = table.grid.rho_min;
        let l0 = rho0.ln();
        let step = (table.grid.rho_max.ln() - l0) / (table.grid.points - 1) as f64;
        let dist = distance(x, &self.center[..d]);
        let mut total = 0.0;
        let mut y = point(x);
        let eval = |theta: &[f64], rho: f64, y: &mut [f64; MAX_DIM]| {
            for i in 0..d {
                y[i] = x[i] + rho * theta[i];
            }
            s(&y[..d])
        };
        let sx = s(x);
        if sx != 0.0 {
            // ∫_0^{ρ0} r ρ^{d-1} dρ with r a power law of slope q near the origin;
            // odd terms cancel between antipodal rays
            let jet = table.jet(rho0);
            let q = rho0 * jet.d1 / jet.value;
            total += sx * sphere_area(d) * jet.value * rho0.powi(d as i32) / (q + d as f64);
        }
        for (theta, w) in self.dirs.iter() {
            let ball = ray_sphere_crossings(x, theta, &self.center[..d], self.radius);
            let (lo, hi) = match (dist < self.radius, ball.as_slice()) {
                (true, [.., end]) => (rho0, *end),
                (false, [a, b, ..]) => (*a, *b),
                _ => continue,
            };
            if !(hi > lo) {
                continue;
            }
            let mut cuts = self.source.ray_breaks(x, theta);
            cuts.retain(|&c| c > lo && c < hi);
            let (ulo, uhi) = (lo.max(rho0).ln(), hi.ln());
            let mut pts: Vec<f64> = vec![ulo, uhi];
            let first = ((ulo - l0) / step).ceil() as i64;
            let last = ((uhi - l0) / step).floor() as i64;
            pts.extend((first.max(0)..=last).map(|i| l0 + i as f64 * step).filter(|&u| u > ulo && u < uhi));
            pts.extend(cuts.iter().map(|c| c.ln()));
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            let mut ray = 0.0;
            for cell in pts.windows(2) {
                let (a, b) = (cell[0], cell[1]);
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                for (z, wz) in self.nodes.iter().zip(&self.weights) {
                    let u = mid + half * z;
                    let rho = u.exp();
                    ray += wz * half * table.value(rho) * rho.powi(d as i32) * eval(theta, rho, &mut y);
                }
            }
            total += w * ray;
        }
        total
    }

    fn smooth(&self) -> Result<&SharedTest> {
        self.smooth
            .as_ref()
            .ok_or_else(|| Error::Contract("derivatives of the potential need a smooth source".into()))
    }
}

struct AsIntegrand(SharedTest);

impl Integrand for AsIntegrand {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x)
    }
    fn tail(&self) -> Tail {
        self.0.tail()
    }
    fn sup_norm(&self) -> f64 {
        self.0.sup_norm()
    }
    fn ray_breaks(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        self.0.ray_breaks(x, theta)
    }
}

impl Integrand for PotentialFunction {
    fn dim(&self) -> usize {
        self.table.params.d
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.convolve(x, &|y| self.source.value(y))
    }
    fn tail(&self) -> Tail {
        self.tail
    }
    fn sup_norm(&self) -> f64 {
        self.source.sup_norm() / self.table.params.lambda
    }
}

impl TestFunction for PotentialFunction {
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let Ok(g) = self.smooth() else {
            out.iter_mut().for_each(|v| *v = f64::NAN);
            return;
        };
        let d = x.len();
        for i in 0..d {
            out[i] = self.convolve(x, &|y| {
                let mut buf = [0.0; MAX_DIM];
                g.gradient(y, &mut buf[..d]);
                buf[i]
            });
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let g = self.smooth()?;
        let d = x.len();
        for i in 0..d {
            for j in i..d {
                let v = self.convolve(x, &|y| {
                    let mut buf = [0.0; MAX_DIM * MAX_DIM];
                    g.hessian(y, &mut buf[..d * d]).map_or(f64::NAN, |_| buf[i * d + j])
                });
                out[i * d + j] = v;
                out[j * d + i] = v;
            }
        }
        Ok(())
    }
    fn grad_sup_norm(&self) -> f64 {
        self.smooth.as_ref().map_or(f64::INFINITY, |g| g.grad_sup_norm() / self.table.params.lambda)
    }
    fn hess_sup_norm(&self) -> f64 {
        self.smooth.as_ref().map_or(f64::INFINITY, |g| g.hess_sup_norm() / self.table.params.lambda)
    }
}
