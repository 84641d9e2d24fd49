//! The local and far functionals
//! `I_{γ,x}(f) = ∫_{|x-y|≤1} |f(y)| |x-y|^{γ-d} dy` and
//! `J_{γ,x}(f) = ∫_{|x-y|>1} |f(y)| |x-y|^{-d-γ} dy`.

use serde::{Deserialize, Serialize};

use super::function::{point, Integrand, Tail};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_panels, GaussKronrod, PanelGrowth, PanelOptions};
use crate::sphere::Directions;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalOptions {
    pub rel_tol: f64,
    /// Absolute tolerance relative to `‖f‖∞`; also the envelope cutoff of the far integral.
    pub abs_tol: f64,
    pub directions: usize,
    pub max_panels: usize,
}

impl Default for FunctionalOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            directions: 24,
            max_panels: 200,
        }
    }
}

fn shoot(f: &dyn Integrand, x: &[f64], theta: &[f64], rho: f64) -> f64 {
    let mut y = point(x);
    for (v, t) in y.iter_mut().zip(theta) {
        *v += rho * t;
    }
    f.value(&y[..x.len()]).abs()
}

fn check(f: &dyn Integrand, x: &[f64], gamma: f64) -> Result<()> {
    if x.len() != f.dim() {
        return Err(Error::Contract(format!("point of dimension {} for a function on R^{}", x.len(), f.dim())));
    }
    if !(gamma > 0.0) {
        return Err(Error::param("gamma", format!("{gamma} must be positive")));
    }
    Ok(())
}

/// `I_{γ,x}(f)`. In polar coordinates the weight is `ρ^{γ-1}`, and
/// `ρ = v^{1/γ}` removes it.
pub fn riesz_potential(f: &dyn Integrand, x: &[f64], gamma: f64, opts: &FunctionalOptions) -> Result<f64> {
    check(f, x, gamma)?;
    let gk = GaussKronrod::new(opts.abs_tol * f.sup_norm(), opts.rel_tol).with_max_intervals(4000);
    let mut total = 0.0;
    for (theta, w) in Directions::new(x.len(), opts.directions)?.iter() {
        let mut end = 1.0;
        if let Tail::Compact { .. } = f.tail() {
            let cuts = f.ray_breaks(x, theta);
            match cuts.iter().copied().reduce(f64::max) {
                Some(c) => end = c.min(1.0),
                None => continue,
            }
        }
        let mut pts = vec![0.0];
        pts.extend(
            f.ray_breaks(x, theta)
                .into_iter()
                .filter(|&c| c > 0.0 && c < end)
                .map(|c| c.powf(gamma)),
        );
        pts.push(end.powf(gamma));
        pts.sort_by(f64::total_cmp);
        let res = gk.integrate_with_breaks(|v| shoot(f, x, theta, v.powf(1.0 / gamma)), &pts)?;
        total += w * res.value / gamma;
    }
    Ok(total)
}

/// `J_{γ,x}(f)`, truncated once the envelope of the remaining tail is
/// below the absolute tolerance. Fails if the partial sums keep moving.
pub fn tail_functional(f: &dyn Integrand, x: &[f64], gamma: f64, opts: &FunctionalOptions) -> Result<f64> {
    check(f, x, gamma)?;
    let sup = f.sup_norm();
    let gk = GaussKronrod::new(opts.abs_tol * sup, opts.rel_tol).with_max_intervals(4000);
    let tail = f.tail();
    let mut total = 0.0;
    for (theta, w) in Directions::new(x.len(), opts.directions)?.iter() {
        let mut stop_at = None;
        if let Tail::Compact { .. } = tail {
            match f.ray_breaks(x, theta).into_iter().reduce(f64::max) {
                Some(c) if c > 1.0 => stop_at = Some(c),
                _ => continue,
            }
        }
        let panel = PanelOptions {
            growth: PanelGrowth::Geometric { first: 1.0, ratio: 2.0 },
            max_panels: opts.max_panels,
            stop_at,
            accelerate: false,
        };
        let g = |rho: f64| shoot(f, x, theta, rho) * rho.powf(-1.0 - gamma);
        let bound = |rho: f64| tail.envelope(x, rho).min(sup) * rho.powf(-gamma) / gamma;
        let res = integrate_panels(&gk, g, 1.0, &panel, bound).map_err(|e| match e {
            Error::Numerical { estimate, error, .. } => Error::Numerical {
                context: "far functional".into(),
                estimate,
                error,
                requested: opts.abs_tol * sup,
                detail: "partial sums over dyadic shells do not settle".into(),
            },
            other => other,
        })?;
        total += w * res.value;
    }
    Ok(total)
}

/// `‖f‖_{L^p}` by polar quadrature about `center`, for `f` with a known tail.
pub fn lp_norm(f: &dyn Integrand, center: &[f64], p: f64, opts: &FunctionalOptions) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::param("p", format!("{p} must be at least 1")));
    }
    let d = center.len();
    let sup = f.sup_norm();
    let gk = GaussKronrod::new(opts.abs_tol * sup.powf(p), opts.rel_tol).with_max_intervals(4000);
    let tail = f.tail();
    let mut total = 0.0;
    for (theta, w) in Directions::new(d, opts.directions)?.iter() {
        let cuts = f.ray_breaks(center, theta);
        let g = |rho: f64| shoot(f, center, theta, rho).powf(p) * rho.powi(d as i32 - 1);
        let res = match tail {
            Tail::Compact { .. } => {
                let Some(end) = cuts.iter().copied().reduce(f64::max) else { continue };
                let mut pts = vec![0.0];
                pts.extend(cuts.iter().filter(|&&c| c > 0.0 && c < end));
                pts.push(end);
                pts.sort_by(f64::total_cmp);
                gk.integrate_with_breaks(g, &pts)?
            }
            Tail::Gaussian { .. } | Tail::Power { .. } => {
                let panel = PanelOptions {
                    growth: PanelGrowth::Geometric { first: 1.0, ratio: 2.0 },
                    max_panels: opts.max_panels,
                    stop_at: None,
                    accelerate: false,
                };
                let bound = |rho: f64| {
                    // crude: envelope^p times a shell volume, summed geometrically
                    tail.envelope(center, rho).powf(p) * rho.powi(d as i32) * 4.0
                };
                integrate_panels(&gk, g, 0.0, &panel, bound)?
            }
            _ => return Err(Error::Contract("L^p norm needs a decaying function".into())),
        };
        total += w * res.value;
    }
    Ok(total.powf(1.0 / p))
}
