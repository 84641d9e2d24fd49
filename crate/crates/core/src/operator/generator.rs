//! Singular-integral evaluation of the stable generator and its modulated
//! and truncated variants,
//!
//! `ℒf(x) = ∫ [f(x+h) - f(x) - 1_{|h|≤1} h·∇f(x)] n(x,h) |h|^{-d-α} dh`,
//!
//! with the gradient term dropped for α < 1.
//!
//! Integration is polar around `x`. The ball `|h| ≤ δ` is handled by the
//! second-order Taylor expansion (first order too when there is no
//! compensator), `δ < |h| ≤ 1` by adaptive quadrature in `ln|h|`, and the
//! exterior by a panel scheme chosen from the test function's tail.

use serde::{Deserialize, Serialize};

use super::function::{point, Tail, TestFunction};
use super::kernel::JumpKernel;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_panels, GaussKronrod, Integral, PanelGrowth, PanelOptions};
use crate::sphere::{dot, norm, Directions, MAX_DIM};
use crate::stable::StableParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorOptions {
    /// Radius of the Taylor ball.
    pub delta: f64,
    pub rel_tol: f64,
    /// Absolute tolerance per ray, relative to `‖f‖∞ + ‖∇f‖∞ + ‖∇²f‖∞`.
    pub abs_tol: f64,
    /// Angular resolution for d ≥ 2 (see [`Directions`]).
    pub directions: usize,
    pub max_intervals: usize,
    pub max_panels: usize,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            directions: 24,
            max_intervals: 4000,
            max_panels: 4000,
        }
    }
}

impl GeneratorOptions {
    /// Same scheme with both tolerances set to `tol` (absolute part scaled down by 1e-3).
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self.abs_tol = 1e-3 * tol;
        self
    }
}

type WeightFn<'a> = dyn Fn(f64, &[f64]) -> f64 + Sync + 'a;

/// Radial weight `m(ρ, θ)` multiplying `ρ^{-d-α}`.
pub struct Weight<'a> {
    m: Box<WeightFn<'a>>,
    /// `m ≡ 1` on `(0, unit_within]`.
    unit_within: f64,
    /// `m ≡ 1` on `[unit_beyond, ∞)`.
    unit_beyond: f64,
    /// `m ≡ 0` beyond this radius.
    zero_beyond: f64,
    sup: f64,
    breaks: Vec<f64>,
    /// `m ≡ 0`.
    vanishes: bool,
}

impl<'a> Weight<'a> {
    /// `m ≡ 1`: the stable generator.
    pub fn unit() -> Self {
        Self {
            m: Box::new(|_, _| 1.0),
            unit_within: f64::INFINITY,
            unit_beyond: 0.0,
            zero_beyond: f64::INFINITY,
            sup: 1.0,
            breaks: Vec::new(),
            vanishes: false,
        }
    }

    fn zero() -> Self {
        Self {
            m: Box::new(|_, _| 0.0),
            unit_within: 0.0,
            unit_beyond: f64::INFINITY,
            zero_beyond: 0.0,
            sup: 0.0,
            breaks: Vec::new(),
            vanishes: true,
        }
    }

    /// `m(ρ,θ) = n(x, ρθ)`.
    pub fn kernel(kernel: &'a JumpKernel, x: &'a [f64]) -> Self {
        if kernel.unit {
            return Self::unit();
        }
        Self {
            m: Box::new(move |rho, theta| kernel.eval(x, &scaled(theta, rho)[..x.len()])),
            unit_within: 0.0,
            unit_beyond: f64::INFINITY,
            zero_beyond: f64::INFINITY,
            sup: kernel.upper(),
            breaks: kernel.h_breaks.clone(),
            vanishes: false,
        }
    }

    /// `m = 1` for `ρ ≤ 1/k`, `n(x, ρθ)` beyond.
    pub fn truncated(kernel: &'a JumpKernel, x: &'a [f64], k: u32) -> Self {
        if kernel.unit {
            return Self::unit();
        }
        let cut = 1.0 / k as f64;
        let mut breaks = kernel.h_breaks.clone();
        breaks.push(cut);
        Self {
            m: Box::new(move |rho, theta| {
                if rho <= cut {
                    1.0
                } else {
                    kernel.eval(x, &scaled(theta, rho)[..x.len()])
                }
            }),
            unit_within: cut,
            unit_beyond: f64::INFINITY,
            zero_beyond: f64::INFINITY,
            sup: kernel.upper(),
            breaks,
            vanishes: false,
        }
    }

    /// `m = n(x, ρθ) - 1`, the weight of `ℒ - ℒ₀`.
    pub fn perturbation(kernel: &'a JumpKernel, x: &'a [f64]) -> Self {
        if kernel.unit {
            return Self::zero();
        }
        Self {
            m: Box::new(move |rho, theta| kernel.eval(x, &scaled(theta, rho)[..x.len()]) - 1.0),
            unit_within: 0.0,
            unit_beyond: f64::INFINITY,
            zero_beyond: f64::INFINITY,
            sup: kernel.k_const,
            breaks: kernel.h_breaks.clone(),
            vanishes: false,
        }
    }

    /// `m = (n(x, ρθ) - 1) 1_{ρ ≤ 1/k}`, the weight of `ℒ - ℒ_k`.
    pub fn truncation_gap(kernel: &'a JumpKernel, x: &'a [f64], k: u32) -> Self {
        if kernel.unit {
            return Self::zero();
        }
        let cut = 1.0 / k as f64;
        Self {
            m: Box::new(move |rho, theta| {
                if rho <= cut {
                    kernel.eval(x, &scaled(theta, rho)[..x.len()]) - 1.0
                } else {
                    0.0
                }
            }),
            unit_within: 0.0,
            unit_beyond: f64::INFINITY,
            zero_beyond: cut,
            sup: kernel.k_const,
            breaks: kernel.h_breaks.clone(),
            vanishes: false,
        }
    }

    #[inline]
    fn eval(&self, rho: f64, theta: &[f64]) -> f64 {
        (self.m)(rho, theta)
    }
}

#[inline]
fn scaled(theta: &[f64], rho: f64) -> [f64; MAX_DIM] {
    let mut h = [0.0; MAX_DIM];
    for (o, t) in h.iter_mut().zip(theta) {
        *o = rho * t;
    }
    h
}

/// Which generator to apply.
#[derive(Clone, Debug)]
pub enum Operator {
    Stable,
    Full(JumpKernel),
    Truncated(JumpKernel, u32),
}

impl Operator {
    pub fn apply(&self, f: &dyn TestFunction, x: &[f64], params: &StableParams, opts: &GeneratorOptions) -> Result<f64> {
        match self {
            Operator::Stable => apply_l0(f, x, params, opts),
            Operator::Full(kernel) => apply_l(f, x, kernel, params, opts),
            Operator::Truncated(kernel, k) => apply_lk(f, x, kernel, params, *k, opts),
        }
    }
}

/// `ℒ₀f(x)`.
pub fn apply_l0(f: &dyn TestFunction, x: &[f64], params: &StableParams, opts: &GeneratorOptions) -> Result<f64> {
    Ok(evaluate(f, x, params, &Weight::unit(), opts)?.value)
}

/// `ℒf(x)` with jump kernel `n`.
pub fn apply_l(
    f: &dyn TestFunction,
    x: &[f64],
    kernel: &JumpKernel,
    params: &StableParams,
    opts: &GeneratorOptions,
) -> Result<f64> {
    Ok(evaluate(f, x, params, &Weight::kernel(kernel, x), opts)?.value)
}

/// `ℒ_k f(x)`: kernel `1` on `|h| ≤ 1/k` and `n` beyond.
pub fn apply_lk(
    f: &dyn TestFunction,
    x: &[f64],
    kernel: &JumpKernel,
    params: &StableParams,
    k: u32,
    opts: &GeneratorOptions,
) -> Result<f64> {
    check_k(k)?;
    Ok(evaluate(f, x, params, &Weight::truncated(kernel, x, k), opts)?.value)
}

/// `ℒf(x) - ℒ₀f(x)` as a single integral with weight `n - 1`.
pub fn perturbation_part(
    f: &dyn TestFunction,
    x: &[f64],
    kernel: &JumpKernel,
    params: &StableParams,
    opts: &GeneratorOptions,
) -> Result<f64> {
    Ok(evaluate(f, x, params, &Weight::perturbation(kernel, x), opts)?.value)
}

/// `ℒf(x) - ℒ_k f(x)`, supported on `|h| ≤ 1/k`.
pub fn truncation_part(
    f: &dyn TestFunction,
    x: &[f64],
    kernel: &JumpKernel,
    params: &StableParams,
    k: u32,
    opts: &GeneratorOptions,
) -> Result<f64> {
    check_k(k)?;
    Ok(evaluate(f, x, params, &Weight::truncation_gap(kernel, x, k), opts)?.value)
}

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::param("k", "truncation level must be at least 1"));
    }
    Ok(())
}

/// Generator with an arbitrary radial weight; returns value and error estimate.
pub fn evaluate(
    f: &dyn TestFunction,
    x: &[f64],
    params: &StableParams,
    weight: &Weight,
    opts: &GeneratorOptions,
) -> Result<Integral<f64>> {
    let d = params.d;
    if x.len() != d || f.dim() != d {
        return Err(Error::Contract(format!(
            "point of dimension {} and function of dimension {} for d = {d}",
            x.len(),
            f.dim()
        )));
    }
    if !(opts.delta > 0.0) {
        return Err(Error::param("delta", format!("{} must be positive", opts.delta)));
    }
    let mut grad = [0.0; MAX_DIM];
    let mut hess = [0.0; MAX_DIM * MAX_DIM];
    f.gradient(x, &mut grad[..d]);
    f.hessian(x, &mut hess[..d * d])?;
    if weight.vanishes {
        return Ok(Integral::zero());
    }
    let scale = f.sup_norm() + f.grad_sup_norm() + f.hess_sup_norm();
    let ray = Ray {
        f,
        x,
        fx: f.value(x),
        grad: &grad[..d],
        hess: &hess[..d * d],
        alpha: params.alpha,
        weight,
        opts,
        gk: GaussKronrod::new(opts.abs_tol * scale, opts.rel_tol).with_max_intervals(opts.max_intervals),
    };
    let dirs = Directions::new(d, opts.directions)?;
    let mut total = Integral::zero();
    for (theta, w) in dirs.iter() {
        let piece = ray.integrate(theta)?;
        total.value += w * piece.value;
        total.error += w * piece.error;
        total.evaluations += piece.evaluations;
    }
    Ok(total)
}

struct Ray<'a> {
    f: &'a dyn TestFunction,
    x: &'a [f64],
    fx: f64,
    grad: &'a [f64],
    hess: &'a [f64],
    alpha: f64,
    weight: &'a Weight<'a>,
    opts: &'a GeneratorOptions,
    gk: GaussKronrod<f64>,
}

impl Ray<'_> {
    fn at(&self, theta: &[f64], rho: f64) -> f64 {
        let mut y = point(self.x);
        for (v, t) in y.iter_mut().zip(theta) {
            *v += rho * t;
        }
        self.f.value(&y[..self.x.len()])
    }

    /// `∫_0^∞ [f(x+ρθ) - f(x) - c ρθ·∇f(x)] m(ρ,θ) ρ^{-1-α} dρ`
    fn integrate(&self, theta: &[f64]) -> Result<Integral<f64>> {
        let d = self.x.len();
        let alpha = self.alpha;
        let compensate = alpha >= 1.0;
        let q1 = dot(theta, self.grad);
        let mut q2 = 0.0;
        for i in 0..d {
            for j in 0..d {
                q2 += 0.5 * theta[i] * self.hess[i * d + j] * theta[j];
            }
        }
        let w = self.weight;
        let mut acc = Integral::zero();

        let delta = self.opts.delta.min(1.0);
        let inner_hi = delta.min(w.zero_beyond);
        if inner_hi > 0.0 {
            acc.absorb(self.moment(theta, inner_hi, 1.0 - alpha)?.scale(q2));
            if !compensate {
                acc.absorb(self.moment(theta, inner_hi, -alpha)?.scale(q1));
            }
        }

        let (lo, hi) = (delta, w.zero_beyond.min(1.0));
        if hi > lo {
            let mut breaks = vec![lo.ln()];
            let mut cuts = self.f.ray_breaks(self.x, theta);
            cuts.extend(&w.breaks);
            breaks.extend(cuts.iter().filter(|&&b| b > lo && b < hi).map(|b| b.ln()));
            breaks.push(hi.ln());
            breaks.sort_by(f64::total_cmp);
            let integrand = |u: f64| {
                let rho = u.exp();
                let mut g = self.at(theta, rho) - self.fx;
                if compensate {
                    g -= rho * q1;
                }
                g * w.eval(rho, theta) * rho.powf(-alpha)
            };
            acc.absorb(self.gk.integrate_with_breaks(integrand, &breaks)?);
        }

        if w.zero_beyond > 1.0 {
            acc.absorb(self.exterior(theta, 1.0, w.zero_beyond)?);
        }
        Ok(acc)
    }

    /// `∫_0^b ρ^s m(ρ,θ) dρ` for `s > -1`.
    fn moment(&self, theta: &[f64], b: f64, s: f64) -> Result<Integral<f64>> {
        let w = self.weight;
        let p = s + 1.0;
        let head = b.powf(p) / p;
        if w.unit_within >= b {
            return Ok(Integral {
                value: head,
                error: 0.0,
                evaluations: 0,
            });
        }
        // ρ = b v^{1/p} turns ρ^s dρ into (b^p/p) dv
        let mut breaks = vec![0.0];
        breaks.extend(w.breaks.iter().filter(|&&c| c > 0.0 && c < b).map(|c| (c / b).powf(p)));
        if w.unit_within > 0.0 {
            breaks.push((w.unit_within / b).powf(p));
        }
        breaks.push(1.0);
        breaks.sort_by(f64::total_cmp);
        let res = self.gk.integrate_with_breaks(|v| w.eval(b * v.powf(1.0 / p), theta), &breaks)?;
        Ok(res.scale(head))
    }

    /// `∫_a^b m ρ^{-1-α} dρ`.
    fn mass(&self, theta: &[f64], a: f64, b: f64) -> Result<Integral<f64>> {
        let w = self.weight;
        let alpha = self.alpha;
        let head = a.powf(-alpha) / alpha;
        let v_lo = if b.is_finite() { (b / a).powf(-alpha) } else { 0.0 };
        if w.unit_beyond <= a {
            return Ok(Integral {
                value: head * (1.0 - v_lo),
                error: 0.0,
                evaluations: 0,
            });
        }
        // ρ = a v^{-1/α}
        let mut breaks = vec![v_lo];
        breaks.extend(w.breaks.iter().filter(|&&c| c > a && c < b).map(|c| (c / a).powf(-alpha)));
        if w.unit_beyond.is_finite() && w.unit_beyond > a {
            breaks.push((w.unit_beyond / a).powf(-alpha));
        }
        breaks.push(1.0);
        breaks.sort_by(f64::total_cmp);
        let res = self
            .gk
            .integrate_with_breaks(|v| w.eval(a * v.powf(-1.0 / alpha), theta), &breaks)?;
        Ok(res.scale(head))
    }

    /// `∫_a^b [f(x+ρθ) - f(x)] m ρ^{-1-α} dρ` over the exterior `a ≥ 1`.
    fn exterior(&self, theta: &[f64], a: f64, b: f64) -> Result<Integral<f64>> {
        let w = self.weight;
        let alpha = self.alpha;
        let tail = self.f.tail();
        let mut breaks: Vec<f64> = self.f.ray_breaks(self.x, theta);
        breaks.extend(&w.breaks);
        breaks.retain(|&c| c > a && c < b);
        breaks.sort_by(f64::total_cmp);
        let panels = |growth, accelerate, bound: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64| {
            let opts = PanelOptions {
                growth,
                max_panels: self.opts.max_panels,
                stop_at: b.is_finite().then_some(b),
                accelerate,
            };
            integrate_panels(&self.gk, g, a, &opts, bound)
        };
        let geometric = PanelGrowth::Geometric { first: 1.0, ratio: 2.0 };
        let decay = |rho: f64| w.sup * rho.powf(-alpha) / alpha;

        // f minus its value at x, integrated jointly
        let joint = |sup: f64| -> Result<Integral<f64>> {
            let g = |rho: f64| (self.at(theta, rho) - self.fx) * w.eval(rho, theta) * rho.powf(-1.0 - alpha);
            if b.is_finite() {
                let mut pts = vec![a];
                pts.extend(&breaks);
                pts.push(b);
                return self.gk.integrate_with_breaks(g, &pts);
            }
            panels(geometric, false, &|rho| 2.0 * sup * decay(rho), &g)
        };

        let far = |rho: f64| self.at(theta, rho) * w.eval(rho, theta) * rho.powf(-1.0 - alpha);
        match tail {
            Tail::Flat => Ok(Integral::zero()),
            Tail::Bounded { sup } => joint(sup),
            Tail::Periodic { wavevector, sup } => {
                let k = dot(&wavevector[..self.x.len()], theta).abs();
                let kn = norm(&wavevector[..self.x.len()]);
                if k <= 1e-12 * kn {
                    // constant along the ray
                    return Ok(Integral::zero());
                }
                let mut out = self.mass(theta, a, b)?.scale(-self.fx);
                let half = std::f64::consts::PI / k;
                out.absorb(panels(PanelGrowth::Fixed(half), true, &|rho| sup * decay(rho), &far)?);
                Ok(out)
            }
            Tail::Compact { .. } => {
                let mut out = self.mass(theta, a, b)?.scale(-self.fx);
                let Some(&end) = self.f.ray_breaks(self.x, theta).iter().max_by(|p, q| p.total_cmp(q)) else {
                    return Ok(out);
                };
                let end = end.min(b);
                if end > a {
                    let mut pts = vec![a];
                    pts.extend(breaks.iter().filter(|&&c| c < end));
                    pts.push(end);
                    out.absorb(self.gk.integrate_with_breaks(far, &pts)?);
                }
                Ok(out)
            }
            Tail::Gaussian { .. } | Tail::Power { .. } => {
                let mut out = self.mass(theta, a, b)?.scale(-self.fx);
                let env = |rho: f64| tail.envelope(self.x, rho) * decay(rho);
                out.absorb(panels(geometric, false, &env, &far)?);
                Ok(out)
            }
        }
    }
}
