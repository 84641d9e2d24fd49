//! Integrands and `C_b²` test functions with the decay information the
//! quadrature routines need to truncate integrals over all of space.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sphere::{distance, dot, norm, ray_sphere_crossings, MAX_DIM};

pub type Point = [f64; MAX_DIM];

pub fn point(x: &[f64]) -> Point {
    let mut p = [0.0; MAX_DIM];
    p[..x.len()].copy_from_slice(x);
    p
}

/// How an integrand behaves far away, used to bound and truncate tails.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tail {
    /// Vanishes outside the closed ball.
    Compact { center: Point, radius: f64 },
    /// `|f(y)| ≤ amp · exp(-|y - center|² / (2σ²))`.
    Gaussian { center: Point, sigma: f64, amp: f64 },
    /// `|f(y)| ≤ c |y - center|^{-power}` once `|y - center| ≥ r0`, and `≤ sup` everywhere.
    Power { center: Point, r0: f64, c: f64, power: f64, sup: f64 },
    /// Plane wave: periodic along every ray with wave vector `wavevector`.
    Periodic { wavevector: Point, sup: f64 },
    /// Constant function.
    Flat,
    /// Only a sup bound is known.
    Bounded { sup: f64 },
}

impl Tail {
    /// Bound on `|f(x + ρθ)|` valid for all `ρ' ≥ ρ` along any ray from `x`.
    pub fn envelope(&self, x: &[f64], rho: f64) -> f64 {
        match *self {
            Tail::Compact { center, radius } => {
                if rho > distance(x, &center[..x.len()]) + radius {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Tail::Gaussian { center, sigma, amp } => {
                let gap = (rho - distance(x, &center[..x.len()])).max(0.0);
                amp.abs() * (-gap * gap / (2.0 * sigma * sigma)).exp()
            }
            Tail::Power { center, r0, c, power, sup } => {
                let gap = rho - distance(x, &center[..x.len()]);
                if gap >= r0 {
                    c * gap.powf(-power)
                } else {
                    sup
                }
            }
            Tail::Periodic { sup, .. } | Tail::Bounded { sup } => sup,
            Tail::Flat => f64::INFINITY,
        }
    }

    pub fn shifted(&self, z: &[f64]) -> Tail {
        let mv = |c: Point| {
            let mut out = c;
            for (o, v) in out.iter_mut().zip(z) {
                *o -= v;
            }
            out
        };
        match *self {
            Tail::Compact { center, radius } => Tail::Compact { center: mv(center), radius },
            Tail::Gaussian { center, sigma, amp } => Tail::Gaussian { center: mv(center), sigma, amp },
            Tail::Power { center, r0, c, power, sup } => Tail::Power { center: mv(center), r0, c, power, sup },
            other => other,
        }
    }
}

/// A scalar function on `R^d` that can be integrated.
pub trait Integrand: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn tail(&self) -> Tail;
    fn sup_norm(&self) -> f64;

    /// Radii along the ray `x + ρθ` where the function is not smooth.
    fn ray_breaks(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        match self.tail() {
            Tail::Compact { center, radius } => ray_sphere_crossings(x, theta, &center[..x.len()], radius),
            _ => Vec::new(),
        }
    }
}

/// A `C_b²` function with derivative evaluators and declared sup bounds.
pub trait TestFunction: Integrand {
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// Row-major `d × d` Hessian.
    fn hessian(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
    fn grad_sup_norm(&self) -> f64;
    fn hess_sup_norm(&self) -> f64;
}

pub type SharedTest = Arc<dyn TestFunction>;

#[derive(Clone, Debug)]
pub struct Constant {
    pub dim: usize,
    pub c: f64,
}

impl Integrand for Constant {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _: &[f64]) -> f64 {
        self.c
    }
    fn tail(&self) -> Tail {
        Tail::Flat
    }
    fn sup_norm(&self) -> f64 {
        self.c.abs()
    }
}

impl TestFunction for Constant {
    fn gradient(&self, _: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
    fn hessian(&self, _: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    }
    fn grad_sup_norm(&self) -> f64 {
        0.0
    }
    fn hess_sup_norm(&self) -> f64 {
        0.0
    }
}

/// `amp · exp(-|x - c|² / (2σ²))`
#[derive(Clone, Debug)]
pub struct Gaussian {
    pub center: Vec<f64>,
    pub sigma: f64,
    pub amp: f64,
}

impl Gaussian {
    pub fn new(center: &[f64], sigma: f64, amp: f64) -> Self {
        Self {
            center: center.to_vec(),
            sigma,
            amp,
        }
    }
}

impl Integrand for Gaussian {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        self.amp * (-r2 / (2.0 * self.sigma * self.sigma)).exp()
    }
    fn tail(&self) -> Tail {
        Tail::Gaussian {
            center: point(&self.center),
            sigma: self.sigma,
            amp: self.amp,
        }
    }
    fn sup_norm(&self) -> f64 {
        self.amp.abs()
    }
}

impl TestFunction for Gaussian {
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let v = self.value(x);
        let s2 = self.sigma * self.sigma;
        for i in 0..x.len() {
            out[i] = -(x[i] - self.center[i]) / s2 * v;
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = x.len();
        let v = self.value(x);
        let s2 = self.sigma * self.sigma;
        for i in 0..d {
            for j in 0..d {
                let di = x[i] - self.center[i];
                let dj = x[j] - self.center[j];
                let id = if i == j { 1.0 } else { 0.0 };
                out[i * d + j] = v * (di * dj / (s2 * s2) - id / s2);
            }
        }
        Ok(())
    }
    fn grad_sup_norm(&self) -> f64 {
        self.amp.abs() / (self.sigma * std::f64::consts::E.sqrt())
    }
    fn hess_sup_norm(&self) -> f64 {
        self.amp.abs() / (self.sigma * self.sigma)
    }
}

/// Smooth compactly supported bump `amp · exp(1 - 1/(1 - |x-c|²/R²))`.
#[derive(Clone, Debug)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amp: f64,
    grad_sup: f64,
    hess_sup: f64,
}

impl Bump {
    pub fn new(center: &[f64], radius: f64, amp: f64) -> Self {
        let mut b = Self {
            center: center.to_vec(),
            radius,
            amp,
            grad_sup: 0.0,
            hess_sup: 0.0,
        };
        // radial profile scan; the sup of a radial function's derivatives
        // is attained along any ray
        let d = center.len();
        let mut x = center.to_vec();
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        for i in 1..4000 {
            x[0] = center[0] + radius * i as f64 / 4000.0;
            b.gradient(&x, &mut g);
            b.hessian(&x, &mut h).unwrap();
            b.grad_sup = b.grad_sup.max(norm(&g));
            let hmax = h.iter().fold(0.0f64, |m, v| m.max(v.abs())) * d as f64;
            b.hess_sup = b.hess_sup.max(hmax);
        }
        b.grad_sup *= 1.01;
        b.hess_sup *= 1.01;
        b
    }

    fn profile(&self, x: &[f64]) -> Option<(f64, f64, f64)> {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        let s = r2 / (self.radius * self.radius);
        if s >= 1.0 {
            return None;
        }
        let q = 1.0 / (1.0 - s);
        let phi = self.amp * (1.0 - q).exp();
        Some((s, q, phi))
    }
}

impl Integrand for Bump {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.profile(x).map_or(0.0, |(_, _, phi)| phi)
    }
    fn tail(&self) -> Tail {
        Tail::Compact {
            center: point(&self.center),
            radius: self.radius,
        }
    }
    fn sup_norm(&self) -> f64 {
        self.amp.abs()
    }
}

impl TestFunction for Bump {
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self.profile(x) {
            None => out.iter_mut().for_each(|v| *v = 0.0),
            Some((_, q, phi)) => {
                let r2 = self.radius * self.radius;
                for i in 0..x.len() {
                    out[i] = -phi * q * q * 2.0 * (x[i] - self.center[i]) / r2;
                }
            }
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = x.len();
        match self.profile(x) {
            None => out.iter_mut().for_each(|v| *v = 0.0),
            Some((_, q, phi)) => {
                let r2 = self.radius * self.radius;
                let dphi = -phi * q * q;
                let d2phi = phi * (q.powi(4) - 2.0 * q.powi(3));
                for i in 0..d {
                    for j in 0..d {
                        let si = 2.0 * (x[i] - self.center[i]) / r2;
                        let sj = 2.0 * (x[j] - self.center[j]) / r2;
                        let id = if i == j { 2.0 / r2 } else { 0.0 };
                        out[i * d + j] = d2phi * si * sj + dphi * id;
                    }
                }
            }
        }
        Ok(())
    }
    fn grad_sup_norm(&self) -> f64 {
        self.grad_sup
    }
    fn hess_sup_norm(&self) -> f64 {
        self.hess_sup
    }
}

/// `amp · cos(ξ·x + phase)`
#[derive(Clone, Debug)]
pub struct Cosine {
    pub wavevector: Vec<f64>,
    pub amp: f64,
    pub phase: f64,
}

impl Cosine {
    pub fn new(wavevector: &[f64], amp: f64, phase: f64) -> Self {
        Self {
            wavevector: wavevector.to_vec(),
            amp,
            phase,
        }
    }
}

impl Integrand for Cosine {
    fn dim(&self) -> usize {
        self.wavevector.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.amp * (dot(&self.wavevector, x) + self.phase).cos()
    }
    fn tail(&self) -> Tail {
        Tail::Periodic {
            wavevector: point(&self.wavevector),
            sup: self.amp.abs(),
        }
    }
    fn sup_norm(&self) -> f64 {
        self.amp.abs()
    }
}

impl TestFunction for Cosine {
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let s = -self.amp * (dot(&self.wavevector, x) + self.phase).sin();
        for (o, k) in out.iter_mut().zip(&self.wavevector) {
            *o = s * k;
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = x.len();
        let c = -self.amp * (dot(&self.wavevector, x) + self.phase).cos();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = c * self.wavevector[i] * self.wavevector[j];
            }
        }
        Ok(())
    }
    fn grad_sup_norm(&self) -> f64 {
        self.amp.abs() * norm(&self.wavevector)
    }
    fn hess_sup_norm(&self) -> f64 {
        let k = norm(&self.wavevector);
        self.amp.abs() * k * k
    }
}

/// `amp · 1_{|x - c| ≤ R}`; integrable but not a test function.
#[derive(Clone, Debug)]
pub struct BallIndicator {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amp: f64,
}

impl Integrand for BallIndicator {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        if distance(x, &self.center) <= self.radius {
            self.amp
        } else {
            0.0
        }
    }
    fn tail(&self) -> Tail {
        Tail::Compact {
            center: point(&self.center),
            radius: self.radius,
        }
    }
    fn sup_norm(&self) -> f64 {
        self.amp.abs()
    }
}

/// Indicator of the half-space `{(x - c)·e ≥ 0}` restricted to the ball
/// `B(c, R)`.
#[derive(Clone, Debug)]
pub struct HalfBallIndicator {
    pub center: Vec<f64>,
    pub radius: f64,
    pub normal: Vec<f64>,
}

impl Integrand for HalfBallIndicator {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let off: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        if norm(&off) <= self.radius && dot(&off, &self.normal) >= 0.0 {
            1.0
        } else {
            0.0
        }
    }
    fn tail(&self) -> Tail {
        Tail::Compact {
            center: point(&self.center),
            radius: self.radius,
        }
    }
    fn sup_norm(&self) -> f64 {
        1.0
    }
    fn ray_breaks(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut b = ray_sphere_crossings(x, theta, &self.center, self.radius);
        let off: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let den = dot(theta, &self.normal);
        if den != 0.0 {
            let t = -dot(&off, &self.normal) / den;
            if t > 0.0 {
                b.push(t);
            }
        }
        b
    }
}

/// Compactly supported sign-changing function `amp · bump(x) · cos(ω|x - c|)`,
/// positive near the center.
#[derive(Clone, Debug)]
pub struct OscillatingBump {
    pub bump: Bump,
    pub freq: f64,
}

impl OscillatingBump {
    pub fn new(center: &[f64], radius: f64, freq: f64, amp: f64) -> Self {
        Self {
            bump: Bump::new(center, radius, amp),
            freq,
        }
    }
}

impl Integrand for OscillatingBump {
    fn dim(&self) -> usize {
        self.bump.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.bump.value(x) * (self.freq * distance(x, &self.bump.center)).cos()
    }
    fn tail(&self) -> Tail {
        self.bump.tail()
    }
    fn sup_norm(&self) -> f64 {
        self.bump.sup_norm()
    }
}

/// Translate: `x ↦ f(x + shift)`.
#[derive(Clone)]
pub struct Shifted {
    pub inner: SharedTest,
    pub shift: Vec<f64>,
}

impl Shifted {
    fn moved(&self, x: &[f64]) -> Point {
        let mut p = point(x);
        for (v, s) in p.iter_mut().zip(&self.shift) {
            *v += s;
        }
        p
    }
}

impl Integrand for Shifted {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(&self.moved(x)[..x.len()])
    }
    fn tail(&self) -> Tail {
        self.inner.tail().shifted(&self.shift)
    }
    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }
}

impl TestFunction for Shifted {
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.inner.gradient(&self.moved(x)[..x.len()], out)
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.inner.hessian(&self.moved(x)[..x.len()], out)
    }
    fn grad_sup_norm(&self) -> f64 {
        self.inner.grad_sup_norm()
    }
    fn hess_sup_norm(&self) -> f64 {
        self.inner.hess_sup_norm()
    }
}

/// `Σ a_i f_i`.
#[derive(Clone)]
pub struct Combination {
    pub terms: Vec<(f64, SharedTest)>,
}

impl Integrand for Combination {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(a, f)| a * f.value(x)).sum()
    }
    fn tail(&self) -> Tail {
        let tails: Vec<Tail> = self.terms.iter().map(|(_, f)| f.tail()).collect();
        if tails.iter().all(|t| *t == Tail::Flat) {
            return Tail::Flat;
        }
        let mut ball: Option<(Point, f64)> = None;
        for t in &tails {
            match (*t, ball) {
                (Tail::Compact { center, radius }, None) => ball = Some((center, radius)),
                (Tail::Compact { center, radius }, Some((c0, r0))) => {
                    let reach = distance(&center, &c0) + radius;
                    ball = Some((c0, r0.max(reach)));
                }
                _ => return Tail::Bounded { sup: self.sup_norm() },
            }
        }
        let (center, radius) = ball.unwrap();
        Tail::Compact { center, radius }
    }
    fn sup_norm(&self) -> f64 {
        self.terms.iter().map(|(a, f)| a.abs() * f.sup_norm()).sum()
    }
    fn ray_breaks(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        self.terms.iter().flat_map(|(_, f)| f.ray_breaks(x, theta)).collect()
    }
}

impl TestFunction for Combination {
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = [0.0; MAX_DIM];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (a, f) in &self.terms {
            f.gradient(x, &mut tmp[..x.len()]);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += a * t;
            }
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let mut tmp = [0.0; MAX_DIM * MAX_DIM];
        let n = x.len() * x.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (a, f) in &self.terms {
            f.hessian(x, &mut tmp[..n])?;
            for (o, t) in out.iter_mut().zip(&tmp[..n]) {
                *o += a * t;
            }
        }
        Ok(())
    }
    fn grad_sup_norm(&self) -> f64 {
        self.terms.iter().map(|(a, f)| a.abs() * f.grad_sup_norm()).sum()
    }
    fn hess_sup_norm(&self) -> f64 {
        self.terms.iter().map(|(a, f)| a.abs() * f.hess_sup_norm()).sum()
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type VecFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Test function assembled from closures; the Hessian may be missing, in
/// which case generator evaluation reports a contract violation.
#[derive(Clone)]
pub struct ClosureFunction {
    pub dim: usize,
    pub value: Arc<ValueFn>,
    pub gradient: Arc<VecFn>,
    pub hessian: Option<Arc<VecFn>>,
    pub tail: Tail,
    pub bounds: [f64; 3],
}

impl Integrand for ClosureFunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn tail(&self) -> Tail {
        self.tail
    }
    fn sup_norm(&self) -> f64 {
        self.bounds[0]
    }
}

impl TestFunction for ClosureFunction {
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.hessian {
            Some(h) => {
                h(x, out);
                Ok(())
            }
            None => Err(Error::Contract("test function has no Hessian".into())),
        }
    }
    fn grad_sup_norm(&self) -> f64 {
        self.bounds[1]
    }
    fn hess_sup_norm(&self) -> f64 {
        self.bounds[2]
    }
}

/// Randomized audit of a test function: declared bounds dominate sampled
/// values and the gradient agrees with central differences. Returns the
/// worst relative gradient mismatch.
pub fn audit_test_function<R: rand::Rng + ?Sized>(
    f: &dyn TestFunction,
    half_box: f64,
    points: usize,
    rng: &mut R,
) -> Result<f64> {
    let d = f.dim();
    let mut x = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        for v in x.iter_mut() {
            *v = rng.random_range(-half_box..half_box);
        }
        let v = f.value(&x);
        f.gradient(&x, &mut g);
        f.hessian(&x, &mut h)?;
        let gmax = norm(&g);
        let hmax = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if v.abs() > f.sup_norm() * (1.0 + 1e-12) || gmax > f.grad_sup_norm() * (1.0 + 1e-9) || hmax > f.hess_sup_norm() * (1.0 + 1e-9) {
            return Err(Error::Validation(format!("declared bounds violated at {x:?}")));
        }
        for i in 0..d {
            let step = 1e-5 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * step);
            let scale = g[i].abs().max(1e-3 * f.grad_sup_norm()).max(1e-300);
            worst = worst.max((fd - g[i]).abs() / scale);
        }
    }
    Ok(worst)
}
