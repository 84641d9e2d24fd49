//! Jump kernels `n(x,h)` modulating the stable intensity `|h|^{-d-α}`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{norm, sample_direction, MAX_DIM};

pub type KernelFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// A kernel together with the constants of its lower bound `n ≥ κ` and its
/// closeness to one, `|n(x,h) - 1| ≤ K (1 ∧ |h|^β)`.
#[derive(Clone)]
pub struct JumpKernel {
    pub label: String,
    pub kappa: f64,
    pub k_const: f64,
    pub beta: f64,
    n: Arc<KernelFn>,
    /// `n ≡ 1`; lets callers skip work that is identically zero.
    pub unit: bool,
    /// `n` does not depend on `x`.
    pub x_independent: bool,
    /// `n` depends on `x` only through `x₁`.
    pub x_axis_only: bool,
    /// Interval endpoints (in `x₁`) where `n` jumps, for tabulation.
    pub x_breaks: Vec<f64>,
    /// Radii `|h|` where `n(x, ·)` has a kink.
    pub h_breaks: Vec<f64>,
    /// Text that determines `n` completely; keys on-disk caches.
    pub signature: String,
}

impl fmt::Debug for JumpKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpKernel")
            .field("label", &self.label)
            .field("kappa", &self.kappa)
            .field("K", &self.k_const)
            .field("beta", &self.beta)
            .finish()
    }
}

impl JumpKernel {
    pub fn new<F>(label: impl Into<String>, kappa: f64, k_const: f64, beta: f64, n: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(kappa > 0.0) {
            return Err(Error::param("kappa", format!("{kappa} must be positive")));
        }
        if !(k_const > 0.0) {
            return Err(Error::param("K", format!("{k_const} must be positive")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::param("beta", format!("{beta} outside (0, 1)")));
        }
        let label = label.into();
        Ok(Self {
            signature: label.clone(),
            label,
            kappa,
            k_const,
            beta,
            n: Arc::new(n),
            unit: false,
            x_independent: false,
            x_axis_only: false,
            x_breaks: Vec::new(),
            h_breaks: Vec::new(),
        })
    }

    /// `n ≡ 1`. `K` is a token positive value since `|n - 1|` vanishes.
    pub fn stable() -> Self {
        let mut k = Self::new("stable", 1.0, 1e-12, 0.5, |_, _| 1.0).unwrap();
        k.unit = true;
        k.x_independent = true;
        k.x_axis_only = true;
        k.signature = "1".into();
        k
    }

    /// `n(x,h) = 1 + a (1 ∧ |h|^β)`: κ = min(1, 1+a), K = |a|.
    pub fn holder_bump(a: f64, beta: f64) -> Result<Self> {
        if !(a > -1.0) || a == 0.0 {
            return Err(Error::param("a", format!("{a} must be nonzero and > -1")));
        }
        let mut k = Self::new("holder_bump", (1.0 + a).min(1.0), a.abs(), beta, move |_, h| {
            1.0 + a * norm(h).powf(beta).min(1.0)
        })?;
        k.x_independent = true;
        k.x_axis_only = true;
        k.h_breaks = vec![1.0];
        k.signature = format!("1 + {a:e} * min(1, |h|^{beta:e})");
        Ok(k)
    }

    /// `n(x,h) = 1 + a (1 ∧ |h|^β) σ(x)` with `σ(x) = +1` when `⌊|x₁|/w⌋` is
    /// even and `-1` otherwise: κ = 1 - a, K = a. The kernel jumps across
    /// every hyperplane `x₁ = j·w`.
    pub fn discontinuous_in_x(a: f64, beta: f64, width: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::param("a", format!("{a} outside (0, 1)")));
        }
        if !(width > 0.0) {
            return Err(Error::param("width", format!("{width} must be positive")));
        }
        let mut k = Self::new("discontinuous_in_x", 1.0 - a, a, beta, move |x, h| {
            1.0 + a * norm(h).powf(beta).min(1.0) * sign_pattern(x[0], width)
        })?;
        k.h_breaks = vec![1.0];
        k.x_axis_only = true;
        k.signature = format!("1 + {a:e} * min(1, |h|^{beta:e}) * sign(x1; {width:e})");
        Ok(k.with_x_breaks_every(width))
    }

    pub fn with_x_breaks_every(mut self, width: f64) -> Self {
        self.x_breaks = (-400..=400).map(|j| j as f64 * width).collect();
        self
    }

    #[inline]
    pub fn eval(&self, x: &[f64], h: &[f64]) -> f64 {
        (self.n)(x, h)
    }

    /// Upper bound `1 + K` on `n`.
    pub fn upper(&self) -> f64 {
        if self.unit {
            1.0
        } else {
            1.0 + self.k_const
        }
    }

    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "label": self.label,
            "kappa": self.kappa,
            "K": self.k_const,
            "beta": self.beta,
            "n": self.signature,
        })
    }
}

/// `+1` on `⌊|x|/w⌋` even, `-1` otherwise.
#[inline]
pub fn sign_pattern(x: f64, width: f64) -> f64 {
    if ((x.abs() / width).floor() as i64) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub points: usize,
    pub min_n: f64,
    /// `max |n - 1| / (K (1 ∧ |h|^β))`; at most 1 when the envelope holds.
    pub worst_envelope_ratio: f64,
    pub lower_bound_ok: bool,
    pub envelope_ok: bool,
}

impl AssumptionReport {
    pub fn pass(&self) -> bool {
        self.lower_bound_ok && self.envelope_ok
    }
}

/// Spot-checks `n ≥ κ` and `|n - 1| ≤ K(1 ∧ |h|^β)` on random `(x, h)`:
/// `x` uniform in `[-box, box]^d`, `|h|` log-uniform on `[1e-4, 1e2]`,
/// direction uniform.
pub fn validate_assumptions<R: Rng + ?Sized>(
    kernel: &JumpKernel,
    d: usize,
    points: usize,
    half_box: f64,
    rng: &mut R,
) -> AssumptionReport {
    let mut min_n = f64::INFINITY;
    let mut worst: f64 = 0.0;
    let mut x = [0.0; MAX_DIM];
    let mut h = [0.0; MAX_DIM];
    for _ in 0..points {
        for v in x.iter_mut().take(d) {
            *v = rng.random_range(-half_box..half_box);
        }
        sample_direction(d, rng, &mut h);
        let r = 10f64.powf(rng.random_range(-4.0..2.0));
        for v in h.iter_mut().take(d) {
            *v *= r;
        }
        let n = kernel.eval(&x[..d], &h[..d]);
        min_n = min_n.min(n);
        let env = kernel.k_const * r.powf(kernel.beta).min(1.0);
        worst = worst.max((n - 1.0).abs() / env);
    }
    AssumptionReport {
        points,
        min_n,
        worst_envelope_ratio: worst,
        lower_bound_ok: min_n >= kernel.kappa * (1.0 - 1e-12),
        envelope_ok: worst <= 1.0 + 1e-9,
    }
}
