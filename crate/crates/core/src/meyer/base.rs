//! Increments of the stable process restricted to jumps `|h| ≤ 1/k`.
//!
//! Jumps in `(ε, 1/k]` are a compound Poisson sum with exact sizes; jumps
//! below `ε` are replaced by a centred Gaussian of the same covariance
//! (Asmussen–Rosiński). `ε` is chosen so that the standard deviation of the
//! replaced part is [`SMALL_JUMP_RATIO`] times `ε`, the regime where the
//! Gaussian approximation is accurate. The truncated measure is symmetric, so
//! no compensator drift appears.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::sphere::sample_direction;
use crate::stable::StableParams;

/// Standard deviation of the Gaussian part in units of the cutoff `ε`.
pub const SMALL_JUMP_RATIO: f64 = 5.0;

#[derive(Clone, Debug)]
pub struct BaseStep {
    d: usize,
    alpha: f64,
    /// Truncation radius `1/k`.
    pub cut: f64,
    /// Gaussian cutoff.
    pub eps: f64,
    /// Outer radius of the sampled compound Poisson part (≥ `cut`).
    outer: f64,
    eps_pow: f64,
    outer_pow: f64,
    /// Per-coordinate standard deviation of the Gaussian part.
    sigma: f64,
    rate: f64,
    poisson: Option<Poisson<f64>>,
}

impl BaseStep {
    pub fn new(params: &StableParams, k: u32, dt: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "truncation level must be at least 1"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::param("dt", format!("{dt} must be positive")));
        }
        let a = params.alpha;
        let area = params.sphere_area();
        let cut = 1.0 / k as f64;
        let eps = (dt * area / ((2.0 - a) * SMALL_JUMP_RATIO * SMALL_JUMP_RATIO))
            .powf(1.0 / a)
            .min(cut);
        let var = dt * area * eps.powf(2.0 - a) / (2.0 - a);
        let mut step = Self {
            d: params.d,
            alpha: a,
            cut,
            eps,
            outer: cut,
            eps_pow: eps.powf(-a),
            outer_pow: cut.powf(-a),
            sigma: (var / params.d as f64).sqrt(),
            rate: 0.0,
            poisson: None,
        };
        step.set_outer(cut, dt, area)?;
        Ok(step)
    }

    /// Draws the resolved jumps on `(ε, r]` and discards those beyond `1/k`.
    /// Same law; with a shared `r` the resolved jumps of runs at different
    /// `k` are drawn from identical random numbers.
    pub fn with_coupling_radius(mut self, r: f64, params: &StableParams, dt: f64) -> Result<Self> {
        if !(r >= self.cut) {
            return Err(Error::param("coupling radius", format!("{r} below the truncation radius {}", self.cut)));
        }
        self.set_outer(r, dt, params.sphere_area())?;
        Ok(self)
    }

    fn set_outer(&mut self, r: f64, dt: f64, area: f64) -> Result<()> {
        self.outer = r;
        self.outer_pow = r.powf(-self.alpha);
        let rate = dt * area * (self.eps_pow - self.outer_pow) / self.alpha;
        self.rate = rate;
        self.poisson = if rate > 0.0 {
            Some(Poisson::new(rate).map_err(|e| Error::param("dt", format!("jump count: {e}")))?)
        } else {
            None
        };
        Ok(())
    }

    /// Expected number of resolved jumps per step.
    pub fn resolved_rate(&self) -> f64 {
        self.rate
    }

    /// Writes one increment into `out[..d]` and returns the largest kept jump size.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> f64 {
        let d = self.d;
        for v in out.iter_mut().take(d) {
            let z: f64 = rng.sample(StandardNormal);
            *v = self.sigma * z;
        }
        let Some(p) = &self.poisson else { return 0.0 };
        let count = p.sample(rng) as u64;
        let mut theta = [0.0; 3];
        let mut largest: f64 = 0.0;
        for _ in 0..count {
            // inverse CDF of ρ^{-1-α} on (ε, outer]
            let u: f64 = rng.random();
            let rho = (self.eps_pow - u * (self.eps_pow - self.outer_pow)).powf(-1.0 / self.alpha);
            sample_direction(d, rng, &mut theta);
            if rho > self.cut {
                continue;
            }
            largest = largest.max(rho);
            for i in 0..d {
                out[i] += rho * theta[i];
            }
        }
        largest
    }
}

/// One increment over `dt` of the stable process with jumps `|h| ≤ 1/k`.
pub fn simulate_base_step<R: Rng + ?Sized>(params: &StableParams, k: u32, dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    let step = BaseStep::new(params, k, dt)?;
    let mut out = vec![0.0; params.d];
    step.sample(rng, &mut out);
    Ok(out)
}

/// `∫_{|h|≤1/k} |h|² |h|^{-d-α} dh = |S^{d-1}| k^{α-2} / (2-α)`.
pub fn truncated_second_moment(params: &StableParams, k: u32) -> f64 {
    params.sphere_area() * (k as f64).powf(params.alpha - 2.0) / (2.0 - params.alpha)
}
