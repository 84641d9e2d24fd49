//! Exact samplers for positive stable subordinators and isotropic stable
//! increments.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use super::params::StableParams;
use crate::error::{Error, Result};

/// One increment over time `t` of the positive stable subordinator of index
/// `index ∈ (0,1)` with Laplace exponent `E exp(-sS_t) = exp(-t s^index)`.
///
/// Uses the Chambers–Mallows–Stuck (Kanter) transform of a uniform angle
/// and a unit exponential; the time scaling is `S_t = t^{1/index} S_1`.
pub fn sample_subordinator_increment<R: Rng + ?Sized>(index: f64, t: f64, rng: &mut R) -> Result<f64> {
    if !(index > 0.0 && index < 1.0) {
        return Err(Error::param("index", format!("{index} outside (0, 1)")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("{t} must be positive")));
    }
    Ok(t.powf(1.0 / index) * standard_subordinator(index, rng))
}

#[inline]
fn standard_subordinator<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    loop {
        let u = std::f64::consts::PI * rng.random::<f64>();
        let w: f64 = rng.sample(Exp1);
        if u == 0.0 || w == 0.0 {
            continue;
        }
        let s = (a * u).sin() / u.sin().powf(1.0 / a) * (((1.0 - a) * u).sin() / w).powf((1.0 - a) / a);
        if s.is_finite() && s > 0.0 {
            return s;
        }
    }
}

/// Increment over `dt` of the isotropic stable process with characteristic
/// function `exp(-dt·A|ξ|^α)`, written into `out[..d]`.
///
/// Sampled by subordination: `X = √(2S)·Z` with `Z` standard Gaussian and
/// `S` the index-α/2 subordinator run for time `dt·A`, since
/// `E exp(iξ·X) = E exp(-S|ξ|²) = exp(-dt·A|ξ|^α)`.
pub fn sample_stable_increment<R: Rng + ?Sized>(
    params: &StableParams,
    dt: f64,
    rng: &mut R,
    out: &mut [f64],
) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("{dt} must be positive")));
    }
    let d = params.d;
    if out.len() < d {
        return Err(Error::Contract(format!("output buffer shorter than d = {d}")));
    }
    let s = sample_subordinator_increment(0.5 * params.alpha, dt * params.symbol_constant, rng)?;
    let scale = (2.0 * s).sqrt();
    for v in out.iter_mut().take(d) {
        let z: f64 = rng.sample(StandardNormal);
        *v = scale * z;
    }
    Ok(())
}

pub fn stable_increment_vec<R: Rng + ?Sized>(params: &StableParams, dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    let mut out = vec![0.0; params.d];
    sample_stable_increment(params, dt, rng, &mut out)?;
    Ok(out)
}
