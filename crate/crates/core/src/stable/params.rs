use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_panels, GaussKronrod, PanelGrowth, PanelOptions};
use crate::special::{one_minus_wave_coefficient, sphere_area, spherical_wave};
use crate::sphere::check_dim;

/// Parameters of the rotationally symmetric stable process whose generator
/// integrates against the unnormalized kernel `|h|^{-d-α}`.
///
/// With that kernel the Fourier symbol is `-A(d,α)|ξ|^α`, and `A` is stored
/// in `symbol_constant`. Every density, resolvent and sampler in the crate
/// uses this scale: the time-`t` law has characteristic function
/// `exp(-t·A(d,α)|ξ|^α)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub d: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub symbol_constant: f64,
}

impl StableParams {
    pub fn new(d: usize, alpha: f64, lambda: f64) -> Result<Self> {
        check_dim(d)?;
        check_alpha(alpha)?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::param("lambda", format!("{lambda} must be positive")));
        }
        Ok(Self {
            d,
            alpha,
            lambda,
            symbol_constant: symbol_constant(d, alpha)?,
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::param("lambda", format!("{lambda} must be positive")));
        }
        Ok(Self { lambda, ..*self })
    }

    /// Area of the unit sphere in dimension `d`.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.d)
    }

    /// Mass of the jump measure outside the ball of radius `r`: `|S^{d-1}| r^{-α} / α`.
    pub fn tail_mass(&self, r: f64) -> f64 {
        self.sphere_area() * r.powf(-self.alpha) / self.alpha
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("{alpha} outside (0, 2)")))
    }
}

/// `A(d,α) = ∫ (1 - cos(h·e₁)) |h|^{-d-α} dh`, computed in polar form as
/// `|S^{d-1}| ∫₀^∞ (1 - ω_d(ρ)) ρ^{-1-α} dρ` with `ω_d` the spherical
/// average of the plane wave. The piece on `[0,1]` is summed from the power
/// series of `1 - ω_d`, the oscillatory tail by panels plus extrapolation.
pub fn symbol_constant(d: usize, alpha: f64) -> Result<f64> {
    check_dim(d)?;
    check_alpha(alpha)?;
    let mut head = 0.0;
    for m in 1..60u32 {
        let term = one_minus_wave_coefficient(d, m) / (2.0 * m as f64 - alpha);
        head += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    let gk = GaussKronrod::new(1e-14, 1e-13);
    let opts = PanelOptions {
        growth: PanelGrowth::Fixed(std::f64::consts::PI),
        max_panels: 4000,
        stop_at: None,
        accelerate: true,
    };
    let wave_tail = integrate_panels(
        &gk,
        |rho: f64| spherical_wave(d, rho, 0) * rho.powf(-1.0 - alpha),
        1.0,
        &opts,
        |_| f64::INFINITY,
    )?;
    Ok(sphere_area(d) * (head + 1.0 / alpha - wave_tail.value))
}
