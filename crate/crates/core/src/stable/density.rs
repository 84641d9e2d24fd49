//! Transition density of the isotropic stable process by radial Fourier
//! inversion, with a power series in `1/r` for the far field.

use statrs::function::gamma::ln_gamma;

use super::params::{check_alpha, StableParams};
use crate::error::{Error, Result};
use crate::quadrature::GaussKronrod;
use crate::special::{sphere_area, spherical_wave};
use crate::sphere::{check_dim, norm};

/// Radial profile of the time-one density with unit symbol constant,
/// `q(r) = (2π)^{-d} ∫ exp(-|ξ|^α) cos(ξ·x) dξ` for `|x| = r`, together with
/// its first two radial derivatives.
#[derive(Clone, Copy, Debug)]
pub struct StandardDensity {
    pub d: usize,
    pub alpha: f64,
    /// `|S^{d-1}| / (2π)^d`
    radial_const: f64,
    /// `v_max` per derivative order: the envelope `v^{d-1+j} e^{-v^α}` is
    /// below 1e-17 of its peak beyond it.
    cutoff: [f64; 3],
    scale: [f64; 3],
    rel_tol: f64,
}

const MAX_PANELS: usize = 6000;

impl StandardDensity {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        check_dim(d)?;
        check_alpha(alpha)?;
        let radial_const = sphere_area(d) / (2.0 * std::f64::consts::PI).powi(d as i32);
        let mut cutoff = [0.0; 3];
        let mut scale = [0.0; 3];
        for j in 0..3 {
            let m = (d - 1 + j) as f64;
            let ln_env = |v: f64| m * v.ln() - v.powf(alpha);
            let peak_v = (m / alpha).powf(1.0 / alpha).max(1e-300);
            let ln_peak = if m > 0.0 { ln_env(peak_v) } else { 0.0 };
            let mut v = peak_v.max(1.0);
            while ln_env(v) > ln_peak - 39.0 {
                v *= 1.1;
            }
            cutoff[j] = v;
            // ∫ v^m e^{-v^α} dv = Γ((m+1)/α)/α bounds the integral's magnitude
            scale[j] = radial_const * (ln_gamma((m + 1.0) / alpha)).exp() / alpha;
        }
        Ok(Self {
            d,
            alpha,
            radial_const,
            cutoff,
            scale,
            rel_tol: 1e-10,
        })
    }

    /// `q^{(order)}(r)` for `order ∈ {0,1,2}`.
    pub fn radial(&self, r: f64, order: usize) -> Result<f64> {
        if order > 2 {
            return Err(Error::Contract("density derivatives above order 2".into()));
        }
        let r = r.abs();
        if r >= 1.0 {
            if let Some(v) = self.series(r, order) {
                return Ok(v);
            }
        }
        self.fourier(r, order)
    }

    fn fourier(&self, r: f64, order: usize) -> Result<f64> {
        let d = self.d;
        let alpha = self.alpha;
        let vmax = self.cutoff[order];
        let mexp = (d - 1 + order) as i32;
        let integrand = |v: f64| {
            if v <= 0.0 {
                return if mexp == 0 { spherical_wave(d, 0.0, order) } else { 0.0 };
            }
            v.powi(mexp) * (-v.powf(alpha)).exp() * spherical_wave(d, v * r, order)
        };
        let mut breaks = vec![0.0];
        if r > 0.0 {
            let half = std::f64::consts::PI / r;
            let n = (vmax / half).ceil() as usize;
            if n > MAX_PANELS {
                return Err(Error::Numerical {
                    context: "density Fourier inversion".into(),
                    estimate: f64::NAN,
                    error: f64::NAN,
                    requested: self.rel_tol,
                    detail: format!("r = {r} needs {n} oscillation panels"),
                });
            }
            breaks.extend((1..n).map(|i| i as f64 * half));
        }
        breaks.push(vmax);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let abs_floor = 1e-15 * self.scale[order];
        let gk = GaussKronrod::new(abs_floor, self.rel_tol).lenient().with_max_intervals(20_000);
        let res = gk.integrate_with_breaks(integrand, &breaks)?;
        let value = self.radial_const * res.value;
        let error = self.radial_const * res.error;
        if error > 1e-8 * value.abs() + 1e-15 * self.scale[order] {
            return Err(Error::Numerical {
                context: "density Fourier inversion".into(),
                estimate: value,
                error,
                requested: 1e-8 * value.abs(),
                detail: format!("r = {r}, order {order}"),
            });
        }
        Ok(value)
    }

    /// Far-field expansion
    /// `q(r) = π^{-d/2-1} Σ_{n≥1} (-1)^{n+1}/n! Γ(nα/2+1) Γ((nα+d)/2) sin(nπα/2) 2^{nα} r^{-nα-d}`,
    /// convergent for α < 1 and asymptotic otherwise. Returns `None` unless
    /// the terms fall below 1e-17 of the sum without heavy cancellation.
    fn series(&self, r: f64, order: usize) -> Option<f64> {
        let d = self.d as f64;
        let a = self.alpha;
        let pre = -(d / 2.0 + 1.0) * std::f64::consts::PI.ln();
        let ln_r = r.ln();
        let mut sum = 0.0;
        let mut max_term: f64 = 0.0;
        let mut prev_mag = f64::INFINITY;
        for n in 1..400u32 {
            let nf = n as f64;
            let s = (nf * std::f64::consts::PI * a / 2.0).sin();
            let p = nf * a + d;
            let ln_mag = pre - ln_gamma(nf + 1.0) + ln_gamma(nf * a / 2.0 + 1.0) + ln_gamma(p / 2.0)
                + nf * a * std::f64::consts::LN_2
                - p * ln_r;
            let deriv = match order {
                0 => 1.0,
                1 => -p / r,
                _ => p * (p + 1.0) / (r * r),
            };
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            let term = sign * s * ln_mag.exp() * deriv;
            let mag = ln_mag.exp() * deriv.abs();
            if mag > prev_mag && n > 2 {
                // asymptotic series started to diverge before converging
                return None;
            }
            prev_mag = mag;
            sum += term;
            max_term = max_term.max(term.abs());
            if mag < 1e-17 * sum.abs() && n > 1 {
                if max_term > 1e4 * sum.abs() {
                    return None;
                }
                return Some(sum);
            }
        }
        None
    }
}

/// Transition density `p_t(0,x)` of the process with symbol `-A|ξ|^α`,
/// reduced to `t = 1` and unit symbol by self-similarity:
/// `p_t(x) = (tA)^{-d/α} q(|x| (tA)^{-1/α})`.
pub fn transition_density(params: &StableParams, t: f64, x: &[f64]) -> Result<f64> {
    let std = StandardDensity::new(params.d, params.alpha)?;
    transition_density_with(&std, params, t, x)
}

pub fn transition_density_with(std: &StandardDensity, params: &StableParams, t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::param("t", format!("{t} must be positive")));
    }
    if x.len() != params.d {
        return Err(Error::Contract(format!("point has dimension {} not {}", x.len(), params.d)));
    }
    let s = t * params.symbol_constant;
    let scale = s.powf(-1.0 / params.alpha);
    Ok(scale.powi(params.d as i32) * std.radial(norm(x) * scale, 0)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_and_fourier_agree_in_overlap() {
        for &(d, alpha) in &[(1, 1.5), (1, 0.7), (2, 1.2), (3, 1.5), (1, 1.0)] {
            let q = StandardDensity::new(d, alpha).unwrap();
            for &r in &[4.0, 8.0] {
                for order in 0..3 {
                    if let Some(s) = q.series(r, order) {
                        let f = q.fourier(r, order).unwrap();
                        assert!((s - f).abs() <= 1e-8 * f.abs() + 1e-14, "d={d} α={alpha} r={r} j={order}: {s} vs {f}");
                    }
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let q = StandardDensity::new(1, 1.5).unwrap();
        for &r in &[0.3, 1.0, 2.5] {
            let h = 1e-4;
            let fd = (q.radial(r + h, 0).unwrap() - q.radial(r - h, 0).unwrap()) / (2.0 * h);
            assert!((fd - q.radial(r, 1).unwrap()).abs() < 1e-7);
            let fd2 = (q.radial(r + h, 1).unwrap() - q.radial(r - h, 1).unwrap()) / (2.0 * h);
            assert!((fd2 - q.radial(r, 2).unwrap()).abs() < 1e-7);
        }
    }
}
