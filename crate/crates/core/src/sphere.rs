//! Quadrature rules on the unit sphere and small vector helpers for d ≤ 3.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::special::sphere_area;

pub const MAX_DIM: usize = 3;

pub fn check_dim(d: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(Error::param("d", format!("dimension {d} not supported (1..=3)")))
    }
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Direction set with weights summing to the area of `S^{d-1}`.
///
/// The set is antipodally symmetric, so odd Taylor terms of an even jump
/// kernel cancel exactly.
#[derive(Clone, Debug)]
pub struct Directions {
    pub dim: usize,
    dirs: Vec<[f64; MAX_DIM]>,
    weights: Vec<f64>,
}

impl Directions {
    /// `resolution` is the number of azimuthal nodes for d ≥ 2 (rounded up to
    /// an even number); ignored for d = 1.
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        check_dim(dim)?;
        let m = resolution.max(4).div_ceil(2) * 2;
        let mut dirs = Vec::new();
        let mut weights = Vec::new();
        match dim {
            1 => {
                dirs.push([1.0, 0.0, 0.0]);
                dirs.push([-1.0, 0.0, 0.0]);
                weights.extend([1.0, 1.0]);
            }
            2 => {
                let w = 2.0 * std::f64::consts::PI / m as f64;
                for j in 0..m {
                    let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / m as f64;
                    dirs.push([phi.cos(), phi.sin(), 0.0]);
                    weights.push(w);
                }
            }
            _ => {
                let (mu, wmu) = gauss_legendre::<f64>(m / 2);
                let wphi = 2.0 * std::f64::consts::PI / m as f64;
                for (c, wc) in mu.iter().zip(&wmu) {
                    let s = (1.0 - c * c).sqrt();
                    for j in 0..m {
                        let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / m as f64;
                        dirs.push([s * phi.cos(), s * phi.sin(), *c]);
                        weights.push(wc * wphi);
                    }
                }
            }
        }
        Ok(Self { dim, dirs, weights })
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.dirs
            .iter()
            .zip(&self.weights)
            .map(move |(d, w)| (&d[..self.dim], *w))
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Uniform direction on `S^{d-1}`.
pub fn sample_direction<R: Rng + ?Sized>(d: usize, rng: &mut R, out: &mut [f64]) {
    if d == 1 {
        out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut s = 0.0;
        for v in out.iter_mut().take(d) {
            *v = rng.sample(StandardNormal);
            s += *v * *v;
        }
        if s > 1e-300 {
            let n = s.sqrt();
            for v in out.iter_mut().take(d) {
                *v /= n;
            }
            return;
        }
    }
}

/// Ray parameters `ρ > 0` where `x + ρθ` crosses the sphere `|y - c| = r`.
pub fn ray_sphere_crossings(x: &[f64], theta: &[f64], center: &[f64], r: f64) -> Vec<f64> {
    // |x - c + ρθ|² = r²  →  ρ² + 2ρ b + (|x-c|² - r²) = 0
    let mut b = 0.0;
    let mut c0 = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - center[i];
        b += dx * theta[i];
        c0 += dx * dx;
    }
    let c0 = c0 - r * r;
    let disc = b * b - c0;
    if disc <= 0.0 {
        return Vec::new();
    }
    let s = disc.sqrt();
    [-b - s, -b + s].into_iter().filter(|&t| t > 0.0).collect()
}

/// Area of `S^{d-1}` re-exported next to the rules that use it.
pub fn area(d: usize) -> f64 {
    sphere_area(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn weights_sum_to_area() {
        for d in 1..=3 {
            let dirs = Directions::new(d, 16).unwrap();
            assert!((dirs.total_weight() - area(d)).abs() < 1e-12);
        }
    }

    #[test]
    fn rule_integrates_quadratics() {
        // ∫ θ_1^2 dσ = |S^{d-1}| / d
        for d in 1..=3 {
            let dirs = Directions::new(d, 12).unwrap();
            let s: f64 = dirs.iter().map(|(t, w)| w * t[0] * t[0]).sum();
            assert!((s - area(d) / d as f64).abs() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn antipodal_symmetry() {
        for d in 1..=3 {
            let dirs = Directions::new(d, 10).unwrap();
            let s: Vec<f64> = (0..d).map(|i| dirs.iter().map(|(t, w)| w * t[i]).sum()).collect();
            assert!(s.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn crossings() {
        let c = ray_sphere_crossings(&[0.0], &[1.0], &[2.0], 0.5);
        assert_eq!(c.len(), 2);
        assert!((c[0] - 1.5).abs() < 1e-15 && (c[1] - 2.5).abs() < 1e-15);
        let inside = ray_sphere_crossings(&[0.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], 1.0);
        assert_eq!(inside, vec![1.0]);
    }

    #[test]
    fn sampled_directions_are_unit() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut v = [0.0; 3];
        for d in 1..=3 {
            sample_direction(d, &mut rng, &mut v);
            assert!((norm(&v[..d]) - 1.0).abs() < 1e-12);
        }
    }
}
