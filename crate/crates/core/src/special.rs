//! Bessel functions of order 0 and 1 and the spherical averages of plane
//! waves used by isotropic Fourier inversion.

use crate::scalar::Real;

const SERIES_SWITCH: f64 = 12.0;

fn bessel_series<T: Real>(nu: u32, x: T) -> T {
    let half = x * T::lit(0.5);
    let q = -(half * half);
    let mut fact_nu = T::one();
    for j in 1..=nu {
        fact_nu = fact_nu * T::lit(j as f64);
    }
    let mut term = half.powi(nu as i32) / fact_nu;
    let mut sum = term;
    for k in 1..200u32 {
        term = term * q / (T::lit(k as f64) * T::lit((k + nu) as f64));
        sum = sum + term;
        if term.abs() <= T::epsilon() * sum.abs() * T::lit(0.1) {
            break;
        }
    }
    sum
}

fn bessel_asymptotic<T: Real>(nu: u32, x: T) -> T {
    let mu = T::lit(4.0 * (nu * nu) as f64);
    let eight_x = T::lit(8.0) * x;
    let mut p = T::one();
    let mut q = T::zero();
    let mut a = T::one();
    let mut last = T::infinity();
    for k in 1..60u32 {
        let odd = T::lit(((2 * k - 1) * (2 * k - 1)) as f64);
        a = a * (mu - odd) / (T::lit(k as f64) * eight_x);
        if a.abs() > last || a.abs() < T::epsilon() * T::lit(1e-3) {
            break;
        }
        last = a.abs();
        let sign = if (k / 2) % 2 == 0 { T::one() } else { -T::one() };
        if k % 2 == 0 {
            p = p + sign * a;
        } else {
            let sign_q = if ((k - 1) / 2) % 2 == 0 { T::one() } else { -T::one() };
            q = q + sign_q * a;
        }
    }
    let chi = x - T::lit(nu as f64) * T::FRAC_PI_2() - T::FRAC_PI_4();
    (T::lit(2.0) / (T::PI() * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Bessel function of the first kind, order 0.
pub fn bessel_j0<T: Real>(x: T) -> T {
    let x = x.abs();
    if x < T::lit(SERIES_SWITCH) {
        bessel_series(0, x)
    } else {
        bessel_asymptotic(0, x)
    }
}

/// Bessel function of the first kind, order 1.
pub fn bessel_j1<T: Real>(x: T) -> T {
    let ax = x.abs();
    let v = if ax < T::lit(SERIES_SWITCH) {
        bessel_series(1, ax)
    } else {
        bessel_asymptotic(1, ax)
    };
    if x < T::zero() {
        -v
    } else {
        v
    }
}

/// `J1(x)/x`, finite at the origin.
fn j1_over_x<T: Real>(x: T) -> T {
    if x.abs() < T::one() {
        let half = x * T::lit(0.5);
        let q = -(half * half);
        let mut term = T::lit(0.5);
        let mut sum = term;
        for k in 1..40u32 {
            term = term * q / (T::lit(k as f64) * T::lit((k + 1) as f64));
            sum = sum + term;
            if term.abs() <= T::epsilon() * sum.abs() {
                break;
            }
        }
        sum
    } else {
        bessel_j1(x) / x
    }
}

/// Surface measure of the unit sphere `S^{d-1}`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => {
            let h = d as f64 / 2.0;
            2.0 * std::f64::consts::PI.powf(h) / statrs::function::gamma::gamma(h)
        }
    }
}

/// Spherical average of `cos(x θ₁)` over the unit sphere in dimension `d`
/// (`cos`, `J0`, `sin x / x` for d = 1, 2, 3) and its first two derivatives.
pub fn spherical_wave<T: Real>(d: usize, x: T, order: usize) -> T {
    match (d, order) {
        (1, 0) => x.cos(),
        (1, 1) => -x.sin(),
        (1, 2) => -x.cos(),
        (2, 0) => bessel_j0(x),
        (2, 1) => -bessel_j1(x),
        (2, 2) => -(bessel_j0(x) - j1_over_x(x)),
        (3, _) => sinc_derivative(x, order),
        _ => panic!("spherical_wave supports d <= 3 and order <= 2"),
    }
}

fn sinc_derivative<T: Real>(x: T, order: usize) -> T {
    if x.abs() < T::one() {
        // Σ (-1)^k x^{2k} / (2k+1)! differentiated termwise
        let mut sum = T::zero();
        let mut fact = T::one(); // (2k+1)!
        for k in 0..20i32 {
            if k > 0 {
                fact = fact * T::lit((2 * k) as f64) * T::lit((2 * k + 1) as f64);
            }
            let sign = if k % 2 == 0 { T::one() } else { -T::one() };
            let kk = T::lit((2 * k) as f64);
            let term = match order {
                0 => x.powi(2 * k),
                1 if k == 0 => T::zero(),
                1 => kk * x.powi(2 * k - 1),
                _ if k == 0 => T::zero(),
                _ => kk * (kk - T::one()) * x.powi(2 * k - 2),
            };
            sum = sum + sign * term / fact;
        }
        sum
    } else {
        let s = x.sin();
        let c = x.cos();
        let j0 = s / x;
        let j0p = (x * c - s) / (x * x);
        match order {
            0 => j0,
            1 => j0p,
            _ => -j0 - T::lit(2.0) * j0p / x,
        }
    }
}

/// Taylor coefficient of `ρ^{2m}` in `1 − ω_d(ρ)` (m ≥ 1).
pub fn one_minus_wave_coefficient(d: usize, m: u32) -> f64 {
    let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
    let ln = match d {
        1 => statrs::function::gamma::ln_gamma(2.0 * m as f64 + 1.0),
        2 => {
            (m as f64) * 4f64.ln() + 2.0 * statrs::function::gamma::ln_gamma(m as f64 + 1.0)
        }
        3 => statrs::function::gamma::ln_gamma(2.0 * m as f64 + 2.0),
        _ => panic!("supported dimensions are 1..=3"),
    };
    sign * (-ln).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_reference_values() {
        // values from standard tables
        let cases = [
            (0.5, 0.938_469_807_240_813, 0.242_268_457_674_873_9),
            (2.4048255576957727, 0.0, 0.519_147_497_289_466_9),
            (10.0, -0.245_935_764_451_348_3, 0.043_472_746_168_861_4),
            (25.0, 0.096_266_783_275_958_0, -0.125_350_249_580_289_8),
        ];
        for (x, j0, j1) in cases {
            assert!((bessel_j0::<f64>(x) - j0).abs() < 1e-10, "J0({x})");
            assert!((bessel_j1::<f64>(x) - j1).abs() < 1e-10, "J1({x})");
        }
    }

    #[test]
    fn bessel_continuity_at_switch() {
        let a = bessel_series(0, SERIES_SWITCH);
        let b = bessel_asymptotic(0, SERIES_SWITCH);
        assert!((a - b).abs() < 1e-10);
        let a = bessel_series(1, SERIES_SWITCH);
        let b = bessel_asymptotic(1, SERIES_SWITCH);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn wave_derivatives_match_finite_differences() {
        for d in 1..=3 {
            for &x in &[0.3f64, 0.99, 1.01, 4.0, 13.0] {
                let h = 1e-5;
                let fd1: f64 = (spherical_wave(d, x + h, 0) - spherical_wave(d, x - h, 0)) / (2.0 * h);
                let fd2: f64 = (spherical_wave(d, x + h, 1) - spherical_wave(d, x - h, 1)) / (2.0 * h);
                assert!((fd1 - spherical_wave(d, x, 1)).abs() < 1e-8, "d={d} x={x}");
                assert!((fd2 - spherical_wave(d, x, 2)).abs() < 1e-8, "d={d} x={x}");
            }
            assert!((spherical_wave(d, 0.0, 2) + 1.0 / d as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn one_minus_wave_series() {
        for d in 1..=3 {
            let x: f64 = 0.7;
            let s: f64 = (1..20).map(|m| one_minus_wave_coefficient(d, m) * x.powi(2 * m as i32)).sum();
            assert!((s - (1.0 - spherical_wave(d, x, 0))).abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_areas() {
        assert_eq!(sphere_area(1), 2.0);
        assert!((sphere_area(4) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
    }
}
