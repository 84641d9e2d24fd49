use proptest::prelude::*;
use std::f64::consts::PI;

use stablelike::quadrature::GaussKronrod;
use stablelike::special::{bessel_j0, bessel_j1};

fn bessel_integral(order: f64, x: f64) -> f64 {
    let gk = GaussKronrod::new(1e-14, 1e-13).lenient();
    gk.integrate(|th: f64| (order * th - x * th.sin()).cos(), 0.0, PI).unwrap().value / PI
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polynomials_integrate_exactly(n in 0i32..=12, a in -3.0f64..3.0, w in 0.01f64..4.0) {
        let b = a + w;
        let gk = GaussKronrod::new(1e-14, 1e-13);
        let got = gk.integrate(|x: f64| x.powi(n), a, b).unwrap().value;
        let exact = (b.powi(n + 1) - a.powi(n + 1)) / (n + 1) as f64;
        prop_assert!((got - exact).abs() <= 1e-12 * (1.0 + exact.abs()), "{got} vs {exact}");
    }

    #[test]
    fn breaks_do_not_change_the_integral(a in -2.0f64..0.0, m in 0.0f64..1.0, w in 0.5f64..3.0) {
        let b = a + w;
        let mid = a + m * w;
        let gk = GaussKronrod::new(1e-14, 1e-13);
        let f = |x: f64| (-x * x).exp() * (3.0 * x).cos();
        let whole = gk.integrate(f, a, b).unwrap().value;
        let split = gk.integrate_with_breaks(f, &[a, mid, b]).unwrap().value;
        prop_assert!((whole - split).abs() <= 1e-12);
    }

    #[test]
    fn bessel_matches_integral_representation(x in 0.0f64..60.0) {
        prop_assert!((bessel_j0(x) - bessel_integral(0.0, x)).abs() <= 1e-10);
        prop_assert!((bessel_j1(x) - bessel_integral(1.0, x)).abs() <= 1e-10);
    }

    #[test]
    fn bessel_parity(x in 0.0f64..40.0) {
        prop_assert_eq!(bessel_j0(-x), bessel_j0(x));
        prop_assert!((bessel_j1(-x) + bessel_j1(x)).abs() <= 1e-15);
    }
}
