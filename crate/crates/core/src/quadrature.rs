//! Adaptive Gauss–Kronrod quadrature, panel summation for slowly decaying
//! tails, Wynn's epsilon acceleration and Gauss–Legendre rules.
//!
//! Everything here is generic over [`Real`] so the same code runs in `f32`
//! for coarse work and in `f64` for the tolerance-audited paths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_067_491_706,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Absolute/relative stopping rule: stop once `error <= max(abs, rel * |value|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance<T> {
    pub abs: T,
    pub rel: T,
}

impl<T: Real> Tolerance<T> {
    pub fn new(abs: T, rel: T) -> Self {
        Self { abs, rel }
    }

    #[inline]
    pub fn target(&self, value: T) -> T {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

impl<T: Real> Integral<T> {
    pub fn zero() -> Self {
        Self {
            value: T::zero(),
            error: T::zero(),
            evaluations: 0,
        }
    }

    pub fn absorb(&mut self, other: Integral<T>) {
        self.value = self.value + other.value;
        self.error = self.error + other.error;
        self.evaluations += other.evaluations;
    }

    pub fn scale(self, c: T) -> Self {
        Self {
            value: self.value * c,
            error: self.error * c.abs(),
            evaluations: self.evaluations,
        }
    }
}

fn rescale_error<T: Real>(err: T, res_abs: T, res_asc: T) -> T {
    let mut scaled = err.abs();
    if res_asc != T::zero() && scaled != T::zero() {
        let scale = (T::lit(200.0) * scaled / res_asc).powf(T::lit(1.5));
        scaled = if scale < T::one() { res_asc * scale } else { res_asc };
    }
    let eps = T::epsilon();
    if res_abs > T::min_positive_value() / (T::lit(50.0) * eps) {
        let min_err = T::lit(50.0) * eps * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

/// Single 21-point Gauss–Kronrod panel. Returns `(estimate, error)`.
pub fn gk21<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let f_center = f(center);
    let mut res_gauss = T::zero();
    let mut res_kronrod = f_center * T::lit(WGK[10]);
    let mut res_abs = res_kronrod.abs();
    let mut fv1 = [T::zero(); 10];
    let mut fv2 = [T::zero(); 10];

    for j in 0..5 {
        let jtw = 2 * j + 1;
        let abscissa = half_len * T::lit(XGK[jtw]);
        let f1 = f(center - abscissa);
        let f2 = f(center + abscissa);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_gauss = res_gauss + T::lit(WG[j]) * (f1 + f2);
        res_kronrod = res_kronrod + T::lit(WGK[jtw]) * (f1 + f2);
        res_abs = res_abs + T::lit(WGK[jtw]) * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let abscissa = half_len * T::lit(XGK[jtwm1]);
        let f1 = f(center - abscissa);
        let f2 = f(center + abscissa);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_kronrod = res_kronrod + T::lit(WGK[jtwm1]) * (f1 + f2);
        res_abs = res_abs + T::lit(WGK[jtwm1]) * (f1.abs() + f2.abs());
    }

    let mean = res_kronrod * half;
    let mut res_asc = T::lit(WGK[10]) * (f_center - mean).abs();
    for j in 0..10 {
        res_asc = res_asc + T::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let err = (res_kronrod - res_gauss) * half_len;
    let abs_half = half_len.abs();
    (
        res_kronrod * half_len,
        rescale_error(err, res_abs * abs_half, res_asc * abs_half),
    )
}

struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

impl<T: Real> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T: Real> Eq for Panel<T> {}
impl<T: Real> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.as_f64().total_cmp(&other.error.as_f64())
    }
}

/// Globally adaptive 21-point Gauss–Kronrod integrator (QAG-style bisection
/// of the panel with the largest error estimate).
#[derive(Clone, Copy, Debug)]
pub struct GaussKronrod<T> {
    pub tol: Tolerance<T>,
    pub max_intervals: usize,
    /// Fail with [`Error::Numerical`] instead of returning the best estimate
    /// when the tolerance is not reached.
    pub strict: bool,
}

impl<T: Real> GaussKronrod<T> {
    pub fn new(abs: T, rel: T) -> Self {
        Self {
            tol: Tolerance::new(abs, rel),
            max_intervals: 2000,
            strict: true,
        }
    }

    pub fn with_max_intervals(mut self, n: usize) -> Self {
        self.max_intervals = n;
        self
    }

    pub fn lenient(mut self) -> Self {
        self.strict = false;
        self
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, f: F, a: T, b: T) -> Result<Integral<T>> {
        self.integrate_with_breaks(f, &[a, b])
    }

    /// Integrates over `[points[0], points[last]]`, seeding the adaptive
    /// partition with the given (sorted) break points.
    pub fn integrate_with_breaks<F: FnMut(T) -> T>(&self, mut f: F, points: &[T]) -> Result<Integral<T>> {
        if points.len() < 2 {
            return Ok(Integral::zero());
        }
        let mut heap = BinaryHeap::new();
        let mut total = T::zero();
        let mut total_err = T::zero();
        let mut evaluations = 0usize;
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(b > a) {
                continue;
            }
            let (v, e) = gk21(&mut f, a, b);
            evaluations += 21;
            total = total + v;
            total_err = total_err + e;
            heap.push(Panel { a, b, value: v, error: e });
        }
        if !total.is_finite() {
            return Err(self.failure(total, total_err, "non-finite integrand value"));
        }

        let eps = T::epsilon();
        loop {
            if total_err <= self.tol.target(total) {
                break;
            }
            if heap.len() >= self.max_intervals {
                if self.strict {
                    return Err(self.failure(total, total_err, "interval limit reached"));
                }
                break;
            }
            let Some(worst) = heap.pop() else { break };
            let mid = T::lit(0.5) * (worst.a + worst.b);
            let width = worst.b - worst.a;
            if width <= T::lit(100.0) * eps * (worst.a.abs().max(worst.b.abs())).max(T::min_positive_value()) {
                // cannot subdivide further; keep the panel and accept
                heap.push(worst);
                if self.strict && total_err > T::lit(10.0) * self.tol.target(total) {
                    return Err(self.failure(total, total_err, "roundoff limit on subdivision"));
                }
                break;
            }
            let (v1, e1) = gk21(&mut f, worst.a, mid);
            let (v2, e2) = gk21(&mut f, mid, worst.b);
            evaluations += 42;
            total = total - worst.value + v1 + v2;
            total_err = total_err - worst.error + e1 + e2;
            if !total.is_finite() {
                return Err(self.failure(total, total_err, "non-finite integrand value"));
            }
            heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
            heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        }

        // resum to shed accumulated cancellation in the running totals
        let mut value = T::zero();
        let mut error = T::zero();
        for p in heap.iter() {
            value = value + p.value;
            error = error + p.error;
        }
        Ok(Integral { value, error, evaluations })
    }

    fn failure(&self, estimate: T, error: T, detail: &str) -> Error {
        Error::Numerical {
            context: "adaptive Gauss-Kronrod".into(),
            estimate: estimate.as_f64(),
            error: error.as_f64(),
            requested: self.tol.target(estimate).as_f64(),
            detail: detail.into(),
        }
    }
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums; returns
/// the highest even-column entry.
pub fn wynn_epsilon<T: Real>(s: &[T]) -> T {
    let n = s.len();
    if n < 3 {
        return *s.last().unwrap_or(&T::zero());
    }
    let mut prev = vec![T::zero(); n + 1];
    let mut curr = s.to_vec();
    let mut best = s[n - 1];
    for k in 1..n {
        let len = n - k;
        let mut next = Vec::with_capacity(len);
        for i in 0..len {
            let diff = curr[i + 1] - curr[i];
            if diff == T::zero() || !diff.is_finite() {
                return curr[i + 1];
            }
            next.push(prev[i + 1] + T::one() / diff);
        }
        if k % 2 == 0 {
            if let Some(&last) = next.last() {
                if last.is_finite() {
                    best = last;
                }
            }
        }
        prev = curr;
        curr = next;
    }
    best
}

#[derive(Clone, Copy, Debug)]
pub enum PanelGrowth<T> {
    /// Equal panels, suited to oscillatory integrands (use about half a period).
    Fixed(T),
    /// Panel `j` spans `[left, left * ratio]` (after a first panel of the given width).
    Geometric { first: T, ratio: T },
}

#[derive(Clone, Copy, Debug)]
pub struct PanelOptions<T> {
    pub growth: PanelGrowth<T>,
    pub max_panels: usize,
    /// Integrand known to vanish beyond this point.
    pub stop_at: Option<T>,
    /// Apply Wynn's epsilon algorithm to the partial sums.
    pub accelerate: bool,
}

/// Integrates `f` over `[start, ∞)` panel by panel.
///
/// Terminates when the caller-supplied `tail_bound(x)` (a bound on
/// `|∫_x^∞ f|`) drops below the absolute tolerance, when `stop_at` is
/// reached, or when three consecutive epsilon-extrapolated values agree.
pub fn integrate_panels<T, F, B>(
    gk: &GaussKronrod<T>,
    mut f: F,
    start: T,
    opts: &PanelOptions<T>,
    tail_bound: B,
) -> Result<Integral<T>>
where
    T: Real,
    F: FnMut(T) -> T,
    B: Fn(T) -> T,
{
    let mut acc = Integral::zero();
    let mut partials: Vec<T> = Vec::new();
    let mut extrapolated: Vec<T> = Vec::new();
    let mut left = start;
    for j in 0..opts.max_panels {
        let mut right = match opts.growth {
            PanelGrowth::Fixed(w) => left + w,
            PanelGrowth::Geometric { first, ratio } => {
                if j == 0 {
                    left + first
                } else {
                    left * ratio
                }
            }
        };
        let mut last = false;
        if let Some(stop) = opts.stop_at {
            if right >= stop {
                right = stop;
                last = true;
            }
        }
        if right > left {
            let piece = gk.integrate(&mut f, left, right)?;
            acc.absorb(piece);
        }
        partials.push(acc.value);
        if last || tail_bound(right) <= gk.tol.abs {
            return Ok(acc);
        }
        if opts.accelerate && partials.len() >= 8 {
            let from = partials.len().saturating_sub(21);
            let e = wynn_epsilon(&partials[from..]);
            extrapolated.push(e);
            let m = extrapolated.len();
            if m >= 3 {
                let target = gk.tol.target(e);
                let d1 = (extrapolated[m - 1] - extrapolated[m - 2]).abs();
                let d2 = (extrapolated[m - 2] - extrapolated[m - 3]).abs();
                if d1 <= target && d2 <= target {
                    acc.error = acc.error + d1;
                    acc.value = e;
                    return Ok(acc);
                }
            }
        }
        left = right;
    }
    Err(Error::Numerical {
        context: "panel tail summation".into(),
        estimate: acc.value.as_f64(),
        error: partials
            .iter()
            .rev()
            .take(2)
            .fold(T::zero(), |a, &b| if a == T::zero() { b } else { (a - b).abs() })
            .as_f64(),
        requested: gk.tol.abs.as_f64(),
        detail: format!("no convergence after {} panels (last edge {})", opts.max_panels, left),
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Newton iteration in f64, converted at the end
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = z;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = T::lit(-z);
        nodes[n - 1 - i] = T::lit(z);
        weights[i] = T::lit(w);
        weights[n - 1 - i] = T::lit(w);
    }
    (nodes, weights)
}
