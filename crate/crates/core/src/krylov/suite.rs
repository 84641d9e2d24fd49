//! The function suite for occupation-integral studies. Members live on a
//! ball `B(x₀, R)` and are written in scaled coordinates `s = (x - x₀)/R`,
//! so one suite definition serves every radius.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::operator::function::{point, Integrand, Tail};
use crate::rng::SeedTree;
use crate::sphere::{dot, norm, ray_sphere_crossings, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Smooth,
    Indicator,
    Oscillatory,
    Shrinking,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Smooth => "smooth",
            Family::Indicator => "indicator",
            Family::Oscillatory => "oscillatory",
            Family::Shrinking => "shrinking",
        }
    }
}

type Profile = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// `x ↦ scale · φ((x - x₀)/R)` on `B(x₀, R)`, zero outside.
#[derive(Clone)]
pub struct SuiteFunction {
    pub id: String,
    pub family: Family,
    center: Vec<f64>,
    radius: f64,
    scale: f64,
    profile: Arc<Profile>,
    /// `sup |φ|`
    profile_sup: f64,
    /// Spheres `(q, r)` in scaled coordinates across which `φ` jumps.
    spheres: Vec<(Vec<f64>, f64)>,
    /// Normals of hyperplanes through `x₀` across which `φ` jumps.
    planes: Vec<Vec<f64>>,
    /// Radius of the smallest ball about `x₀` holding the support, scaled.
    reach: f64,
}

impl fmt::Debug for SuiteFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SuiteFunction")
            .field("id", &self.id)
            .field("family", &self.family)
            .field("radius", &self.radius)
            .field("scale", &self.scale)
            .finish()
    }
}

impl SuiteFunction {
    fn new<F>(id: impl Into<String>, family: Family, center: &[f64], radius: f64, sup: f64, profile: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            family,
            center: center.to_vec(),
            radius,
            scale: 1.0,
            profile: Arc::new(profile),
            profile_sup: sup,
            spheres: Vec::new(),
            planes: Vec::new(),
            reach: 1.0,
        }
    }

    fn jumps_on(mut self, q: Vec<f64>, r: f64) -> Self {
        self.spheres.push((q, r));
        self
    }

    fn reaching(mut self, reach: f64) -> Self {
        self.reach = reach;
        self
    }

    /// The same member multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            scale: self.scale * s,
            ..self.clone()
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    fn scaled_coords(&self, x: &[f64], s: &mut [f64]) -> f64 {
        for i in 0..x.len() {
            s[i] = (x[i] - self.center[i]) / self.radius;
        }
        norm(&s[..x.len()])
    }
}

impl Integrand for SuiteFunction {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let mut s = [0.0; MAX_DIM];
        if self.scaled_coords(x, &mut s) >= 1.0 {
            return 0.0;
        }
        self.scale * (self.profile)(&s[..x.len()])
    }
    fn tail(&self) -> Tail {
        Tail::Compact {
            center: point(&self.center),
            radius: self.radius * self.reach.min(1.0),
        }
    }
    fn sup_norm(&self) -> f64 {
        self.scale.abs() * self.profile_sup
    }
    fn ray_breaks(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut b = ray_sphere_crossings(x, theta, &self.center, self.radius);
        let mut c = [0.0; MAX_DIM];
        for (q, r) in &self.spheres {
            for i in 0..d {
                c[i] = self.center[i] + self.radius * q[i];
            }
            b.extend(ray_sphere_crossings(x, theta, &c[..d], self.radius * r));
        }
        for n in &self.planes {
            let den = dot(theta, n);
            if den != 0.0 {
                let off: f64 = (0..d).map(|i| (x[i] - self.center[i]) * n[i]).sum();
                let t = -off / den;
                if t > 0.0 {
                    b.push(t);
                }
            }
        }
        b.sort_by(f64::total_cmp);
        b
    }
}

fn e1(d: usize, v: f64) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[0] = v;
    e
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn bump(q: f64) -> f64 {
    if q < 1.0 {
        let w = 1.0 - q * q;
        w * w
    } else {
        0.0
    }
}

/// The twenty-member suite on `B(center, R)`: smooth bumps, indicators,
/// sign-changing oscillations and a shrinking-support family. The last four
/// members are bumps placed from the `seed`.
pub fn krylov_suite(center: &[f64], r: f64, seed: u64) -> Vec<SuiteFunction> {
    let d = center.len();
    let c = center;
    let mut out = vec![
        SuiteFunction::new("one", Family::Smooth, c, r, 1.0, |_| 1.0),
        SuiteFunction::new("bump", Family::Smooth, c, r, 1.0, |s| bump(norm(s))),
        SuiteFunction::new("bump_half", Family::Smooth, c, r, 1.0, |s| bump(2.0 * norm(s))).reaching(0.5),
        {
            let q = e1(d, 0.4);
            let q2 = q.clone();
            SuiteFunction::new("bump_offset", Family::Smooth, c, r, 1.0, move |s| bump(dist(s, &q2) / 0.5))
                .jumps_on(q, 0.5)
                .reaching(0.9)
        },
        SuiteFunction::new("ind_ball", Family::Indicator, c, r, 1.0, |s| (norm(s) < 0.75) as u8 as f64)
            .jumps_on(vec![0.0; d], 0.75)
            .reaching(0.75),
        {
            let mut f = SuiteFunction::new("ind_half", Family::Indicator, c, r, 1.0, |s| (s[0] >= 0.0) as u8 as f64);
            f.planes.push(e1(d, 1.0));
            f
        },
        SuiteFunction::new("ind_annulus", Family::Indicator, c, r, 1.0, |s| (norm(s) >= 0.5) as u8 as f64)
            .jumps_on(vec![0.0; d], 0.5),
        {
            let q = e1(d, 0.5);
            let q2 = q.clone();
            SuiteFunction::new("ind_offset", Family::Indicator, c, r, 1.0, move |s| {
                (dist(s, &q2) < 0.25) as u8 as f64
            })
            .jumps_on(q, 0.25)
            .reaching(0.75)
        },
        SuiteFunction::new("osc_cos2", Family::Oscillatory, c, r, 1.5, |s| {
            (2.0 * std::f64::consts::PI * s[0]).cos() + 0.5
        }),
        SuiteFunction::new("osc_cos4", Family::Oscillatory, c, r, 1.5, |s| {
            (4.0 * std::f64::consts::PI * s[0]).cos() + 0.5
        }),
        SuiteFunction::new("osc_radial", Family::Oscillatory, c, r, 1.5, |s| {
            let q = norm(s);
            (1.0 - q * q) * ((6.0 * std::f64::consts::PI * q).cos() + 0.5)
        }),
        SuiteFunction::new("osc_cos5", Family::Oscillatory, c, r, 1.5, |s| {
            let q = norm(s);
            (1.0 - q * q) * ((5.0 * std::f64::consts::PI * s[0]).cos() + 0.5)
        }),
    ];
    for (j, eps) in [0.5, 0.25, 0.125].into_iter().enumerate() {
        out.push(
            SuiteFunction::new(format!("shrink_{}", 2u32 << j), Family::Shrinking, c, r, 1.0, move |s| {
                (norm(s) < eps) as u8 as f64
            })
            .jumps_on(vec![0.0; d], eps)
            .reaching(eps),
        );
    }
    out.push(
        SuiteFunction::new("shrink_bump_8", Family::Shrinking, c, r, 1.0, |s| bump(8.0 * norm(s))).reaching(0.125),
    );
    let mut rng = SeedTree::new(seed).named("krylov-suite").stream();
    for j in 0..4 {
        let mut q = vec![0.0; d];
        loop {
            for v in q.iter_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
            if norm(&q) <= 0.5 {
                break;
            }
        }
        let width: f64 = rng.random_range(0.2..0.5);
        let amp: f64 = rng.random_range(0.5..1.5);
        let q2 = q.clone();
        let reach = (norm(&q) + width).min(1.0);
        out.push(
            SuiteFunction::new(format!("random_bump_{j}"), Family::Smooth, c, r, amp, move |s| {
                amp * bump(dist(s, &q2) / width)
            })
            .jumps_on(q, width)
            .reaching(reach),
        );
    }
    out
}
