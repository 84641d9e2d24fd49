//! Path simulation of the process generated by the truncated operator `ℒ_k`.
//!
//! The base process is the stable process with jumps `|h| ≤ 1/k`. Every jump
//! `|h| > 1/k`, stable part included, is added by Meyer's construction: the
//! clock `C_t = ∫ N(X_s) ds` runs against independent unit exponentials and
//! each crossing inserts a jump drawn from `n(x,h)|h|^{-d-α}/N(x)`. So even
//! `n ≡ 1` has insertions, which then restore the big stable jumps.
//!
//! The clock uses the left-point rule and an insertion lands at the end of
//! the crossing step. After a crossing the clock keeps its overshoot
//! `C - S`; thresholds then accumulate as `S₁, S₁+S₂, …`, so for constant
//! `N` the insertion count up to a grid time is exactly Poisson.

pub mod base;
pub mod checks;
pub mod io;
pub mod rate;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::JumpKernel;
use crate::rng::SeedTree;
use crate::sphere::{distance, sample_direction};
use crate::stable::StableParams;

pub use base::{simulate_base_step, truncated_second_moment, BaseStep, SMALL_JUMP_RATIO};
pub use checks::meyer_construction_check;
pub use io::{read_path, write_path, PathRecord};
pub use rate::{cache_excess_rate, excess_rate, sample_insertion_jump, ExcessRate, CACHE_TOLERANCE};

/// Largest allowed `sup N · dt`.
pub const CLOCK_GUARD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Truncation level; inserted jumps have `|h| > 1/k`.
    pub k: u32,
    pub seed: u64,
    pub replica_id: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 1.0,
            k: 8,
            seed: 0,
            replica_id: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("dt", format!("{} must be positive", self.dt)));
        }
        if !(self.horizon >= self.dt) || !self.horizon.is_finite() {
            return Err(Error::param("horizon", format!("{} must be at least dt = {}", self.horizon, self.dt)));
        }
        if self.k == 0 {
            return Err(Error::param("k", "truncation level must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps; the horizon is rounded to the nearest grid time.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Mark {
    /// Only small jumps moved the state.
    BaseMotion = 0,
    /// The base increment contains a resolved stable jump larger than `1/(2k)`.
    StableBigJump = 1,
    /// At least one jump was inserted at the end of the step.
    MeyerInsertion = 2,
}

impl Mark {
    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Mark::BaseMotion),
            1 => Ok(Mark::StableBigJump),
            2 => Ok(Mark::MeyerInsertion),
            _ => Err(Error::Schema(format!("unknown step mark {v}"))),
        }
    }
}

/// State of the insertion clock.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeyerClock {
    /// `C` accumulated since the last threshold.
    pub c: f64,
    /// Current threshold.
    pub s: f64,
    pub insertions: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Insertion {
    pub step: usize,
    pub h: Vec<f64>,
    /// Clock increment consumed since the previous insertion.
    pub consumed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathSkeleton {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Row-major, `dim` entries per time.
    pub states: Vec<f64>,
    pub marks: Vec<Mark>,
    pub insertions: Vec<Insertion>,
    pub clock: MeyerClock,
    pub config: SimConfig,
}

impl PathSkeleton {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Path built from given states on the grid `i·dt`; marks are `BaseMotion`.
    pub fn from_states(dim: usize, states: Vec<f64>, config: SimConfig) -> Result<Self> {
        if dim == 0 || states.is_empty() || states.len() % dim != 0 {
            return Err(Error::Contract("states must hold a whole number of points".into()));
        }
        let n = states.len() / dim;
        Ok(Self {
            dim,
            times: (0..n).map(|i| i as f64 * config.dt).collect(),
            states,
            marks: vec![Mark::BaseMotion; n],
            insertions: Vec::new(),
            clock: MeyerClock { c: 0.0, s: 1.0, insertions: 0 },
            config,
        })
    }
}

/// First grid time with `|X_t - center| ≥ R`. Without an exit returns the
/// configured horizon and `false`; callers treat that as censoring.
pub fn first_exit_time(path: &PathSkeleton, center: &[f64], r: f64) -> (f64, bool) {
    for i in 0..path.len() {
        if distance(path.state(i), center) >= r {
            return (path.times[i], true);
        }
    }
    (path.config.horizon, false)
}

/// Simulator for one `(kernel, params, config)`; replicas differ only in
/// their random streams, `seed → replica → {base, clock, jump}`.
#[derive(Clone, Debug)]
pub struct Simulator {
    pub kernel: JumpKernel,
    pub params: StableParams,
    pub config: SimConfig,
    pub rates: ExcessRate,
    base: BaseStep,
}

impl Simulator {
    pub fn new(kernel: &JumpKernel, params: &StableParams, config: &SimConfig, rates: ExcessRate) -> Result<Self> {
        config.validate()?;
        if rates.k() != config.k {
            return Err(Error::Contract(format!("excess rate for k = {} used with k = {}", rates.k(), config.k)));
        }
        let guard = rates.sup() * config.dt;
        if guard > CLOCK_GUARD {
            return Err(Error::param(
                "dt",
                format!("sup N · dt = {guard:.3} exceeds {CLOCK_GUARD}; reduce dt or k"),
            ));
        }
        check_even(kernel, params.d)?;
        Ok(Self {
            kernel: kernel.clone(),
            params: *params,
            config: config.clone(),
            rates,
            base: BaseStep::new(params, config.k, config.dt)?,
        })
    }

    /// Simulator with `N` evaluated directly (constant for x-independent kernels).
    pub fn direct(kernel: &JumpKernel, params: &StableParams, config: &SimConfig) -> Result<Self> {
        Self::new(kernel, params, config, ExcessRate::direct(kernel, params, config.k)?)
    }

    /// Simulator with `N` tabulated along `x₁ ∈ [lo, hi]` when the kernel
    /// depends on `x` there, constant or direct otherwise.
    pub fn on_box(kernel: &JumpKernel, params: &StableParams, config: &SimConfig, lo: f64, hi: f64) -> Result<Self> {
        let rates = if kernel.x_independent || !(kernel.x_axis_only || params.d == 1) {
            ExcessRate::direct(kernel, params, config.k)?
        } else {
            cache_excess_rate(kernel, params, config.k, lo, hi)?
        };
        Self::new(kernel, params, config, rates)
    }

    /// See [`BaseStep::with_coupling_radius`].
    pub fn with_coupling_radius(mut self, r: f64) -> Result<Self> {
        self.base = self.base.with_coupling_radius(r, &self.params, self.config.dt)?;
        Ok(self)
    }

    pub fn base(&self) -> &BaseStep {
        &self.base
    }

    pub fn path(&self, x0: &[f64], replica: u64) -> Result<PathSkeleton> {
        self.path_until(x0, replica, |_| false)
    }

    /// Path that stops after the first step whose state satisfies `stop`.
    pub fn path_until<F: Fn(&[f64]) -> bool>(&self, x0: &[f64], replica: u64, stop: F) -> Result<PathSkeleton> {
        let d = self.params.d;
        if x0.len() != d {
            return Err(Error::Contract(format!("start of dimension {} for d = {d}", x0.len())));
        }
        let cfg = SimConfig {
            replica_id: replica,
            ..self.config.clone()
        };
        let node = SeedTree::new(cfg.seed).child(replica);
        let mut base_rng = node.named("base").stream();
        let mut clock_rng = node.named("clock").stream();
        let mut jump_rng = node.named("jump").stream();

        let n = cfg.steps();
        let mut times = Vec::with_capacity(n + 1);
        let mut states = Vec::with_capacity((n + 1) * d);
        let mut marks = Vec::with_capacity(n + 1);
        let mut insertions = Vec::new();
        let mut x = x0.to_vec();
        let mut inc = vec![0.0; d];
        let mut h = vec![0.0; d];
        times.push(0.0);
        states.extend_from_slice(&x);
        marks.push(Mark::BaseMotion);
        let mut clock = MeyerClock {
            c: 0.0,
            s: clock_rng.sample(Exp1),
            insertions: 0,
        };
        let half_cut = 0.5 * self.base.cut;
        let mut stopped = stop(&x);
        for i in 1..=n {
            if stopped {
                break;
            }
            clock.c += self.rates.at(&x)? * cfg.dt;
            let largest = self.base.sample(&mut base_rng, &mut inc);
            for (v, dv) in x.iter_mut().zip(&inc) {
                *v += dv;
            }
            let mut mark = if largest > half_cut { Mark::StableBigJump } else { Mark::BaseMotion };
            while clock.c >= clock.s {
                clock.c -= clock.s;
                sample_insertion_jump(&self.kernel, &self.params, cfg.k, &x, &mut jump_rng, &mut h)?;
                for (v, dv) in x.iter_mut().zip(&h) {
                    *v += dv;
                }
                insertions.push(Insertion {
                    step: i,
                    h: h.clone(),
                    consumed: clock.s,
                });
                clock.insertions += 1;
                clock.s = clock_rng.sample(Exp1);
                mark = Mark::MeyerInsertion;
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::Sampler(format!("non-finite state at step {i}")));
            }
            times.push(i as f64 * cfg.dt);
            states.extend_from_slice(&x);
            marks.push(mark);
            stopped = stop(&x);
        }
        Ok(PathSkeleton {
            dim: d,
            times,
            states,
            marks,
            insertions,
            clock,
            config: cfg,
        })
    }

    /// Runs replicas `0..n` in parallel and maps each path; results are in
    /// replica order.
    pub fn replicas<T, S, F>(&self, x0: &[f64], n: usize, stop: S, map: F) -> Result<Vec<T>>
    where
        T: Send,
        S: Fn(&[f64]) -> bool + Sync,
        F: Fn(u64, &PathSkeleton) -> Result<T> + Sync,
    {
        (0..n as u64)
            .into_par_iter()
            .map(|r| {
                let path = self.path_until(x0, r, &stop)?;
                map(r, &path)
            })
            .collect()
    }
}

/// Insertions are drawn without a compensator drift, which is exact only
/// when `n(x, ·)` is even. Rejects kernels that visibly are not.
fn check_even(kernel: &JumpKernel, d: usize) -> Result<()> {
    if kernel.unit {
        return Ok(());
    }
    let mut rng = SeedTree::new(0).named("evenness").stream();
    let mut h = [0.0; 3];
    let mut m = [0.0; 3];
    let mut x = [0.0; 3];
    for _ in 0..64 {
        for v in x.iter_mut().take(d) {
            *v = rng.random_range(-4.0..4.0);
        }
        sample_direction(d, &mut rng, &mut h);
        let r = 10f64.powf(rng.random_range(-2.0..1.0));
        for i in 0..d {
            h[i] *= r;
            m[i] = -h[i];
        }
        let (a, b) = (kernel.eval(&x[..d], &h[..d]), kernel.eval(&x[..d], &m[..d]));
        if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
            return Err(Error::Contract(format!(
                "kernel `{}` is not even in h; inserted jumps would need a compensator drift",
                kernel.label
            )));
        }
    }
    Ok(())
}

/// One path with the excess rate evaluated directly.
pub fn simulate_path(kernel: &JumpKernel, params: &StableParams, config: &SimConfig, x0: &[f64]) -> Result<PathSkeleton> {
    Simulator::direct(kernel, params, config)?.path(x0, config.replica_id)
}
