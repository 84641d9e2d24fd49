//! Piecewise-linear interpolation tables on an interval, built by adaptive
//! midpoint refinement. Used to cache expensive scalar fields (excess jump
//! rate, generator values) along one-dimensional simulation boxes.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct TableOptions {
    /// Number of equally spaced seed nodes (≥ 2).
    pub initial: usize,
    /// Split an interval while linear interpolation misses the midpoint by more than this.
    pub abs_tol: f64,
    /// Smallest interval that is still split; jumps end up isolated to this width.
    pub min_width: f64,
    pub max_nodes: usize,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            initial: 65,
            abs_tol: 1e-4,
            min_width: 1e-9,
            max_nodes: 200_000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdaptiveTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl AdaptiveTable {
    /// Tabulates `f` on `[lo, hi]` by refining every interval whose midpoint
    /// disagrees with the chord. Evaluations run in parallel, one refinement
    /// level at a time, so the result does not depend on scheduling.
    pub fn build<F>(f: F, lo: f64, hi: f64, opts: TableOptions) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Sync,
    {
        if !(hi > lo) || opts.initial < 2 {
            return Err(Error::param("table", "need lo < hi and at least two seed nodes"));
        }
        let n0 = opts.initial;
        let mut xs: Vec<f64> = (0..n0)
            .map(|i| lo + (hi - lo) * i as f64 / (n0 - 1) as f64)
            .collect();
        let mut ys: Vec<f64> = xs.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
        // intervals still under inspection, as indices of their left node
        let mut active: Vec<usize> = (0..n0 - 1).collect();
        while !active.is_empty() {
            let mids: Vec<f64> = active.iter().map(|&i| 0.5 * (xs[i] + xs[i + 1])).collect();
            let fm: Vec<f64> = mids.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
            let mut split = vec![false; xs.len() - 1];
            let mut mid_val = vec![(0.0, 0.0); xs.len() - 1];
            for (j, &i) in active.iter().enumerate() {
                let chord = 0.5 * (ys[i] + ys[i + 1]);
                if (fm[j] - chord).abs() > opts.abs_tol && xs[i + 1] - xs[i] > opts.min_width {
                    split[i] = true;
                    mid_val[i] = (mids[j], fm[j]);
                }
            }
            let mut nx = Vec::with_capacity(xs.len() + active.len());
            let mut ny = Vec::with_capacity(xs.len() + active.len());
            let mut next_active = Vec::new();
            for i in 0..xs.len() {
                nx.push(xs[i]);
                ny.push(ys[i]);
                if i + 1 < xs.len() && split[i] {
                    next_active.push(nx.len() - 1);
                    nx.push(mid_val[i].0);
                    ny.push(mid_val[i].1);
                    next_active.push(nx.len() - 1);
                }
            }
            xs = nx;
            ys = ny;
            active = next_active;
            if xs.len() > opts.max_nodes {
                return Err(Error::Validation(format!(
                    "table exceeded {} nodes before reaching tolerance {:e}",
                    opts.max_nodes, opts.abs_tol
                )));
            }
        }
        Ok(Self { xs, ys })
    }

    /// Plain table on `n` equally spaced nodes.
    pub fn uniform<F>(f: F, lo: f64, hi: f64, n: usize) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Sync,
    {
        if !(hi > lo) || n < 2 {
            return Err(Error::param("table", "need lo < hi and at least two nodes"));
        }
        let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let ys = xs.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
        Ok(Self { xs, ys })
    }

    pub fn constant(lo: f64, hi: f64, value: f64) -> Self {
        Self {
            xs: vec![lo, hi],
            ys: vec![value, value],
        }
    }

    pub fn lo(&self) -> f64 {
        self.xs[0]
    }

    pub fn hi(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo() && x <= self.hi()
    }

    pub fn min_value(&self) -> f64 {
        self.ys.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear interpolation; `None` outside the tabulated interval.
    pub fn get(&self, x: f64) -> Option<f64> {
        if !self.contains(x) {
            return None;
        }
        let i = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            p if p >= self.xs.len() => self.xs.len() - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        Some(self.ys[i] + w * (self.ys[i + 1] - self.ys[i]))
    }

    /// Largest absolute interpolation error at `n` uniformly drawn points.
    pub fn worst_error<F, R>(&self, f: F, n: usize, rng: &mut R) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64> + Sync,
        R: Rng + ?Sized,
    {
        let pts: Vec<f64> = (0..n).map(|_| rng.random_range(self.lo()..=self.hi())).collect();
        let errs: Vec<f64> = pts
            .par_iter()
            .map(|&x| Ok((f(x)? - self.get(x).unwrap()).abs()))
            .collect::<Result<_>>()?;
        Ok(errs.into_iter().fold(0.0, f64::max))
    }
}
