//! Grid check of the three power-law envelopes for the resolvent and its
//! first two derivatives.

use rayon::prelude::*;
use serde_json::json;

use super::params::StableParams;
use super::resolvent::{RadiusGrid, Resolvent};
use crate::error::{Error, Result};
use crate::report::{relative_delta, CheckReport};

/// `((1/λ)ρ^{-2α} ∧ 1) ρ^{-d+α-j}`
pub fn envelope(params: &StableParams, rho: f64, j: usize) -> f64 {
    let a = params.alpha;
    let small = rho.powf(-2.0 * a) / params.lambda;
    small.min(1.0) * rho.powf(-(params.d as f64) + a - j as f64)
}

/// Supremum over the grid of each ratio, with the radius attaining it.
#[derive(Clone, Copy, Debug)]
pub struct BoundSuprema {
    pub sup: [f64; 3],
    pub argmax: [f64; 3],
}

fn suprema(res: &Resolvent, radii: &[f64]) -> Result<BoundSuprema> {
    let d = res.params.d as f64;
    let rows: Vec<[f64; 3]> = radii
        .par_iter()
        .map(|&rho| {
            let jet = res.jet(rho)?;
            // at x = ρe₁ the gradient is r'e₁ and the Hessian is diag(r'', r'/ρ, ...)
            let q0 = jet.value;
            let q1 = jet.d1.abs();
            let q2 = jet.d2.abs() + (d - 1.0) * jet.d1.abs() / rho;
            Ok([
                q0 / envelope(&res.params, rho, 0),
                q1 / envelope(&res.params, rho, 1),
                q2 / envelope(&res.params, rho, 2),
            ])
        })
        .collect::<Result<_>>()?;
    let mut out = BoundSuprema {
        sup: [0.0; 3],
        argmax: [0.0; 3],
    };
    for (row, &rho) in rows.iter().zip(radii) {
        for j in 0..3 {
            if row[j] > out.sup[j] {
                out.sup[j] = row[j];
                out.argmax[j] = rho;
            }
        }
    }
    Ok(out)
}

/// Ratios of `r^λ`, `Σ|∂_i r^λ|` and `Σ|∂_ij r^λ|` to their envelopes on
/// `grid` and on its refinement. Passes when every supremum is finite and
/// moves by less than 5% under refinement.
pub fn check_resolvent_bounds(params: &StableParams, grid: RadiusGrid) -> Result<CheckReport> {
    if grid.rho_min < 1e-2 || grid.rho_max > 1e2 {
        return Err(Error::param("radius_grid", "must lie within [1e-2, 1e2]"));
    }
    let res = Resolvent::new(params)?;
    let coarse = suprema(&res, &grid.radii())?;
    let fine = suprema(&res, &grid.refined().radii())?;

    let mut report = CheckReport::new("resolvent_bounds");
    report.params = json!(params);
    report.grid_spec = json!({"coarse": grid, "refined": grid.refined()});
    let mut worst_delta: f64 = 0.0;
    let mut finite = true;
    for (j, name) in ["value", "gradient", "hessian"].iter().enumerate() {
        let delta = relative_delta(coarse.sup[j], fine.sup[j]);
        worst_delta = worst_delta.max(delta);
        finite &= fine.sup[j].is_finite() && fine.sup[j] > 0.0;
        report
            .metric(format!("{name}_sup"), fine.sup[j])
            .metric(format!("{name}_sup_coarse"), coarse.sup[j])
            .metric(format!("{name}_argmax"), fine.argmax[j])
            .metric(format!("{name}_refinement_delta"), delta);
    }
    let rho_max = grid.rho_max;
    let small_branch = rho_max.powf(-2.0 * params.alpha) / params.lambda < 1.0;
    report.metric("small_branch_at_max_radius", if small_branch { 1.0 } else { 0.0 });
    report.fitted_constant = Some(fine.sup.iter().copied().fold(0.0, f64::max));
    report.worst_ratio = report.fitted_constant;
    report.refinement_delta = Some(worst_delta);
    report.pass = finite && worst_delta < 0.05;
    Ok(report)
}
