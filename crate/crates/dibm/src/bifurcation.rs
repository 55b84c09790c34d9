//! Solar-constant sweep assembling the bifurcation diagram, plus fold
//! refinement.

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibria::{boundary_equilibria, find_interior_roots, RootKind};
use crate::error::{ModelError, Result};
use crate::physics::Params;

/// Bisection width on the solar constant at which the fold is accepted.
const FOLD_TOL: f64 = 1e-3;

/// One point of a bifurcation branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumBranch {
    pub solar_constant: f64,
    pub eta: f64,
    pub stable: bool,
    pub kind: RootKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationTable {
    /// Rows sorted by (solar constant, iceline).
    pub rows: Vec<EquilibriumBranch>,
    /// Reference marker: the present-day solar constant of the sweep.
    pub q_current: f64,
}

impl BifurcationTable {
    pub fn rows_at(&self, q: f64) -> impl Iterator<Item = &EquilibriumBranch> {
        self.rows.iter().filter(move |r| r.solar_constant == q)
    }
}

/// Compute interior and boundary branches for every solar constant in
/// `[q_min, q_max]` with spacing `q_step`.
pub fn sweep(q_min: f64, q_max: f64, q_step: f64, params: &Params) -> Result<BifurcationTable> {
    let bracket_ok = q_min < q_max && q_step > 0.0;
    if !bracket_ok {
        return Err(ModelError::InvalidArgument(format!(
            "sweep needs q_min < q_max and q_step > 0 (got {q_min}, {q_max}, {q_step})"
        )));
    }
    let count = ((q_max - q_min) / q_step + 1e-9).floor() as usize + 1;
    let per_q: Result<Vec<Vec<EquilibriumBranch>>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let q = q_min + i as f64 * q_step;
            let p = params
                .with_solar_constant(q)
                .map_err(|e| ModelError::InvalidArgument(e.to_string()))?;
            let mut rows: Vec<EquilibriumBranch> = find_interior_roots(&p)
                .into_iter()
                .chain(boundary_equilibria(&p))
                .map(|r| EquilibriumBranch {
                    solar_constant: q,
                    eta: r.eta,
                    stable: r.stable,
                    kind: r.kind,
                })
                .collect();
            rows.sort_by(|a, b| a.eta.total_cmp(&b.eta));
            Ok(rows)
        })
        .collect();
    Ok(BifurcationTable {
        rows: per_q?.into_iter().flatten().collect(),
        q_current: params.solar_constant(),
    })
}

fn interior_count(q: f64, params: &Params) -> Result<usize> {
    let p = params
        .with_solar_constant(q)
        .map_err(|e| ModelError::InvalidArgument(e.to_string()))?;
    Ok(find_interior_roots(&p).len())
}

/// Refine the solar constant at which the interior root count changes
/// between `q_lo` and `q_hi` by bisection on the count.
pub fn fold_locate(params: &Params, q_lo: f64, q_hi: f64) -> Result<f64> {
    let count_lo = interior_count(q_lo, params)?;
    let count_hi = interior_count(q_hi, params)?;
    if count_lo == count_hi {
        return Err(ModelError::FoldBracket {
            q_lo,
            q_hi,
            count_lo,
            count_hi,
        });
    }
    let (mut lo, mut hi) = (q_lo, q_hi);
    while hi - lo > FOLD_TOL {
        let mid = 0.5 * (lo + hi);
        if interior_count(mid, params)? == count_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
