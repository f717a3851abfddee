//! Pivot-growth and residual-norm experiments over (order, seed) grids.
//!
//! Cells run in parallel and are fully independent; rows come back sorted
//! by `(n, seed)` so the output does not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::validation::scaled_backward_error;
use crate::error::{Error, Result};
use crate::linalg::{gemv_acc, row_abs_sums_acc, vec_norm, NormKind};
use crate::lu::{factor, lu_solve, FactorConfig, Pivoting};
use crate::matgen::{
    for_each_column_block, generate_matrix, generate_rhs, generate_system, DiagScaling, GenSpec,
};
use crate::precision::Format;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PivotRow {
    pub n: usize,
    pub seed: u64,
    pub max_pivot: f64,
    /// Zero-based column of the largest pivot.
    pub max_pivot_col: usize,
    pub sqrt_n: f64,
    pub c58_sqrt_n: f64,
    pub n_045: f64,
}

/// Outcome marker for norm-sweep rows.
pub const STATUS_OK: &str = "ok";
pub const STATUS_SINGULAR: &str = "singular_pivot";
pub const STATUS_NONFINITE: &str = "nonfinite";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub n: usize,
    pub seed: u64,
    pub pivoting: String,
    pub norm1: Option<f64>,
    pub norm2: Option<f64>,
    pub norminf: Option<f64>,
    pub status: String,
}

impl NormRow {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }
}

fn cells(sizes: &[usize], seeds: u64, first_seed: u64) -> Vec<(usize, u64)> {
    let mut out: Vec<(usize, u64)> = sizes
        .iter()
        .flat_map(|&n| (first_seed..first_seed + seeds).map(move |s| (n, s)))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn partial_cfg() -> FactorConfig {
    FactorConfig {
        pivoting: Pivoting::Partial,
        ..FactorConfig::fp64()
    }
}

/// Largest partial-pivoting pivot of unscaled uniform matrices, with the
/// reference curves `sqrt(n)`, `5/8 sqrt(n)` and `n^0.45`.
pub fn experiment_pivot_sweep(sizes: &[usize], seeds: u64, first_seed: u64) -> Result<Vec<PivotRow>> {
    cells(sizes, seeds, first_seed)
        .into_par_iter()
        .map(|(n, seed)| {
            let a = generate_matrix(&GenSpec::uniform(n, seed, DiagScaling::None))?;
            let (_, stats) = factor(a, &partial_cfg())?;
            let sqrt_n = (n as f64).sqrt();
            Ok(PivotRow {
                n,
                seed,
                max_pivot: stats.max_pivot,
                max_pivot_col: stats.max_pivot_col,
                sqrt_n,
                c58_sqrt_n: 0.625 * sqrt_n,
                n_045: (n as f64).powf(0.45),
            })
        })
        .collect()
}

/// Norms of `A x - b` for binary64 direct solves of unscaled uniform
/// systems, with or without pivoting.
pub fn experiment_norm_sweep(
    sizes: &[usize],
    seeds: u64,
    first_seed: u64,
    pivoting: Pivoting,
) -> Result<Vec<NormRow>> {
    let cfg = FactorConfig {
        pivoting,
        ..FactorConfig::fp64()
    };
    cells(sizes, seeds, first_seed)
        .into_par_iter()
        .map(|(n, seed)| {
            let sys = generate_system(&GenSpec::uniform(n, seed, DiagScaling::None))?;
            let mut row = NormRow {
                n,
                seed,
                pivoting: pivoting.cli_name().to_string(),
                norm1: None,
                norm2: None,
                norminf: None,
                status: STATUS_OK.to_string(),
            };
            let f = match factor(sys.a.clone(), &cfg) {
                Ok((f, _)) => f,
                Err(Error::SingularPivot { .. }) => {
                    row.status = STATUS_SINGULAR.to_string();
                    return Ok(row);
                }
                Err(e) => return Err(e),
            };
            let x = lu_solve(&f, &sys.b, Format::Binary64)?;
            let mut r = vec![0.0; n];
            gemv_acc(sys.a.view(), &x, &mut r);
            for (ri, bi) in r.iter_mut().zip(sys.b.iter()) {
                *ri -= bi;
            }
            let norms = [NormKind::One, NormKind::Two, NormKind::Inf].map(|k| vec_norm(&r, k));
            if norms.iter().all(|v| v.is_finite()) {
                row.norm1 = Some(norms[0]);
                row.norm2 = Some(norms[1]);
                row.norminf = Some(norms[2]);
            } else {
                row.status = STATUS_NONFINITE.to_string();
            }
            Ok(row)
        })
        .collect()
}

/// Factor the generated matrix in binary64 without pivoting, solve, and
/// return the scaled backward error of the direct solution.
///
/// Only one copy of the matrix is held: the factorization overwrites it and
/// the residual is formed from a second, streamed pass over the generator,
/// which reproduces the same summation order as an in-memory product.
pub fn direct_fp64_backward_error(spec: &GenSpec) -> Result<f64> {
    let n = spec.n;
    let b = generate_rhs(spec)?;
    let (f, _) = factor(generate_matrix(spec)?, &FactorConfig::fp64())?;
    let x = lu_solve(&f, &b, Format::Binary64)?;
    drop(f);

    let mut ax = vec![0.0; n];
    let mut row_sums = vec![0.0; n];
    for_each_column_block(spec, 256, |j0, blk| {
        gemv_acc(blk.view(), &x[j0..j0 + blk.cols()], &mut ax);
        row_abs_sums_acc(blk.view(), &mut row_sums);
    })?;
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, yi)| bi - yi).collect();
    scaled_backward_error(
        vec_norm(&r, NormKind::Inf),
        row_sums.into_iter().fold(0.0, f64::max),
        vec_norm(&x, NormKind::Inf),
        vec_norm(&b, NormKind::Inf),
        n,
    )
}
