//! Acceptance formula and reported rate.

use crate::error::{Error, Result};
use crate::linalg::{mat_norm_inf, residual, vec_norm, DenseMatrix, NormKind};
use crate::precision::{unit_roundoff, Format};

/// A run is valid when its scaled backward error is strictly below this.
pub const VALIDITY_THRESHOLD: f64 = 16.0;

/// `||r|| / (||A|| ||x|| + ||b||) / (n eps)` from precomputed infinity norms,
/// with `eps = 2^-53`.
pub fn scaled_backward_error(norm_r: f64, norm_a: f64, norm_x: f64, norm_b: f64, n: usize) -> Result<f64> {
    let denom = norm_a * norm_x + norm_b;
    if denom == 0.0 {
        return Err(Error::DegenerateSystem);
    }
    Ok(norm_r / denom / (n as f64 * unit_roundoff(Format::Binary64)))
}

pub fn backward_error(a: &DenseMatrix, x: &[f64], b: &[f64]) -> Result<f64> {
    let r = residual(a, x, b)?;
    scaled_backward_error(
        vec_norm(&r, NormKind::Inf),
        mat_norm_inf(a),
        vec_norm(x, NormKind::Inf),
        vec_norm(b, NormKind::Inf),
        a.rows(),
    )
}

/// Strict threshold test; NaN is invalid.
pub fn validate(berr: f64) -> bool {
    berr < VALIDITY_THRESHOLD
}

/// Canonical operation count `2/3 n^3 + 3/2 n^2` divided by `t_total`.
///
/// The count is formed exactly as the integer `(4 n^3 + 9 n^2)` and divided
/// by 6 once, so it is the correctly rounded value for every supported `n`.
pub fn figure_of_merit(n: usize, t_total: f64) -> f64 {
    let n = n as u128;
    let sixfold = 4 * n * n * n + 9 * n * n;
    (sixfold as f64 / 6.0) / t_total
}
