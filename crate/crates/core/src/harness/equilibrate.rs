//! Two-sided power-of-two scaling `A' = R A C`.
//!
//! Every factor is a power of two, so scaling and unscaling are exact.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Vector};

/// Largest power of two not exceeding `1 / m`, for finite `m > 0`.
fn recip_pow2_floor(m: f64) -> f64 {
    debug_assert!(m > 0.0 && m.is_finite());
    // Normalize subnormals so the exponent field is meaningful.
    let (m, shift) = if m < f64::MIN_POSITIVE { (m * 2f64.powi(64), 64) } else { (m, 0) };
    let bits = m.to_bits();
    let e = ((bits >> 52) & 0x7ff) as i32 - 1023 - shift;
    let exact = bits & ((1u64 << 52) - 1) == 0;
    let k = if exact { -e } else { -e - 1 };
    2f64.powi(k.min(1023))
}

/// Scale `a` in place and return `(r, c)`: first each row by the power of
/// two at or below its inverse max, then each column of the result likewise.
pub fn equilibrate_in_place(a: &mut DenseMatrix) -> Result<(Vector, Vector)> {
    let (rows, cols) = (a.rows(), a.cols());
    let mut row_max = vec![0.0f64; rows];
    for j in 0..cols {
        for (m, v) in row_max.iter_mut().zip(a.col(j)) {
            *m = m.max(v.abs());
        }
    }
    if let Some(i) = row_max.iter().position(|&m| m == 0.0) {
        return Err(Error::ZeroRow(i));
    }
    let r: Vec<f64> = row_max.iter().map(|&m| recip_pow2_floor(m)).collect();
    let mut c = Vec::with_capacity(cols);
    for j in 0..cols {
        let col = a.col_mut(j);
        let mut m = 0.0f64;
        for (v, &ri) in col.iter_mut().zip(&r) {
            *v *= ri;
            m = m.max(v.abs());
        }
        if m == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        let cj = recip_pow2_floor(m);
        for v in col {
            *v *= cj;
        }
        c.push(cj);
    }
    Ok((r.into(), c.into()))
}

pub fn equilibrate(a: &DenseMatrix) -> Result<(DenseMatrix, Vector, Vector)> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "equilibration needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let mut out = a.clone();
    let (r, c) = equilibrate_in_place(&mut out)?;
    Ok((out, r, c))
}

/// `R b`.
pub fn scale_rhs(b: &[f64], r: &[f64]) -> Vector {
    b.iter().zip(r).map(|(x, s)| x * s).collect()
}

/// Recover `x = C y` from the solution `y` of `(R A C) y = R b`.
pub fn unscale_solution(y: &[f64], c: &[f64]) -> Vector {
    y.iter().zip(c).map(|(x, s)| x * s).collect()
}
