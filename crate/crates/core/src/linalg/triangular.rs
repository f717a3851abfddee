//! Triangular solves with every operation rounded to a working format.
//!
//! Each unknown is formed in textbook order: subtract the known terms one
//! at a time in ascending index order, then divide by the diagonal. This
//! matches unblocked Gaussian elimination bit for bit, which the LU tests
//! rely on.

use super::matrix::{MatMut, MatRef};
use crate::error::{Error, Result};
use crate::precision::{with_rounding, Format, Rounding};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Solve `T X = B`.
    Left,
    /// Solve `X T = B`.
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Uplo {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Diag {
    Unit,
    NonUnit,
}

/// Rows processed together by right-side solves so the working set stays in
/// cache; rows are independent there, so the grouping changes nothing.
const ROW_CHUNK: usize = 256;

pub(crate) fn trsm_view(
    side: Side,
    uplo: Uplo,
    diag: Diag,
    t: MatRef<'_>,
    b: MatMut<'_>,
    fmt: Format,
) -> Result<()> {
    if diag == Diag::NonUnit {
        if let Some(i) = (0..t.rows).find(|&i| t.at(i, i) == 0.0) {
            return Err(Error::SingularDiagonal(i));
        }
    }
    let unit = diag == Diag::Unit;
    with_rounding!(fmt, Q => match (side, uplo) {
        (Side::Left, Uplo::Lower) => left_lower::<Q>(t, b, unit),
        (Side::Left, Uplo::Upper) => left_upper::<Q>(t, b, unit),
        (Side::Right, Uplo::Upper) => right_upper::<Q>(t, b, unit),
        (Side::Right, Uplo::Lower) => right_lower::<Q>(t, b, unit),
    });
    Ok(())
}

fn left_lower<Q: Rounding>(t: MatRef<'_>, mut b: MatMut<'_>, unit: bool) {
    let n = t.rows;
    for j in 0..b.cols {
        let x = b.col_mut(j);
        for k in 0..n {
            if !unit {
                x[k] = Q::round(x[k] / t.at(k, k));
            }
            let xk = x[k];
            let tcol = &t.data[k * t.ld..k * t.ld + n];
            for (xi, &l) in x[k + 1..n].iter_mut().zip(&tcol[k + 1..n]) {
                *xi = Q::round(*xi - Q::round(l * xk));
            }
        }
    }
}

fn left_upper<Q: Rounding>(t: MatRef<'_>, mut b: MatMut<'_>, unit: bool) {
    let n = t.rows;
    for j in 0..b.cols {
        let x = b.col_mut(j);
        for k in (0..n).rev() {
            if !unit {
                x[k] = Q::round(x[k] / t.at(k, k));
            }
            let xk = x[k];
            let tcol = &t.data[k * t.ld..k * t.ld + k];
            for (xi, &u) in x[..k].iter_mut().zip(tcol) {
                *xi = Q::round(*xi - Q::round(u * xk));
            }
        }
    }
}

/// `X U = B`, column by column: `x_j = (b_j - sum_{k<j} x_k u_kj) / u_jj`.
fn right_upper<Q: Rounding>(t: MatRef<'_>, b: MatMut<'_>, unit: bool) {
    let n = t.rows;
    let (rows, ld) = (b.rows, b.ld);
    let mut r0 = 0;
    while r0 < rows {
        let r1 = (r0 + ROW_CHUNK).min(rows);
        for j in 0..n {
            for k in 0..j {
                let u = t.at(k, j);
                let (head, tail) = b.data.split_at_mut(j * ld);
                let xk = &head[k * ld + r0..k * ld + r1];
                let xj = &mut tail[r0..r1];
                for (d, &s) in xj.iter_mut().zip(xk) {
                    *d = Q::round(*d - Q::round(s * u));
                }
            }
            if !unit {
                let d = t.at(j, j);
                for v in &mut b.data[j * ld + r0..j * ld + r1] {
                    *v = Q::round(*v / d);
                }
            }
        }
        r0 = r1;
    }
}

/// `X L = B`, columns from last to first.
fn right_lower<Q: Rounding>(t: MatRef<'_>, b: MatMut<'_>, unit: bool) {
    let n = t.rows;
    let (rows, ld) = (b.rows, b.ld);
    let mut r0 = 0;
    while r0 < rows {
        let r1 = (r0 + ROW_CHUNK).min(rows);
        for j in (0..n).rev() {
            for k in j + 1..n {
                let l = t.at(k, j);
                let (head, tail) = b.data.split_at_mut(k * ld);
                let xk = &tail[r0..r1];
                let xj = &mut head[j * ld + r0..j * ld + r1];
                for (d, &s) in xj.iter_mut().zip(xk) {
                    *d = Q::round(*d - Q::round(s * l));
                }
            }
            if !unit {
                let d = t.at(j, j);
                for v in &mut b.data[j * ld + r0..j * ld + r1] {
                    *v = Q::round(*v / d);
                }
            }
        }
        r0 = r1;
    }
}
