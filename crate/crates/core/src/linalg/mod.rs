//! Dense kernels: mixed-precision matrix multiply, triangular solves,
//! matrix-vector products and the norms used by the validation formula.

mod gemm;
mod matrix;
mod triangular;

pub use matrix::{DenseMatrix, Vector};
pub use triangular::{Diag, Side, Uplo};

pub(crate) use gemm::gemm_view;
pub(crate) use matrix::{alloc_zeroed, MatMut, MatRef};
pub(crate) use triangular::trsm_view;

use crate::error::{Error, Result};
use crate::precision::Format;

/// `C <- alpha * A B + beta * C` with operands rounded to `operand_fmt`, the
/// running sum rounded to `accum_fmt` after every fused multiply-add, and
/// the stored result rounded to `C.fmt()`.
#[allow(clippy::too_many_arguments)]
pub fn gemm_mixed(
    c: &mut DenseMatrix,
    a: &DenseMatrix,
    b: &DenseMatrix,
    alpha: f64,
    beta: f64,
    operand_fmt: Format,
    accum_fmt: Format,
) -> Result<()> {
    if a.cols() != b.rows() || a.rows() != c.rows() || b.cols() != c.cols() {
        return Err(Error::DimensionMismatch(format!(
            "C {}x{} <- A {}x{} * B {}x{}",
            c.rows(),
            c.cols(),
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    if !operand_fmt.is_subset_of(accum_fmt) {
        return Err(Error::InvalidConfig(format!(
            "operand format {operand_fmt} is wider than accumulator {accum_fmt}"
        )));
    }
    let out = c.fmt();
    gemm_view(
        c.view_mut(),
        a.view(),
        b.view(),
        alpha,
        beta,
        operand_fmt,
        accum_fmt,
        out,
    );
    Ok(())
}

/// Solve `T X = B` (left) or `X T = B` (right) in place, rounding every
/// operation to `fmt`. `B` is overwritten with `X` and retagged as `fmt`
/// when that is narrower than its current format.
pub fn trsm(
    side: Side,
    uplo: Uplo,
    diag: Diag,
    t: &DenseMatrix,
    b: &mut DenseMatrix,
    fmt: Format,
) -> Result<()> {
    let n = t.rows();
    let conforms = t.is_square()
        && match side {
            Side::Left => b.rows() == n,
            Side::Right => b.cols() == n,
        };
    if !conforms {
        return Err(Error::DimensionMismatch(format!(
            "triangular {}x{} against right-hand side {}x{}",
            t.rows(),
            t.cols(),
            b.rows(),
            b.cols()
        )));
    }
    trsm_view(side, uplo, diag, t.view(), b.view_mut(), fmt)?;
    if fmt.is_subset_of(b.fmt()) {
        b.set_fmt_unchecked(fmt);
    }
    Ok(())
}

/// `y += A x` in binary64, one column at a time (j ascending). Streaming
/// column blocks through this yields the same bits as one full product.
pub(crate) fn gemv_acc(a: MatRef<'_>, x: &[f64], y: &mut [f64]) {
    for (j, &xj) in x.iter().enumerate().take(a.cols) {
        let col = &a.data[j * a.ld..j * a.ld + a.rows];
        for (yi, &aij) in y.iter_mut().zip(col) {
            *yi += aij * xj;
        }
    }
}

/// `y = A x` in binary64 with a fixed summation order.
pub fn matvec(a: &DenseMatrix, x: &[f64]) -> Result<Vector> {
    if a.cols() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix times length-{} vector",
            a.rows(),
            a.cols(),
            x.len()
        )));
    }
    let mut y = vec![0.0; a.rows()];
    gemv_acc(a.view(), x, &mut y);
    Ok(y.into())
}

/// `b - A x` in binary64.
pub fn residual(a: &DenseMatrix, x: &[f64], b: &[f64]) -> Result<Vector> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "rhs length {} for {} rows",
            b.len(),
            a.rows()
        )));
    }
    let ax = matvec(a, x)?;
    Ok(b.iter().zip(ax.iter()).map(|(bi, yi)| bi - yi).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    One,
    Two,
    Inf,
}

pub fn vec_norm(x: &[f64], which: NormKind) -> f64 {
    match which {
        NormKind::One => x.iter().map(|v| v.abs()).sum(),
        NormKind::Inf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        NormKind::Two => norm2(x),
    }
}

/// One-pass scaled sum of squares: tracks `scale` and `ssq` with
/// `sum x_i^2 = scale^2 * ssq`, so no intermediate overflows or underflows.
fn norm2(x: &[f64]) -> f64 {
    let mut scale = 0.0f64;
    let mut ssq = 1.0f64;
    for &v in x {
        if v != 0.0 {
            let a = v.abs();
            if scale < a {
                ssq = 1.0 + ssq * (scale / a) * (scale / a);
                scale = a;
            } else {
                ssq += (a / scale) * (a / scale);
            }
        }
    }
    scale * ssq.sqrt()
}

/// Maximum absolute row sum.
pub fn mat_norm_inf(a: &DenseMatrix) -> f64 {
    let mut sums = vec![0.0; a.rows()];
    row_abs_sums_acc(a.view(), &mut sums);
    sums.into_iter().fold(0.0, f64::max)
}

pub(crate) fn row_abs_sums_acc(a: MatRef<'_>, sums: &mut [f64]) {
    for j in 0..a.cols {
        let col = &a.data[j * a.ld..j * a.ld + a.rows];
        for (s, &v) in sums.iter_mut().zip(col) {
            *s += v.abs();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::round_to;
    use crate::rng::Stream;
    use proptest::prelude::*;

    #[test]
    fn gemm_fp64_matches_triple_loop_bitwise() {
        let s = Stream::new(5, 0);
        let a = DenseMatrix::from_fn(37, 300, |i, j| s.uniform(i as u64, j as u64));
        let b = DenseMatrix::from_fn(300, 29, |i, j| s.uniform(1000 + i as u64, j as u64));
        let c0 = DenseMatrix::from_fn(37, 29, |i, j| s.uniform(5000 + i as u64, j as u64));
        let mut c = c0.clone();
        gemm_mixed(&mut c, &a, &b, 0.5, -2.0, Format::Binary64, Format::Binary64).unwrap();
        for i in 0..37 {
            for j in 0..29 {
                let mut acc = 0.0f64;
                for p in 0..300 {
                    acc = a[(i, p)].mul_add(b[(p, j)], acc);
                }
                assert_eq!(c[(i, j)], 0.5 * acc + -2.0 * c0[(i, j)]);
            }
        }
    }

    #[test]
    fn gemm_one_by_one_half_operands() {
        let a = DenseMatrix::from_rows(&[&[0.1]]);
        let b = DenseMatrix::from_rows(&[&[3.0]]);
        let mut c = DenseMatrix::zeros(1, 1);
        gemm_mixed(&mut c, &a, &b, 1.0, 0.0, Format::Binary16, Format::Binary32).unwrap();
        let want = round_to(round_to(0.1, Format::Binary16) * 3.0, Format::Binary32);
        assert_eq!(c[(0, 0)], want);
        assert_ne!(c[(0, 0)], 0.3);
        // 0.1 in binary16 is 0x2E66 = 1638/16384
        assert_eq!(round_to(0.1, Format::Binary16), 1638.0 / 16384.0);
    }

    #[test]
    fn gemm_8x8x8_half_single_matches_scalar_emulation() {
        let s = Stream::new(77, 0);
        let a = DenseMatrix::from_fn(8, 8, |i, j| s.uniform(i as u64, j as u64));
        let b = DenseMatrix::from_fn(8, 8, |i, j| s.uniform(100 + i as u64, j as u64));
        let mut c = DenseMatrix::zeros(8, 8).quantized(Format::Binary32);
        gemm_mixed(&mut c, &a, &b, 1.0, 0.0, Format::Binary16, Format::Binary32).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let mut acc = 0.0f64;
                for p in 0..8 {
                    let x = round_to(a[(i, p)], Format::Binary16);
                    let y = round_to(b[(p, j)], Format::Binary16);
                    acc = round_to(x * y + acc, Format::Binary32);
                }
                assert_eq!(c[(i, j)].to_bits(), acc.to_bits());
            }
        }
        assert!(c.is_representable());
    }

    #[test]
    fn gemm_error_bound_half_operands() {
        let k = 512;
        let s = Stream::new(3, 0);
        let a = DenseMatrix::from_fn(16, k, |i, j| s.uniform(i as u64, j as u64));
        let b = DenseMatrix::from_fn(k, 16, |i, j| s.uniform(7000 + i as u64, j as u64));
        let mut c = DenseMatrix::zeros(16, 16);
        gemm_mixed(&mut c, &a, &b, 1.0, 0.0, Format::Binary16, Format::Binary32).unwrap();
        let bound = k as f64 * (2f64.powi(-11) * 2.0 + k as f64 * 2f64.powi(-24)) * 4.0;
        for i in 0..16 {
            for j in 0..16 {
                let exact: f64 = (0..k).map(|p| a[(i, p)] * b[(p, j)]).sum();
                assert!((c[(i, j)] - exact).abs() <= bound);
            }
        }
    }

    #[test]
    fn gemm_rejects_bad_shapes_and_formats() {
        let a = DenseMatrix::zeros(2, 3);
        let b = DenseMatrix::zeros(2, 2);
        let mut c = DenseMatrix::zeros(2, 2);
        assert!(matches!(
            gemm_mixed(&mut c, &a, &b, 1.0, 0.0, Format::Binary64, Format::Binary64),
            Err(Error::DimensionMismatch(_))
        ));
        let a = DenseMatrix::zeros(2, 2);
        assert!(gemm_mixed(&mut c, &a, &b, 1.0, 0.0, Format::Binary32, Format::Binary16).is_err());
    }

    #[test]
    fn gemm_is_thread_count_independent() {
        let s = Stream::new(9, 0);
        let a = DenseMatrix::from_fn(300, 128, |i, j| s.uniform(i as u64, j as u64));
        let b = DenseMatrix::from_fn(128, 700, |i, j| s.uniform(500 + i as u64, j as u64));
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let mut c = DenseMatrix::zeros(300, 700).quantized(Format::Binary32);
                gemm_mixed(&mut c, &a, &b, -1.0, 1.0, Format::Binary16, Format::Binary32).unwrap();
                c
            })
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn trsm_identity_and_hand_case() {
        let b0 = DenseMatrix::from_rows(&[&[1.5, -2.0], &[3.25, 4.0]]);
        for (side, uplo) in [
            (Side::Left, Uplo::Lower),
            (Side::Left, Uplo::Upper),
            (Side::Right, Uplo::Lower),
            (Side::Right, Uplo::Upper),
        ] {
            let mut b = b0.clone();
            trsm(side, uplo, Diag::NonUnit, &DenseMatrix::identity(2), &mut b, Format::Binary64)
                .unwrap();
            assert_eq!(b, b0);
        }
        let l = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.5, 1.0]]);
        let mut b = DenseMatrix::from_rows(&[&[2.0], &[3.0]]);
        trsm(Side::Left, Uplo::Lower, Diag::Unit, &l, &mut b, Format::Binary64).unwrap();
        assert_eq!(b.as_slice(), &[2.0, 2.0]);
    }

    #[test]
    fn trsm_singular_diagonal() {
        let u = DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 0.0]]);
        let mut b = DenseMatrix::zeros(2, 1);
        assert!(matches!(
            trsm(Side::Left, Uplo::Upper, Diag::NonUnit, &u, &mut b, Format::Binary64),
            Err(Error::SingularDiagonal(1))
        ));
        // a unit solve ignores the stored diagonal
        trsm(Side::Left, Uplo::Upper, Diag::Unit, &u, &mut b, Format::Binary64).unwrap();
    }

    fn substitution_oracle(side: Side, uplo: Uplo, t: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        // Row-oriented dot-product substitution; same per-element order.
        let n = t.rows();
        let mut x = b.clone();
        match (side, uplo) {
            (Side::Left, Uplo::Lower) => {
                for c in 0..b.cols() {
                    for i in 0..n {
                        let mut v = b[(i, c)];
                        for k in 0..i {
                            v -= t[(i, k)] * x[(k, c)];
                        }
                        x[(i, c)] = v / t[(i, i)];
                    }
                }
            }
            (Side::Left, Uplo::Upper) => {
                for c in 0..b.cols() {
                    for i in (0..n).rev() {
                        let mut v = b[(i, c)];
                        for k in (i + 1..n).rev() {
                            v -= t[(i, k)] * x[(k, c)];
                        }
                        x[(i, c)] = v / t[(i, i)];
                    }
                }
            }
            (Side::Right, Uplo::Upper) => {
                for r in 0..b.rows() {
                    for j in 0..n {
                        let mut v = b[(r, j)];
                        for k in 0..j {
                            v -= x[(r, k)] * t[(k, j)];
                        }
                        x[(r, j)] = v / t[(j, j)];
                    }
                }
            }
            (Side::Right, Uplo::Lower) => {
                for r in 0..b.rows() {
                    for j in (0..n).rev() {
                        let mut v = b[(r, j)];
                        for k in j + 1..n {
                            v -= x[(r, k)] * t[(k, j)];
                        }
                        x[(r, j)] = v / t[(j, j)];
                    }
                }
            }
        }
        x
    }

    #[test]
    fn trsm_fp64_matches_substitution_bitwise() {
        let s = Stream::new(21, 0);
        let n = 37;
        let lower = DenseMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => 2.0 + s.uniform(i as u64, j as u64),
            std::cmp::Ordering::Greater => s.uniform(i as u64, j as u64),
        });
        let upper = lower.transpose();
        let bl = DenseMatrix::from_fn(n, 5, |i, j| s.uniform(900 + i as u64, j as u64));
        let br = DenseMatrix::from_fn(300, n, |i, j| s.uniform(1900 + i as u64, j as u64));
        for (side, uplo, t, b) in [
            (Side::Left, Uplo::Lower, &lower, &bl),
            (Side::Left, Uplo::Upper, &upper, &bl),
            (Side::Right, Uplo::Lower, &lower, &br),
            (Side::Right, Uplo::Upper, &upper, &br),
        ] {
            let mut got = b.clone();
            trsm(side, uplo, Diag::NonUnit, t, &mut got, Format::Binary64).unwrap();
            assert_eq!(got, substitution_oracle(side, uplo, t, b), "{side:?} {uplo:?}");
        }
    }

    #[test]
    fn trsm_single_rounds_every_step() {
        let l = DenseMatrix::from_rows(&[&[3.0, 0.0], &[0.1, 7.0]]);
        let mut b = DenseMatrix::from_rows(&[&[1.0], &[1.0]]);
        trsm(Side::Left, Uplo::Lower, Diag::NonUnit, &l, &mut b, Format::Binary32).unwrap();
        let x0 = (1.0f32 / 3.0f32) as f64;
        let x1 = ((1.0f32 - 0.1f32 * (1.0f32 / 3.0f32)) / 7.0f32) as f64;
        assert_eq!(b.as_slice(), &[x0, x1]);
        assert_eq!(b.fmt(), Format::Binary32);
    }

    #[test]
    fn matvec_cases() {
        let x = [1.5, -2.0, 0.25];
        assert_eq!(matvec(&DenseMatrix::identity(3), &x).unwrap().as_slice(), &x);
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(matvec(&a, &[1.0, 1.0]).unwrap().as_slice(), &[3.0, 7.0]);
        assert_eq!(matvec(&DenseMatrix::zeros(2, 3), &x).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(matvec(&a, &x).is_err());
    }

    #[test]
    fn norm_cases() {
        let x = [3.0, -4.0];
        assert_eq!(vec_norm(&x, NormKind::One), 7.0);
        assert_eq!(vec_norm(&x, NormKind::Two), 5.0);
        assert_eq!(vec_norm(&x, NormKind::Inf), 4.0);
        for k in [NormKind::One, NormKind::Two, NormKind::Inf] {
            assert_eq!(vec_norm(&[0.0; 5], k), 0.0);
            let mut e1 = vec![0.0; 9];
            e1[0] = 1.0;
            assert_eq!(vec_norm(&e1, k), 1.0);
        }
        assert_eq!(vec_norm(&[1e300, 1e300], NormKind::Two), 1e300 * 2f64.sqrt());
        assert_eq!(mat_norm_inf(&DenseMatrix::identity(4)), 1.0);
        assert_eq!(mat_norm_inf(&DenseMatrix::from_rows(&[&[1.0, -2.0], &[3.0, 4.0]])), 7.0);
        assert_eq!(mat_norm_inf(&DenseMatrix::zeros(3, 3)), 0.0);
    }

    proptest! {
        #[test]
        fn norm_chain(v in proptest::collection::vec(-1e3..1e3f64, 1..200)) {
            let n = v.len() as f64;
            let one = vec_norm(&v, NormKind::One);
            let two = vec_norm(&v, NormKind::Two);
            let inf = vec_norm(&v, NormKind::Inf);
            let slack = 1.0 + 1e-12;
            prop_assert!(inf <= two * slack);
            prop_assert!(two <= one * slack);
            prop_assert!(one <= n.sqrt() * two * slack);
            prop_assert!(n.sqrt() * two <= n * inf * slack);
        }
    }
}
