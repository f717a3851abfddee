//! Matrix multiply with emulated operand and accumulator precision.
//!
//! Each output element is a single sequential chain over the inner index:
//! `s = round_acc(fma(round_op(a_ik), round_op(b_kj), s))` for k ascending,
//! then `c = round_out(alpha * s + beta * c)`. Register tiling and the
//! parallel split over column blocks never reorder that chain, so results
//! are bitwise reproducible for any thread count or instruction set.

use rayon::prelude::*;

use super::matrix::{MatMut, MatRef};
use crate::precision::{round_to, with_rounding, Format, Rounding};

/// Output columns handled by one task; also the B-panel width kept hot in L2.
const NC: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Isa {
    #[cfg(target_arch = "x86_64")]
    Avx512,
    #[cfg(target_arch = "x86_64")]
    Avx2,
    Generic,
}

fn detect_isa() -> Isa {
    #[cfg(target_arch = "x86_64")]
    {
        if is_x86_feature_detected!("avx512f") && is_x86_feature_detected!("fma") {
            return Isa::Avx512;
        }
        if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
            return Isa::Avx2;
        }
    }
    Isa::Generic
}

#[derive(Clone, Copy)]
struct Scalars {
    alpha: f64,
    beta: f64,
    operand: Format,
    output: Format,
}

/// `C <- round_out(alpha * A B + beta * C)` on strided views.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_view(
    c: MatMut<'_>,
    a: MatRef<'_>,
    b: MatRef<'_>,
    alpha: f64,
    beta: f64,
    operand: Format,
    accum: Format,
    output: Format,
) {
    debug_assert_eq!(a.rows, c.rows);
    debug_assert_eq!(b.cols, c.cols);
    debug_assert_eq!(a.cols, b.rows);
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    if a.cols == 0 {
        let mut c = c;
        for j in 0..c.cols {
            for v in c.col_mut(j) {
                *v = if beta == 0.0 { 0.0 } else { round_to(beta * *v, output) };
            }
        }
        return;
    }
    let s = Scalars {
        alpha,
        beta,
        operand,
        output,
    };
    with_rounding!(accum, Q => run::<Q>(c, a, b, s));
}

/// Computes one `MR x NR` tile of raw sums into `out` (column-major).
type TileFn = unsafe fn(k: usize, a: &[f64], b: &[f64], out: &mut [f64]);

fn run<Q: Rounding>(c: MatMut<'_>, a: MatRef<'_>, b: MatRef<'_>, s: Scalars) {
    #[cfg(target_arch = "x86_64")]
    match (detect_isa(), Q::FORMAT) {
        (Isa::Avx512, Format::Binary64) => return drive::<16, 8>(c, a, b, s, simd::avx512_16x8::<false>),
        (Isa::Avx512, Format::Binary32) => return drive::<16, 8>(c, a, b, s, simd::avx512_16x8::<true>),
        (Isa::Avx2, Format::Binary64) => return drive::<8, 6>(c, a, b, s, simd::avx2_8x6::<false>),
        (Isa::Avx2, Format::Binary32) => return drive::<8, 6>(c, a, b, s, simd::avx2_8x6::<true>),
        _ => {}
    }
    drive::<8, 6>(c, a, b, s, portable_tile::<8, 6, Q>)
}

/// Pack A into MR-row slivers, each stored k-major: `[p][r]`.
fn pack_a<const MR: usize>(a: MatRef<'_>, operand: Format) -> Vec<f64> {
    let k = a.cols;
    let slivers = a.rows.div_ceil(MR);
    let mut out = vec![0.0; slivers * MR * k];
    out.par_chunks_mut(MR * k)
        .enumerate()
        .for_each(|(s, sliver)| {
            let r0 = s * MR;
            let mr = MR.min(a.rows - r0);
            for p in 0..k {
                let col = &a.data[p * a.ld + r0..p * a.ld + r0 + mr];
                let dst = &mut sliver[p * MR..p * MR + mr];
                for (d, &v) in dst.iter_mut().zip(col) {
                    *d = round_to(v, operand);
                }
            }
        });
    out
}

fn drive<const MR: usize, const NR: usize>(
    c: MatMut<'_>,
    a: MatRef<'_>,
    b: MatRef<'_>,
    s: Scalars,
    tile: TileFn,
) {
    debug_assert!(a.cols > 0);
    let apack = pack_a::<MR>(a, s.operand);
    let (m, n, k, ld) = (c.rows, c.cols, a.cols, c.ld);
    c.data
        .par_chunks_mut(NC * ld)
        .enumerate()
        .for_each(|(blk, cdata)| {
            let j0 = blk * NC;
            if j0 >= n {
                return;
            }
            let nc = NC.min(n - j0);
            let cblk = MatMut::new(cdata, m, nc, ld);
            let bblk = b.sub(0, j0, k, nc);
            block::<MR, NR>(cblk, &apack, bblk, k, s, tile);
        });
}

fn block<const MR: usize, const NR: usize>(
    mut c: MatMut<'_>,
    apack: &[f64],
    b: MatRef<'_>,
    k: usize,
    s: Scalars,
    tile: TileFn,
) {
    let nc = c.cols;
    let m = c.rows;
    let jslivers = nc.div_ceil(NR);
    let mut bpack = vec![0.0; jslivers * NR * k];
    for js in 0..jslivers {
        let c0 = js * NR;
        let nr = NR.min(nc - c0);
        let dst = &mut bpack[js * NR * k..(js + 1) * NR * k];
        for jj in 0..nr {
            let col = &b.data[(c0 + jj) * b.ld..(c0 + jj) * b.ld + k];
            for (p, &v) in col.iter().enumerate() {
                dst[p * NR + jj] = round_to(v, s.operand);
            }
        }
    }

    let mut acc = vec![0.0; MR * NR];
    for (is, asliver) in apack.chunks_exact(MR * k).enumerate() {
        let r0 = is * MR;
        if r0 >= m {
            break;
        }
        let mr = MR.min(m - r0);
        for js in 0..jslivers {
            let c0 = js * NR;
            let nr = NR.min(nc - c0);
            let bsliver = &bpack[js * NR * k..(js + 1) * NR * k];
            // SAFETY: `run` only hands out kernels the CPU supports; slice
            // lengths are MR*k, NR*k and MR*NR as the kernels expect.
            unsafe { tile(k, asliver, bsliver, &mut acc) };
            for (jj, acc_col) in acc.chunks_exact(MR).enumerate().take(nr) {
                let col = c.col_mut(c0 + jj);
                let dst = &mut col[r0..r0 + mr];
                if s.beta == 0.0 {
                    for (d, &v) in dst.iter_mut().zip(acc_col) {
                        *d = round_to(s.alpha * v, s.output);
                    }
                } else {
                    for (d, &v) in dst.iter_mut().zip(acc_col) {
                        *d = round_to(s.alpha * v + s.beta * *d, s.output);
                    }
                }
            }
        }
    }
}

/// Scalar reference tile; used for the narrow accumulators and on targets
/// without a SIMD kernel.
unsafe fn portable_tile<const MR: usize, const NR: usize, Q: Rounding>(
    k: usize,
    a: &[f64],
    b: &[f64],
    out: &mut [f64],
) {
    out.fill(0.0);
    for (ap, bp) in a.chunks_exact(MR).zip(b.chunks_exact(NR)).take(k) {
        for (accc, &bv) in out.chunks_exact_mut(MR).zip(bp) {
            for (x, &av) in accc.iter_mut().zip(ap) {
                *x = Q::round(av.mul_add(bv, *x));
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
mod simd {
    use std::arch::x86_64::*;

    /// 16x8 tile, two zmm registers per output column. With `NARROW` every
    /// fused multiply-add result is rounded through binary32.
    #[target_feature(enable = "avx512f,fma")]
    pub(super) unsafe fn avx512_16x8<const NARROW: bool>(
        k: usize,
        a: &[f64],
        b: &[f64],
        out: &mut [f64],
    ) {
        debug_assert!(a.len() >= 16 * k && b.len() >= 8 * k && out.len() >= 128);
        let mut acc = [[_mm512_setzero_pd(); 2]; 8];
        let (ap, bp) = (a.as_ptr(), b.as_ptr());
        for p in 0..k {
            let a0 = _mm512_loadu_pd(ap.add(16 * p));
            let a1 = _mm512_loadu_pd(ap.add(16 * p + 8));
            for (c, col) in acc.iter_mut().enumerate() {
                let bv = _mm512_set1_pd(*bp.add(8 * p + c));
                col[0] = _mm512_fmadd_pd(a0, bv, col[0]);
                col[1] = _mm512_fmadd_pd(a1, bv, col[1]);
                if NARROW {
                    col[0] = _mm512_cvtps_pd(_mm512_cvtpd_ps(col[0]));
                    col[1] = _mm512_cvtps_pd(_mm512_cvtpd_ps(col[1]));
                }
            }
        }
        let op = out.as_mut_ptr();
        for (c, col) in acc.iter().enumerate() {
            _mm512_storeu_pd(op.add(16 * c), col[0]);
            _mm512_storeu_pd(op.add(16 * c + 8), col[1]);
        }
    }

    /// 8x6 tile, two ymm registers per output column.
    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn avx2_8x6<const NARROW: bool>(
        k: usize,
        a: &[f64],
        b: &[f64],
        out: &mut [f64],
    ) {
        debug_assert!(a.len() >= 8 * k && b.len() >= 6 * k && out.len() >= 48);
        let mut acc = [[_mm256_setzero_pd(); 2]; 6];
        let (ap, bp) = (a.as_ptr(), b.as_ptr());
        for p in 0..k {
            let a0 = _mm256_loadu_pd(ap.add(8 * p));
            let a1 = _mm256_loadu_pd(ap.add(8 * p + 4));
            for (c, col) in acc.iter_mut().enumerate() {
                let bv = _mm256_broadcast_sd(&*bp.add(6 * p + c));
                col[0] = _mm256_fmadd_pd(a0, bv, col[0]);
                col[1] = _mm256_fmadd_pd(a1, bv, col[1]);
                if NARROW {
                    col[0] = _mm256_cvtps_pd(_mm256_cvtpd_ps(col[0]));
                    col[1] = _mm256_cvtps_pd(_mm256_cvtpd_ps(col[1]));
                }
            }
        }
        let op = out.as_mut_ptr();
        for (c, col) in acc.iter().enumerate() {
            _mm256_storeu_pd(op.add(8 * c), col[0]);
            _mm256_storeu_pd(op.add(8 * c + 4), col[1]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::precision::Single as Q32;
    use crate::rng::Stream;

    fn reference(
        c: &DenseMatrix,
        a: &DenseMatrix,
        b: &DenseMatrix,
        alpha: f64,
        beta: f64,
        op: Format,
        acc: Format,
        out: Format,
    ) -> DenseMatrix {
        let mut r = c.clone();
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0f64;
                for p in 0..a.cols() {
                    let x = round_to(a[(i, p)], op);
                    let y = round_to(b[(p, j)], op);
                    s = round_to(x.mul_add(y, s), acc);
                }
                let cv = if beta == 0.0 { alpha * s } else { alpha * s + beta * c[(i, j)] };
                r[(i, j)] = round_to(cv, out);
            }
        }
        r
    }

    fn random(m: usize, n: usize, seed: u64) -> DenseMatrix {
        let s = Stream::new(seed, 0);
        DenseMatrix::from_fn(m, n, |i, j| s.uniform(i as u64, j as u64))
    }

    #[test]
    fn odd_shapes_match_reference_for_every_isa_path() {
        for &(m, n, k) in &[(1, 1, 1), (17, 9, 3), (33, 300, 5), (5, 7, 300), (40, 13, 0)] {
            for (op, acc) in [
                (Format::Binary64, Format::Binary64),
                (Format::Binary16, Format::Binary32),
                (Format::BFloat16, Format::Binary32),
                (Format::Binary16, Format::Binary16),
            ] {
                let a = random(m, k, 1);
                let b = random(k, n, 2);
                let c0 = random(m, n, 3);
                let want = reference(&c0, &a, &b, -1.0, 1.0, op, acc, acc);
                let mut got = c0.clone();
                gemm_view(got.view_mut(), a.view(), b.view(), -1.0, 1.0, op, acc, acc);
                assert_eq!(got, want, "{m}x{n}x{k} {op}/{acc}");
                if k == 0 {
                    // The drivers assume a non-empty inner dimension.
                    continue;
                }

                let mut gen = c0.clone();
                let s = Scalars {
                    alpha: -1.0,
                    beta: 1.0,
                    operand: op,
                    output: acc,
                };
                with_rounding!(acc, Q => drive::<8, 6>(gen.view_mut(), a.view(), b.view(), s, portable_tile::<8, 6, Q>));
                #[cfg(target_arch = "x86_64")]
                if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
                    let mut v = c0.clone();
                    match acc {
                        Format::Binary64 => drive::<8, 6>(v.view_mut(), a.view(), b.view(), s, simd::avx2_8x6::<false>),
                        Format::Binary32 => drive::<8, 6>(v.view_mut(), a.view(), b.view(), s, simd::avx2_8x6::<true>),
                        _ => drive::<8, 6>(v.view_mut(), a.view(), b.view(), s, portable_tile::<8, 6, Q32>),
                    }
                    if matches!(acc, Format::Binary64 | Format::Binary32) {
                        assert_eq!(v, want);
                    }
                }
                assert_eq!(gen, want);
            }
        }
    }
}
