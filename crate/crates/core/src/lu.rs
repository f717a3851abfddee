//! Blocked right-looking LU.
//!
//! Two modes share the packed storage layout (unit-lower `L` strictly below
//! the diagonal, `U` on and above it):
//!
//! * [`lu_nopivot_mixed`]: the benchmark factorization. Each block step
//!   factors the diagonal block and solves for the block row and column in
//!   `panel_fmt`, then applies the Schur update with `low_fmt` operands and
//!   `accum_fmt` accumulation.
//! * [`lu_partial_fp64`]: row partial pivoting in binary64, used as the
//!   reference solver and to measure pivot growth.

use crate::error::{Error, Result};
use crate::linalg::{
    gemm_view, mat_norm_inf, trsm_view, DenseMatrix, Diag, MatMut, MatRef, Side, Uplo, Vector,
};
use crate::precision::{round_to, with_rounding, Format, Rounding};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pivoting {
    None,
    Partial,
}

impl Pivoting {
    pub fn cli_name(self) -> &'static str {
        match self {
            Pivoting::None => "none",
            Pivoting::Partial => "partial",
        }
    }
}

impl std::str::FromStr for Pivoting {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Pivoting::None),
            "partial" => Ok(Pivoting::Partial),
            other => Err(format!("unknown pivoting `{other}` (expected none, partial)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorConfig {
    pub pivoting: Pivoting,
    pub panel_fmt: Format,
    pub low_fmt: Format,
    pub accum_fmt: Format,
    pub block_size: usize,
    /// No-pivot factorization aborts when a pivot magnitude drops below this.
    pub pivot_floor: f64,
}

pub const DEFAULT_BLOCK_SIZE: usize = 128;

impl Default for FactorConfig {
    fn default() -> Self {
        Self {
            pivoting: Pivoting::None,
            panel_fmt: Format::Binary32,
            low_fmt: Format::Binary16,
            accum_fmt: Format::Binary32,
            block_size: DEFAULT_BLOCK_SIZE,
            pivot_floor: 2f64.powi(-40),
        }
    }
}

impl FactorConfig {
    /// No pivoting, every stage in binary64.
    pub fn fp64() -> Self {
        Self {
            panel_fmt: Format::Binary64,
            low_fmt: Format::Binary64,
            accum_fmt: Format::Binary64,
            ..Self::default()
        }
    }

    pub fn with_block_size(mut self, nb: usize) -> Self {
        self.block_size = nb;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(Error::InvalidConfig("block size must be at least 1".into()));
        }
        if !self.low_fmt.is_subset_of(self.accum_fmt) {
            return Err(Error::InvalidConfig(format!(
                "low format {} is wider than accumulator {}",
                self.low_fmt, self.accum_fmt
            )));
        }
        if self.pivot_floor.is_nan() || self.pivot_floor < 0.0 {
            return Err(Error::InvalidConfig("pivot floor must be non-negative".into()));
        }
        Ok(())
    }

    /// Format of the packed working matrix.
    pub fn storage_fmt(&self) -> Format {
        self.panel_fmt.wider(self.accum_fmt)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PivotStats {
    /// Largest pivot magnitude used over all elimination steps.
    pub max_pivot: f64,
    pub max_pivot_col: usize,
    /// `|U_jj|` per column.
    pub per_col_pivots: Option<Vec<f64>>,
}

impl PivotStats {
    fn from_pivots(pivots: Vec<f64>) -> Self {
        let (mut max_pivot, mut max_pivot_col) = (0.0, 0);
        for (j, &p) in pivots.iter().enumerate() {
            if p > max_pivot {
                max_pivot = p;
                max_pivot_col = j;
            }
        }
        Self {
            max_pivot,
            max_pivot_col,
            per_col_pivots: Some(pivots),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LUFactors {
    packed: DenseMatrix,
    perm: Option<Vec<usize>>,
    pub panel_fmt: Format,
    pub low_fmt: Format,
    pub accum_fmt: Format,
    pub block_size: usize,
}

impl LUFactors {
    pub fn n(&self) -> usize {
        self.packed.rows()
    }

    pub fn packed(&self) -> &DenseMatrix {
        &self.packed
    }

    /// Row `i` of `L U` is row `perm[i]` of the input.
    pub fn perm(&self) -> Option<&[usize]> {
        self.perm.as_deref()
    }

    pub fn lower(&self) -> DenseMatrix {
        let n = self.n();
        DenseMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.packed[(i, j)],
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => 0.0,
        })
    }

    pub fn upper(&self) -> DenseMatrix {
        let n = self.n();
        DenseMatrix::from_fn(n, n, |i, j| if i <= j { self.packed[(i, j)] } else { 0.0 })
    }
}

/// Factor a copy of `a`; see [`factor`].
pub fn lu_nopivot_mixed(a: &DenseMatrix, cfg: &FactorConfig) -> Result<(LUFactors, PivotStats)> {
    if cfg.pivoting != Pivoting::None {
        return Err(Error::InvalidConfig(
            "lu_nopivot_mixed requires pivoting = none".into(),
        ));
    }
    factor(a.clone(), cfg)
}

pub fn lu_partial_fp64(a: &DenseMatrix) -> Result<(LUFactors, PivotStats)> {
    factor(
        a.clone(),
        &FactorConfig {
            pivoting: Pivoting::Partial,
            ..FactorConfig::fp64()
        },
    )
}

/// Factor `a` in place, consuming it. Partial pivoting always runs in
/// binary64; the format knobs only apply to the no-pivot mode.
pub fn factor(a: DenseMatrix, cfg: &FactorConfig) -> Result<(LUFactors, PivotStats)> {
    cfg.validate()?;
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "LU needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    match cfg.pivoting {
        Pivoting::None => factor_nopivot(a, cfg),
        Pivoting::Partial => factor_partial(a, cfg.block_size),
    }
}

fn factor_nopivot(mut a: DenseMatrix, cfg: &FactorConfig) -> Result<(LUFactors, PivotStats)> {
    let n = a.rows();
    let nb = cfg.block_size;
    let storage = cfg.storage_fmt();
    a.quantize(storage);
    let mut pivots = vec![0.0; n];

    let mut k = 0;
    while k < n {
        let kb = nb.min(n - k);
        let split = k + kb;
        let (left, right) = a.view_mut().split_at_col(split);
        // Block column k..split, rows k..n.
        let mut panel = left.sub_mut(k, k, n - k, kb);

        with_rounding!(cfg.panel_fmt, Q => {
            factor_diag_block::<Q>(panel.rb_mut(), k, cfg.pivot_floor, &mut pivots[k..split])
        })?;

        if split < n {
            // L21 = A21 U11^-1, with U11 copied out of the block it solves into.
            let u11: Vec<f64> = (0..kb)
                .flat_map(|j| (0..kb).map(move |i| (i, j)))
                .map(|(i, j)| panel.at(i, j))
                .collect();
            let u11 = MatRef::new(&u11, kb, kb, kb);
            let l21 = panel.rb_mut().sub_mut(kb, 0, n - split, kb);
            trsm_view(Side::Right, Uplo::Upper, Diag::NonUnit, u11, l21, cfg.panel_fmt)?;

            // U12 = L11^-1 A12.
            let panel = panel.rb();
            let l11 = panel.sub(0, 0, kb, kb);
            let mut right = right;
            let a12 = right.rb_mut().sub_mut(k, 0, kb, n - split);
            trsm_view(Side::Left, Uplo::Lower, Diag::Unit, l11, a12, cfg.panel_fmt)?;

            // A22 -= L21 U12, reduced-precision operands.
            let u12 = copy_block(right.rb(), k, 0, kb, n - split);
            let u12 = MatRef::new(&u12, kb, n - split, kb);
            let l21 = panel.sub(kb, 0, n - split, kb);
            let a22 = right.sub_mut(split, 0, n - split, n - split);
            gemm_view(a22, l21, u12, -1.0, 1.0, cfg.low_fmt, cfg.accum_fmt, storage);
        }
        k = split;
    }

    let stats = PivotStats::from_pivots(pivots);
    Ok((
        LUFactors {
            packed: a,
            perm: None,
            panel_fmt: cfg.panel_fmt,
            low_fmt: cfg.low_fmt,
            accum_fmt: cfg.accum_fmt,
            block_size: nb,
        },
        stats,
    ))
}

fn copy_block(m: MatRef<'_>, i0: usize, j0: usize, rows: usize, cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        let start = i0 + (j0 + j) * m.ld;
        out.extend_from_slice(&m.data[start..start + rows]);
    }
    out
}

/// Unblocked left-looking LU of the leading `kb x kb` block of `panel`,
/// every operation rounded through `Q`.
fn factor_diag_block<Q: Rounding>(
    mut panel: MatMut<'_>,
    col_offset: usize,
    floor: f64,
    pivots: &mut [f64],
) -> Result<()> {
    let kb = panel.cols;
    for j in 0..kb {
        for p in 0..j {
            let u = panel.at(p, j);
            for i in p + 1..kb {
                let l = panel.at(i, p);
                let v = panel.at_mut(i, j);
                *v = Q::round(*v - Q::round(l * u));
            }
        }
        let pivot = panel.at(j, j);
        if !pivot.is_finite() || pivot.abs() < floor || pivot == 0.0 {
            return Err(Error::SingularPivot {
                col: col_offset + j,
                value: pivot,
            });
        }
        pivots[j] = pivot.abs();
        for i in j + 1..kb {
            let v = panel.at_mut(i, j);
            *v = Q::round(*v / pivot);
        }
    }
    Ok(())
}

fn factor_partial(mut a: DenseMatrix, nb: usize) -> Result<(LUFactors, PivotStats)> {
    let n = a.rows();
    let mut ipiv = vec![0usize; n];
    let mut pivots = vec![0.0; n];
    let mut k = 0;
    while k < n {
        let kb = nb.min(n - k);
        let split = k + kb;
        let (left, mut right) = a.view_mut().split_at_col(split);
        let (mut done, cur) = left.split_at_col(k);
        let mut panel = cur.sub_mut(k, 0, n - k, kb);
        recursive_panel(panel.rb_mut(), &mut ipiv[k..split], &mut pivots[k..split], k)?;

        let local = &ipiv[k..split];
        if k > 0 {
            apply_swaps(done.rb_mut().sub_mut(k, 0, n - k, k), local);
        }
        if split < n {
            apply_swaps(right.rb_mut().sub_mut(k, 0, n - k, n - split), local);
            let panel = panel.rb();
            let l11 = panel.sub(0, 0, kb, kb);
            trsm_view(
                Side::Left,
                Uplo::Lower,
                Diag::Unit,
                l11,
                right.rb_mut().sub_mut(k, 0, kb, n - split),
                Format::Binary64,
            )?;
            let u12 = copy_block(right.rb(), k, 0, kb, n - split);
            let u12 = MatRef::new(&u12, kb, n - split, kb);
            let l21 = panel.sub(kb, 0, n - split, kb);
            let a22 = right.sub_mut(split, 0, n - split, n - split);
            gemm_view(
                a22,
                l21,
                u12,
                -1.0,
                1.0,
                Format::Binary64,
                Format::Binary64,
                Format::Binary64,
            );
        }
        for p in &mut ipiv[k..split] {
            *p += k;
        }
        k = split;
    }

    let mut perm: Vec<usize> = (0..n).collect();
    for (i, &p) in ipiv.iter().enumerate() {
        perm.swap(i, p);
    }
    let stats = PivotStats::from_pivots(pivots);
    Ok((
        LUFactors {
            packed: a,
            perm: Some(perm),
            panel_fmt: Format::Binary64,
            low_fmt: Format::Binary64,
            accum_fmt: Format::Binary64,
            block_size: nb,
        },
        stats,
    ))
}

/// Interchange rows `i` and `ipiv[i]` for i ascending.
fn apply_swaps(mut m: MatMut<'_>, ipiv: &[usize]) {
    for j in 0..m.cols {
        let col = m.col_mut(j);
        for (i, &p) in ipiv.iter().enumerate() {
            col.swap(i, p);
        }
    }
}

/// Recursive partial-pivot factorization of a tall panel. `ipiv` receives
/// row interchanges relative to the panel's first row.
fn recursive_panel(
    mut panel: MatMut<'_>,
    ipiv: &mut [usize],
    pivots: &mut [f64],
    col_offset: usize,
) -> Result<()> {
    let (m, w) = (panel.rows, panel.cols);
    if w == 1 {
        let col = panel.col_mut(0);
        let (mut p, mut best) = (0, 0.0f64);
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                p = i;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::SingularPivot {
                col: col_offset,
                value: col[p],
            });
        }
        col.swap(0, p);
        ipiv[0] = p;
        pivots[0] = best;
        let pivot = col[0];
        for v in &mut col[1..] {
            *v /= pivot;
        }
        return Ok(());
    }

    let w1 = w / 2;
    let (mut left, mut right) = panel.rb_mut().split_at_col(w1);
    recursive_panel(left.rb_mut(), &mut ipiv[..w1], &mut pivots[..w1], col_offset)?;
    apply_swaps(right.rb_mut(), &ipiv[..w1]);
    let l11 = left.rb().sub(0, 0, w1, w1);
    trsm_view(
        Side::Left,
        Uplo::Lower,
        Diag::Unit,
        l11,
        right.rb_mut().sub_mut(0, 0, w1, w - w1),
        Format::Binary64,
    )?;
    if m > w1 {
        let u12 = copy_block(right.rb(), 0, 0, w1, w - w1);
        let u12 = MatRef::new(&u12, w1, w - w1, w1);
        gemm_view(
            right.rb_mut().sub_mut(w1, 0, m - w1, w - w1),
            left.rb().sub(w1, 0, m - w1, w1),
            u12,
            -1.0,
            1.0,
            Format::Binary64,
            Format::Binary64,
            Format::Binary64,
        );
        recursive_panel(
            right.rb_mut().sub_mut(w1, 0, m - w1, w - w1),
            &mut ipiv[w1..],
            &mut pivots[w1..],
            col_offset + w1,
        )?;
        for p in &mut ipiv[w1..] {
            *p += w1;
        }
        apply_swaps(left.sub_mut(w1, 0, m - w1, w1), &shifted(&ipiv[w1..], w1));
    }
    Ok(())
}

fn shifted(ipiv: &[usize], by: usize) -> Vec<usize> {
    ipiv.iter().map(|&p| p - by).collect()
}

/// Solve `A x = b` with the factors: permute, forward-substitute with unit
/// `L`, back-substitute with `U`, every operation rounded to `solve_fmt`.
pub fn lu_solve(f: &LUFactors, b: &[f64], solve_fmt: Format) -> Result<Vector> {
    let n = f.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "rhs length {} for order {n}",
            b.len()
        )));
    }
    let mut x: Vec<f64> = match &f.perm {
        Some(perm) => perm.iter().map(|&p| round_to(b[p], solve_fmt)).collect(),
        None => b.iter().map(|&v| round_to(v, solve_fmt)).collect(),
    };
    let packed = f.packed.view();
    trsm_view(
        Side::Left,
        Uplo::Lower,
        Diag::Unit,
        packed,
        MatMut::new(&mut x, n, 1, n.max(1)),
        solve_fmt,
    )?;
    trsm_view(
        Side::Left,
        Uplo::Upper,
        Diag::NonUnit,
        packed,
        MatMut::new(&mut x, n, 1, n.max(1)),
        solve_fmt,
    )?;
    Ok(x.into())
}

/// `||L U - P A||_inf / ||A||_inf` in binary64.
pub fn reconstruct_error(f: &LUFactors, a: &DenseMatrix) -> f64 {
    let n = f.n();
    let l = f.lower();
    let u = f.upper();
    let mut lu = DenseMatrix::zeros(n, n);
    gemm_view(
        lu.view_mut(),
        l.view(),
        u.view(),
        1.0,
        0.0,
        Format::Binary64,
        Format::Binary64,
        Format::Binary64,
    );
    let diff = DenseMatrix::from_fn(n, n, |i, j| {
        let src = f.perm.as_ref().map_or(i, |p| p[i]);
        lu[(i, j)] - a[(src, j)]
    });
    let norm_a = mat_norm_inf(a);
    if norm_a == 0.0 {
        return mat_norm_inf(&diff);
    }
    mat_norm_inf(&diff) / norm_a
}

/// Canonical operation counts: `round(2/3 n^3 - 1/2 n^2)` for the
/// factorization and `2 n^2` for the two triangular solves.
pub fn flop_count(n: u64) -> (u64, u64) {
    let n = n as u128;
    let sixths = 4 * n * n * n - 3 * n * n; // 6 * (2/3 n^3 - 1/2 n^2)
    let factor = (sixths + 3) / 6;
    (factor as u64, (2 * n * n) as u64)
}
