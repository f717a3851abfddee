use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::precision::{round_to, Format};

/// Column-major dense matrix. `fmt` records the format every stored value
/// is representable in; kernels writing into the matrix round to it.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    fmt: Format,
}

pub(crate) fn alloc_zeroed(len: usize) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    v.try_reserve_exact(len)
        .map_err(|_| Error::AllocationFailure(len))?;
    v.resize(len, 0.0);
    Ok(v)
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::try_zeros(rows, cols).expect("matrix allocation")
    }

    pub fn try_zeros(rows: usize, cols: usize) -> Result<Self> {
        let len = rows
            .checked_mul(cols)
            .ok_or(Error::AllocationFailure(usize::MAX))?;
        Ok(Self {
            rows,
            cols,
            data: alloc_zeroed(len)?,
            fmt: Format::Binary64,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Build from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            fmt: Format::Binary64,
        })
    }

    /// Build from a slice of rows; convenient for small literals in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        let mut out = Self::zeros(m, n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                out[(i, j)] = f(i, j);
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn fmt(&self) -> Format {
        self.fmt
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Round every entry into `fmt` and retag.
    pub fn quantize(&mut self, fmt: Format) {
        if fmt != Format::Binary64 {
            for v in &mut self.data {
                *v = round_to(*v, fmt);
            }
        }
        self.fmt = fmt;
    }

    pub fn quantized(mut self, fmt: Format) -> Self {
        self.quantize(fmt);
        self
    }

    /// Retag without touching values. Callers must already hold
    /// representable data.
    pub(crate) fn set_fmt_unchecked(&mut self, fmt: Format) {
        self.fmt = fmt;
    }

    /// Check the format tag against the stored values.
    pub fn is_representable(&self) -> bool {
        self.data.iter().all(|&v| round_to(v, self.fmt).to_bits() == v.to_bits())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t.fmt = self.fmt;
        t
    }

    pub(crate) fn view(&self) -> MatRef<'_> {
        MatRef {
            data: &self.data,
            rows: self.rows,
            cols: self.cols,
            ld: self.rows.max(1),
        }
    }

    pub(crate) fn view_mut(&mut self) -> MatMut<'_> {
        let ld = self.rows.max(1);
        MatMut {
            data: &mut self.data,
            rows: self.rows,
            cols: self.cols,
            ld,
        }
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

/// Strided read-only view: element `(i, j)` lives at `data[i + j * ld]`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MatRef<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub ld: usize,
}

impl<'a> MatRef<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize, ld: usize) -> Self {
        debug_assert!(cols == 0 || rows == 0 || data.len() >= (cols - 1) * ld + rows);
        Self {
            data,
            rows,
            cols,
            ld,
        }
    }

    #[inline(always)]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.ld]
    }

    pub fn sub(&self, i0: usize, j0: usize, rows: usize, cols: usize) -> MatRef<'a> {
        if rows == 0 || cols == 0 {
            return MatRef::new(&[], rows, cols, self.ld);
        }
        let start = i0 + j0 * self.ld;
        MatRef::new(&self.data[start..], rows, cols, self.ld)
    }
}

/// Strided mutable view.
#[derive(Debug)]
pub(crate) struct MatMut<'a> {
    pub data: &'a mut [f64],
    pub rows: usize,
    pub cols: usize,
    pub ld: usize,
}

impl<'a> MatMut<'a> {
    pub fn new(data: &'a mut [f64], rows: usize, cols: usize, ld: usize) -> Self {
        debug_assert!(cols == 0 || rows == 0 || data.len() >= (cols - 1) * ld + rows);
        Self {
            data,
            rows,
            cols,
            ld,
        }
    }

    pub fn rb(&self) -> MatRef<'_> {
        MatRef::new(self.data, self.rows, self.cols, self.ld)
    }

    pub fn rb_mut(&mut self) -> MatMut<'_> {
        MatMut::new(self.data, self.rows, self.cols, self.ld)
    }

    pub fn sub_mut(self, i0: usize, j0: usize, rows: usize, cols: usize) -> MatMut<'a> {
        let ld = self.ld;
        if rows == 0 || cols == 0 {
            return MatMut::new(&mut [], rows, cols, ld);
        }
        let start = i0 + j0 * ld;
        MatMut::new(&mut self.data[start..], rows, cols, ld)
    }

    /// Split into columns `[0, j)` and `[j, cols)`.
    pub fn split_at_col(self, j: usize) -> (MatMut<'a>, MatMut<'a>) {
        let ld = self.ld;
        let (rows, cols) = (self.rows, self.cols);
        let cut = (j * ld).min(self.data.len());
        let (left, right) = self.data.split_at_mut(cut);
        (
            MatMut::new(left, rows, j, ld),
            MatMut::new(right, rows, cols - j, ld),
        )
    }

    #[inline(always)]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.ld]
    }

    #[inline(always)]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i + j * self.ld]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        let start = j * self.ld;
        &mut self.data[start..start + self.rows]
    }
}

/// Dense `f64` vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vector {
    values: Vec<f64>,
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> f64) -> Self {
        Self {
            values: (0..len).map(f).collect(),
        }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

impl From<&[f64]> for Vector {
    fn from(values: &[f64]) -> Self {
        Self {
            values: values.to_vec(),
        }
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self {
            values: iter.into_iter().collect(),
        }
    }
}
