//! Reproducible benchmark inputs.
//!
//! Off-diagonal entries are raw draws from the matrix stream. Diagonal
//! entries take the same raw draw and add a sign-preserving shift chosen by
//! [`DiagScaling`], which decides whether the matrix can be factored
//! without pivoting.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{alloc_zeroed, DenseMatrix, Vector};
use crate::rng::{GaussianStream, Stream, STREAM_MATRIX, STREAM_RHS};

/// Largest supported order; keeps every index product inside 32 bits.
pub const MAX_ORDER: usize = 46340;

/// Default departure from diagonal dominance.
pub const DEFAULT_THETA: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Distribution {
    Uniform,
    Gaussian,
}

impl Distribution {
    pub fn cli_name(self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::Gaussian => "gauss",
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Distribution {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform" => Ok(Distribution::Uniform),
            "gauss" | "gaussian" | "normal" => Ok(Distribution::Gaussian),
            other => Err(format!("unknown distribution `{other}` (expected uniform, gauss)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DiagScaling {
    /// `a_ii = u`.
    None,
    /// `a_ii = u + sign(u) * sqrt(n)`.
    SqrtN,
    /// `a_ii = u + sign(u) * n`. Debug only: such runs are never official.
    LinearN,
    /// `a_ii = sign(u) * theta * sum_{j != i} |a_ij|`.
    Ddd { theta: f64 },
}

impl DiagScaling {
    pub fn cli_name(&self) -> &'static str {
        match self {
            DiagScaling::None => "none",
            DiagScaling::SqrtN => "sqrtn",
            DiagScaling::LinearN => "n",
            DiagScaling::Ddd { .. } => "ddd",
        }
    }

    pub fn theta(&self) -> Option<f64> {
        match *self {
            DiagScaling::Ddd { theta } => Some(theta),
            _ => None,
        }
    }

    /// Parse a scheme name; `theta` is only consulted for `ddd`.
    pub fn parse(name: &str, theta: Option<f64>) -> std::result::Result<Self, String> {
        match name {
            "none" => Ok(DiagScaling::None),
            "sqrtn" => Ok(DiagScaling::SqrtN),
            "n" => Ok(DiagScaling::LinearN),
            "ddd" => Ok(DiagScaling::Ddd {
                theta: theta.unwrap_or(DEFAULT_THETA),
            }),
            other => Err(format!("unknown scaling `{other}` (expected none, sqrtn, n, ddd)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenSpec {
    pub n: usize,
    pub seed: u64,
    pub distribution: Distribution,
    pub diag_scaling: DiagScaling,
}

impl GenSpec {
    pub fn new(n: usize, seed: u64, distribution: Distribution, diag_scaling: DiagScaling) -> Self {
        Self {
            n,
            seed,
            distribution,
            diag_scaling,
        }
    }

    pub fn uniform(n: usize, seed: u64, diag_scaling: DiagScaling) -> Self {
        Self::new(n, seed, Distribution::Uniform, diag_scaling)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_ORDER {
            return Err(Error::InvalidConfig(format!(
                "order {} outside 1..={MAX_ORDER}",
                self.n
            )));
        }
        if let DiagScaling::Ddd { theta } = self.diag_scaling {
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(Error::InvalidConfig(format!("theta {theta} outside (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_debug_only(&self) -> bool {
        matches!(self.diag_scaling, DiagScaling::LinearN)
    }
}

#[derive(Clone, Debug)]
pub struct GeneratedSystem {
    pub a: DenseMatrix,
    pub b: Vector,
    pub spec: GenSpec,
}

#[derive(Clone, Copy)]
enum Sampler {
    Uniform(Stream),
    Gaussian(GaussianStream),
}

impl Sampler {
    fn new(spec: &GenSpec, stream: u64) -> Self {
        match spec.distribution {
            Distribution::Uniform => Sampler::Uniform(Stream::new(spec.seed, stream)),
            Distribution::Gaussian => Sampler::Gaussian(GaussianStream::new(spec.seed, stream)),
        }
    }

    #[inline]
    fn draw(&self, i: usize, j: usize) -> f64 {
        match self {
            Sampler::Uniform(s) => s.uniform(i as u64, j as u64),
            Sampler::Gaussian(g) => g.sample(i as u64, j as u64),
        }
    }
}

#[inline]
fn sign(u: f64) -> f64 {
    if u < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Sum of `|a_ij|` over `j != i`, j ascending.
fn off_diagonal_row_sum(sampler: &Sampler, n: usize, i: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..n {
        if j != i {
            s += sampler.draw(i, j).abs();
        }
    }
    s
}

#[inline]
fn shifted_diagonal(scaling: DiagScaling, n: usize, u: f64, row_sum: impl FnOnce() -> f64) -> f64 {
    match scaling {
        DiagScaling::None => u,
        DiagScaling::SqrtN => u + sign(u) * (n as f64).sqrt(),
        DiagScaling::LinearN => u + sign(u) * n as f64,
        DiagScaling::Ddd { theta } => sign(u) * theta * row_sum(),
    }
}

/// Entry `(i, j)` of the matrix described by `spec`.
pub fn generate_element(spec: &GenSpec, i: usize, j: usize) -> Result<f64> {
    let n = spec.n;
    if i >= n || j >= n {
        return Err(Error::IndexOutOfRange { i, j, n });
    }
    let sampler = Sampler::new(spec, STREAM_MATRIX);
    let u = sampler.draw(i, j);
    if i != j {
        return Ok(u);
    }
    Ok(shifted_diagonal(spec.diag_scaling, n, u, || {
        off_diagonal_row_sum(&sampler, n, i)
    }))
}

/// Fill columns `j0..j0 + cols` into `out` (column-major, `n` rows each).
fn fill_columns(spec: &GenSpec, sampler: &Sampler, j0: usize, out: &mut [f64]) {
    let n = spec.n;
    out.par_chunks_mut(n).enumerate().for_each(|(jj, col)| {
        let j = j0 + jj;
        for (i, v) in col.iter_mut().enumerate() {
            *v = sampler.draw(i, j);
        }
    });
}

pub fn generate_matrix(spec: &GenSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    let n = spec.n;
    let sampler = Sampler::new(spec, STREAM_MATRIX);
    let mut data = alloc_zeroed(n * n)?;
    fill_columns(spec, &sampler, 0, &mut data);

    let diag: Vec<f64> = match spec.diag_scaling {
        DiagScaling::Ddd { .. } => {
            // Row sums accumulated column by column in ascending j: the same
            // additions, in the same order, as `off_diagonal_row_sum`.
            let mut sums = vec![0.0; n];
            for j in 0..n {
                for (i, (s, &v)) in sums.iter_mut().zip(&data[j * n..(j + 1) * n]).enumerate() {
                    if i != j {
                        *s += v.abs();
                    }
                }
            }
            (0..n)
                .map(|i| shifted_diagonal(spec.diag_scaling, n, data[i * n + i], || sums[i]))
                .collect()
        }
        scaling => (0..n)
            .map(|i| shifted_diagonal(scaling, n, data[i * n + i], || unreachable!()))
            .collect(),
    };
    for (i, d) in diag.into_iter().enumerate() {
        data[i * n + i] = d;
    }
    DenseMatrix::from_col_major(n, n, data)
}

/// Stream the matrix through `f` in column blocks of at most `width`
/// columns, without ever holding more than one block. `f` receives the first
/// column index and the block (column-major, `n` rows).
pub fn for_each_column_block(
    spec: &GenSpec,
    width: usize,
    mut f: impl FnMut(usize, &DenseMatrix),
) -> Result<()> {
    spec.validate()?;
    let n = spec.n;
    let width = width.clamp(1, n);
    let sampler = Sampler::new(spec, STREAM_MATRIX);
    let mut j0 = 0;
    while j0 < n {
        let cols = width.min(n - j0);
        let mut data = alloc_zeroed(n * cols)?;
        fill_columns(spec, &sampler, j0, &mut data);
        for jj in 0..cols {
            let j = j0 + jj;
            let u = data[jj * n + j];
            data[jj * n + j] = shifted_diagonal(spec.diag_scaling, n, u, || {
                off_diagonal_row_sum(&sampler, n, j)
            });
        }
        f(j0, &DenseMatrix::from_col_major(n, cols, data)?);
        j0 += cols;
    }
    Ok(())
}

/// Right-hand side: `n` uniform draws from the rhs stream, independent of
/// the diagonal scheme and of the matrix distribution.
pub fn generate_rhs(spec: &GenSpec) -> Result<Vector> {
    spec.validate()?;
    let s = Stream::new(spec.seed, STREAM_RHS);
    Ok(Vector::from_fn(spec.n, |i| s.uniform(i as u64, 0)))
}

pub fn generate_system(spec: &GenSpec) -> Result<GeneratedSystem> {
    Ok(GeneratedSystem {
        a: generate_matrix(spec)?,
        b: generate_rhs(spec)?,
        spec: *spec,
    })
}
