//! GMRES-based iterative refinement.
//!
//! The low-precision LU factors act as a left preconditioner `M`, and GMRES
//! runs in binary64 on `M^-1 A x = M^-1 b` from the initial LU solution.
//! Convergence is judged on the true residual after every Arnoldi step.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::harness::validation::scaled_backward_error;
use crate::linalg::{gemv_acc, mat_norm_inf, vec_norm, DenseMatrix, NormKind, Vector};
use crate::lu::{lu_solve, LUFactors};
use crate::precision::Format;

/// Upper bound on `max_iters` for a run to count as valid.
pub const MAX_OFFICIAL_ITERS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reorthogonalize {
    Never,
    /// Second Gram-Schmidt pass when the vector lost more than a factor
    /// `sqrt(2)` of its norm to the first.
    Heuristic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineConfig {
    pub max_iters: usize,
    pub berr_target: f64,
    pub precond_fmt: Format,
    pub reorthogonalize: Reorthogonalize,
    pub happy_breakdown_tol: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            max_iters: MAX_OFFICIAL_ITERS,
            berr_target: 1.0,
            precond_fmt: Format::Binary64,
            reorthogonalize: Reorthogonalize::Heuristic,
            happy_breakdown_tol: 1e-14,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.max_iters > MAX_OFFICIAL_ITERS {
            return Err(Error::InvalidConfig(format!(
                "max_iters must be in 1..={MAX_OFFICIAL_ITERS}, got {}",
                self.max_iters
            )));
        }
        if !(self.berr_target > 0.0 && self.berr_target < 16.0) {
            return Err(Error::InvalidConfig(format!(
                "berr_target must be in (0, 16), got {}",
                self.berr_target
            )));
        }
        if self.happy_breakdown_tol.is_nan() || self.happy_breakdown_tol < 0.0 {
            return Err(Error::InvalidConfig("happy_breakdown_tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RefineResult {
    pub x: Vector,
    /// Arnoldi steps taken.
    pub iterations: usize,
    /// Backward error of the iterate after each step.
    pub berr_history: Vec<f64>,
    /// Backward error of the starting vector.
    pub initial_berr: f64,
    /// Givens estimate of `||M^-1 (b - A x_k)||_2` after each step.
    pub residual_estimates: Vec<f64>,
    pub converged: bool,
    pub t_refine: f64,
}

impl RefineResult {
    /// Backward error of `x`.
    pub fn final_berr(&self) -> f64 {
        self.berr_history.last().copied().unwrap_or(self.initial_berr)
    }
}

/// `x0 = U^-1 L^-1 P b` in the preconditioner format.
pub fn initial_solution(f: &LUFactors, b: &[f64], cfg: &RefineConfig) -> Result<Vector> {
    lu_solve(f, b, cfg.precond_fmt)
}

/// `U^-1 L^-1 P v` with every operation rounded to `fmt`.
pub fn apply_preconditioner(f: &LUFactors, v: &[f64], fmt: Format) -> Result<Vector> {
    lu_solve(f, v, fmt)
}

pub fn gmres_refine(
    a: &DenseMatrix,
    f: &LUFactors,
    b: &[f64],
    x0: &[f64],
    cfg: &RefineConfig,
) -> Result<RefineResult> {
    run(a, f, b, x0, cfg).map(|(r, _)| r)
}

struct Problem<'a> {
    a: &'a DenseMatrix,
    b: &'a [f64],
    norm_a: f64,
    norm_b: f64,
}

impl Problem<'_> {
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let ax = apply(self.a, x);
        self.b.iter().zip(ax.iter()).map(|(bi, ai)| bi - ai).collect()
    }

    fn berr(&self, r: &[f64], x: &[f64]) -> Result<f64> {
        scaled_backward_error(
            vec_norm(r, NormKind::Inf),
            self.norm_a,
            vec_norm(x, NormKind::Inf),
            self.norm_b,
            x.len(),
        )
    }
}

/// The refinement loop; also returns the Arnoldi basis for inspection.
fn run(
    a: &DenseMatrix,
    f: &LUFactors,
    b: &[f64],
    x0: &[f64],
    cfg: &RefineConfig,
) -> Result<(RefineResult, Vec<Vec<f64>>)> {
    let start = Instant::now();
    cfg.validate()?;
    let n = a.rows();
    if !a.is_square() || f.n() != n || b.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "refinement on order {n}: factors {}, rhs {}, x0 {}",
            f.n(),
            b.len(),
            x0.len()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBreakdown(0));
    }
    let prob = Problem {
        a,
        b,
        norm_a: mat_norm_inf(a),
        norm_b: vec_norm(b, NormKind::Inf),
    };

    let r0 = prob.residual(x0);
    let initial_berr = prob.berr(&r0, x0)?;
    let mut out = RefineResult {
        x: x0.to_vec().into(),
        iterations: 0,
        berr_history: Vec::new(),
        initial_berr,
        residual_estimates: Vec::new(),
        converged: initial_berr < cfg.berr_target,
        t_refine: 0.0,
    };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let finish = |mut out: RefineResult, basis| {
        out.t_refine = start.elapsed().as_secs_f64();
        if out.converged {
            Ok((out, basis))
        } else {
            Err(Error::NotConverged(Box::new(out)))
        }
    };
    if out.converged {
        return finish(out, basis);
    }

    let z0 = apply_preconditioner(f, &r0, cfg.precond_fmt)?;
    let beta = vec_norm(&z0, NormKind::Two);
    if !beta.is_finite() {
        return Err(Error::NumericalBreakdown(0));
    }
    if beta == 0.0 {
        // The preconditioned residual vanished but the true one did not.
        return finish(out, basis);
    }
    basis.push(z0.iter().map(|v| v / beta).collect());

    let m = cfg.max_iters;
    let mut h_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rotations: Vec<(f64, f64)> = Vec::with_capacity(m);
    let mut g = vec![0.0; m + 1];
    g[0] = beta;

    for k in 0..m {
        let av = apply(a, &basis[k]);
        let mut w = apply_preconditioner(f, &av, cfg.precond_fmt)?.into_vec();
        let mut h = vec![0.0; k + 2];
        let pre = vec_norm(&w, NormKind::Two);
        orthogonalize(&mut w, &basis, &mut h);
        let mut post = vec_norm(&w, NormKind::Two);
        if cfg.reorthogonalize == Reorthogonalize::Heuristic
            && post < pre * std::f64::consts::FRAC_1_SQRT_2
        {
            orthogonalize(&mut w, &basis, &mut h);
            post = vec_norm(&w, NormKind::Two);
        }
        h[k + 1] = post;
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBreakdown(k + 1));
        }

        for (i, &(c, s)) in rotations.iter().enumerate() {
            let t = c * h[i] + s * h[i + 1];
            h[i + 1] = -s * h[i] + c * h[i + 1];
            h[i] = t;
        }
        let rho = h[k].hypot(h[k + 1]);
        if rho == 0.0 || !rho.is_finite() {
            return Err(Error::NumericalBreakdown(k + 1));
        }
        let (c, s) = (h[k] / rho, h[k + 1] / rho);
        h[k] = rho;
        h[k + 1] = 0.0;
        g[k + 1] = -s * g[k];
        g[k] *= c;
        rotations.push((c, s));
        h_cols.push(h);

        let y = back_substitute(&h_cols, &g[..=k]);
        let mut x = x0.to_vec();
        for (v, &yi) in basis.iter().zip(&y) {
            for (xj, vj) in x.iter_mut().zip(v) {
                *xj += yi * vj;
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBreakdown(k + 1));
        }
        let r = prob.residual(&x);
        let berr = prob.berr(&r, &x)?;
        out.x = x.into();
        out.iterations = k + 1;
        out.berr_history.push(berr);
        out.residual_estimates.push(g[k + 1].abs());
        out.converged = berr < cfg.berr_target;
        if out.converged || post < cfg.happy_breakdown_tol * beta {
            return finish(out, basis);
        }
        basis.push(w.iter().map(|v| v / post).collect());
    }
    finish(out, basis)
}

fn apply(a: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.rows()];
    gemv_acc(a.view(), x, &mut y);
    y
}

/// One modified Gram-Schmidt sweep, accumulating coefficients into `h`.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>], h: &mut [f64]) {
    for (v, hi) in basis.iter().zip(h.iter_mut()) {
        let d: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
        for (wj, vj) in w.iter_mut().zip(v) {
            *wj -= d * vj;
        }
        *hi += d;
    }
}

/// Solve the rotated upper-triangular Hessenberg system.
fn back_substitute(cols: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let mut y = g.to_vec();
    for i in (0..k).rev() {
        y[i] /= cols[i][i];
        let yi = y[i];
        for (yr, hr) in y[..i].iter_mut().zip(&cols[i][..i]) {
            *yr -= hr * yi;
        }
    }
    y
}
