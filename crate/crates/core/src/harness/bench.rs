//! One timed benchmark run: generate, scale, factor, refine, validate.

use std::time::Instant;

use super::equilibrate::{equilibrate_in_place, scale_rhs, unscale_solution};
use super::validation::{backward_error, figure_of_merit, validate};
use crate::error::{Error, Result};
use crate::gmres::{gmres_refine, initial_solution, RefineConfig};
use crate::lu::{factor, FactorConfig};
use crate::matgen::{generate_system, GenSpec};

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    NotConverged,
    /// The factorization met a pivot below the floor.
    SingularPivot,
    /// Non-finite values during refinement.
    Breakdown,
}

impl RunStatus {
    pub fn is_breakdown(self) -> bool {
        matches!(self, RunStatus::SingularPivot | RunStatus::Breakdown)
    }
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub spec: GenSpec,
    pub factor_cfg: FactorConfig,
    pub refine_cfg: RefineConfig,
    pub equilibrate: bool,
    pub t_scale: f64,
    pub t_factor: f64,
    pub t_refine: f64,
    pub t_total: f64,
    pub iterations: usize,
    /// Backward error of the returned solution against the original system;
    /// NaN when no solution was produced.
    pub berr: f64,
    pub fom_ops_per_sec: f64,
    pub valid: bool,
    pub debug_only: bool,
    pub status: RunStatus,
}

/// Validity as a pure function of the run outcome.
pub fn is_valid(berr: f64, iterations: usize, converged: bool, debug_only: bool) -> bool {
    validate(berr) && iterations <= crate::gmres::MAX_OFFICIAL_ITERS && converged && !debug_only
}

/// Callbacks run inside the untimed phases; tests use them to check that
/// those phases stay out of the reported times.
pub trait BenchHooks {
    fn after_generate(&self) {}
    fn before_validate(&self) {}
}

pub struct NoHooks;
impl BenchHooks for NoHooks {}

pub fn run_benchmark(
    spec: &GenSpec,
    fcfg: &FactorConfig,
    rcfg: &RefineConfig,
    use_equilibration: bool,
) -> Result<BenchReport> {
    run_benchmark_with_hooks(spec, fcfg, rcfg, use_equilibration, &NoHooks)
}

pub fn run_benchmark_with_hooks(
    spec: &GenSpec,
    fcfg: &FactorConfig,
    rcfg: &RefineConfig,
    use_equilibration: bool,
    hooks: &dyn BenchHooks,
) -> Result<BenchReport> {
    spec.validate()?;
    fcfg.validate()?;
    rcfg.validate()?;

    let sys = generate_system(spec)?;
    hooks.after_generate();

    let mut t_scale = 0.0;
    let scaled = if use_equilibration {
        let clock = Instant::now();
        let mut a = sys.a.clone();
        let (r, c) = equilibrate_in_place(&mut a)?;
        let b = scale_rhs(&sys.b, &r);
        t_scale = clock.elapsed().as_secs_f64();
        Some((a, b, c))
    } else {
        None
    };
    let (a, b) = match &scaled {
        Some((a, b, _)) => (a, b.as_slice()),
        None => (&sys.a, sys.b.as_slice()),
    };

    let mut report = BenchReport {
        spec: *spec,
        factor_cfg: *fcfg,
        refine_cfg: *rcfg,
        equilibrate: use_equilibration,
        t_scale,
        t_factor: 0.0,
        t_refine: 0.0,
        t_total: 0.0,
        iterations: 0,
        berr: f64::NAN,
        fom_ops_per_sec: 0.0,
        valid: false,
        debug_only: spec.is_debug_only(),
        status: RunStatus::Converged,
    };

    let clock = Instant::now();
    let factored = factor(a.clone(), fcfg);
    report.t_factor = clock.elapsed().as_secs_f64();
    let f = match factored {
        Ok((f, _)) => f,
        Err(Error::SingularPivot { .. }) => {
            report.status = RunStatus::SingularPivot;
            return Ok(finish(report));
        }
        Err(e) => return Err(e),
    };

    let clock = Instant::now();
    let refined = initial_solution(&f, b, rcfg).and_then(|x0| gmres_refine(a, &f, b, &x0, rcfg));
    let (res, status) = match refined {
        Ok(r) => (r, RunStatus::Converged),
        Err(Error::NotConverged(r)) => (*r, RunStatus::NotConverged),
        Err(Error::NumericalBreakdown(_)) => {
            report.t_refine = clock.elapsed().as_secs_f64();
            report.status = RunStatus::Breakdown;
            return Ok(finish(report));
        }
        Err(e) => return Err(e),
    };
    let x = match &scaled {
        Some((_, _, c)) => unscale_solution(&res.x, c),
        None => res.x,
    };
    report.t_refine = clock.elapsed().as_secs_f64();
    report.iterations = res.iterations;
    report.status = status;

    hooks.before_validate();
    report.berr = backward_error(&sys.a, &x, &sys.b)?;
    Ok(finish(report))
}

fn finish(mut r: BenchReport) -> BenchReport {
    r.t_total = r.t_scale + r.t_factor + r.t_refine;
    r.fom_ops_per_sec = if r.t_total > 0.0 { figure_of_merit(r.spec.n, r.t_total) } else { 0.0 };
    r.valid = is_valid(r.berr, r.iterations, r.status == RunStatus::Converged, r.debug_only);
    r
}
