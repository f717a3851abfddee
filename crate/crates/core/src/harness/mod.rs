//! Benchmark orchestration: validation, timing, scaling, experiments, CSV.

pub mod bench;
pub mod equilibrate;
pub mod io;
pub mod sweeps;
pub mod validation;

pub use bench::{run_benchmark, run_benchmark_with_hooks, BenchHooks, BenchReport, RunStatus};
pub use equilibrate::{equilibrate, unscale_solution};
pub use io::BenchRow;
pub use sweeps::{NormRow, PivotRow};
pub use sweeps::{direct_fp64_backward_error, experiment_norm_sweep, experiment_pivot_sweep};
pub use validation::{backward_error, figure_of_merit, validate};
