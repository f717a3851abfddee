use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mxp::gmres::{RefineConfig, MAX_OFFICIAL_ITERS};
use mxp::harness::io::write_csv;
use mxp::harness::{experiment_norm_sweep, experiment_pivot_sweep, run_benchmark, BenchRow};
use mxp::lu::{FactorConfig, Pivoting, DEFAULT_BLOCK_SIZE};
use mxp::matgen::{DiagScaling, Distribution, GenSpec, DEFAULT_THETA};
use mxp::precision::Format;
use mxp::Error;

const EXIT_IO: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_BREAKDOWN: u8 = 3;
const EXIT_USAGE: u8 = 4;

#[derive(Parser)]
#[command(name = "mxp", version, about = "Mixed-precision LU + GMRES benchmark")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Timed solve of generated systems.
    Bench(BenchArgs),
    /// Largest partial-pivoting pivot of unscaled uniform matrices.
    PivotSweep(SweepArgs),
    /// Residual norms of binary64 direct solves.
    NormSweep(NormArgs),
}

#[derive(Args)]
struct Common {
    /// Matrix order (used when --sizes is absent).
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Comma-separated list of orders.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds per order.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn sizes(&self) -> Vec<usize> {
        self.sizes.clone().unwrap_or_else(|| vec![self.n])
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Uniform,
    Gauss,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    None,
    Sqrtn,
    N,
    Ddd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Low {
    Fp16,
    Bf16,
    Fp32,
}

#[derive(Clone, Copy, ValueEnum)]
enum Wide {
    Fp32,
    Fp64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pivot {
    None,
    Partial,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Dist::Uniform)]
    dist: Dist,
    #[arg(long, value_enum, default_value_t = Scale::Sqrtn)]
    scale: Scale,
    /// Diagonal fraction for --scale ddd.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, value_enum, default_value_t = Low::Fp16)]
    low: Low,
    #[arg(long, value_enum, default_value_t = Wide::Fp32)]
    panel: Wide,
    #[arg(long, value_enum, default_value_t = Wide::Fp32)]
    accum: Wide,
    #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
    nb: usize,
    #[arg(long = "max-it", default_value_t = MAX_OFFICIAL_ITERS)]
    max_it: usize,
    #[arg(long = "berr-target", default_value_t = 1.0)]
    berr_target: f64,
    /// Apply power-of-two row and column scaling before factoring.
    #[arg(long)]
    equilibrate: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct NormArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Pivot::Partial)]
    pivot: Pivot,
}

fn wide(w: Wide) -> Format {
    match w {
        Wide::Fp32 => Format::Binary32,
        Wide::Fp64 => Format::Binary64,
    }
}

/// A failure that ends the process, with its exit code.
struct Fail(u8, String);

impl Fail {
    fn usage(msg: impl Into<String>) -> Self {
        Fail(EXIT_USAGE, msg.into())
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SingularPivot { .. } | Error::NumericalBreakdown(_) | Error::SingularDiagonal(_) => {
                EXIT_BREAKDOWN
            }
            Error::Io(_) | Error::Csv(_) | Error::AllocationFailure(_) => EXIT_IO,
            _ => EXIT_USAGE,
        };
        Fail(code, e.to_string())
    }
}

fn emit<T: Serialize>(common: &Common, rows: &[T]) -> Result<(), Fail> {
    match &common.out {
        Some(path) => mxp::harness::io::write_csv_file(path, rows)?,
        None => {
            let stdout = std::io::stdout();
            write_csv(stdout.lock(), rows)?;
            std::io::stdout().flush().map_err(|e| Fail(EXIT_IO, e.to_string()))?;
        }
    }
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<u8, Fail> {
    if args.max_it > MAX_OFFICIAL_ITERS {
        return Err(Fail::usage(format!("--max-it must not exceed {MAX_OFFICIAL_ITERS}")));
    }
    let scaling = match args.scale {
        Scale::None => DiagScaling::None,
        Scale::Sqrtn => DiagScaling::SqrtN,
        Scale::N => DiagScaling::LinearN,
        Scale::Ddd => DiagScaling::Ddd {
            theta: args.theta.unwrap_or(DEFAULT_THETA),
        },
    };
    if args.theta.is_some() && !matches!(args.scale, Scale::Ddd) {
        return Err(Fail::usage("--theta only applies to --scale ddd"));
    }
    let distribution = match args.dist {
        Dist::Uniform => Distribution::Uniform,
        Dist::Gauss => Distribution::Gaussian,
    };
    let fcfg = FactorConfig {
        low_fmt: match args.low {
            Low::Fp16 => Format::Binary16,
            Low::Bf16 => Format::BFloat16,
            Low::Fp32 => Format::Binary32,
        },
        panel_fmt: wide(args.panel),
        accum_fmt: wide(args.accum),
        block_size: args.nb,
        ..FactorConfig::default()
    };
    let rcfg = RefineConfig {
        max_iters: args.max_it,
        berr_target: args.berr_target,
        ..RefineConfig::default()
    };
    fcfg.validate()?;
    rcfg.validate()?;
    let mut specs = Vec::new();
    for n in args.common.sizes() {
        for seed in args.common.seed..args.common.seed + args.common.seeds {
            let spec = GenSpec::new(n, seed, distribution, scaling);
            spec.validate()?;
            specs.push(spec);
        }
    }
    specs.sort_by_key(|s| (s.n, s.seed));
    specs.dedup();

    let mut rows = Vec::with_capacity(specs.len());
    let mut code = 0;
    for spec in &specs {
        let report = run_benchmark(spec, &fcfg, &rcfg, args.equilibrate)?;
        eprintln!(
            "n={} seed={} iters={} berr={:.4} valid={} status={:?} t_total={:.3}s",
            spec.n, spec.seed, report.iterations, report.berr, report.valid, report.status, report.t_total
        );
        let outcome = if report.status.is_breakdown() {
            EXIT_BREAKDOWN
        } else if !report.valid {
            EXIT_INVALID
        } else {
            0
        };
        code = code.max(outcome);
        rows.push(BenchRow::from(&report));
    }
    emit(&args.common, &rows)?;
    Ok(code)
}

fn pivot_sweep(args: &SweepArgs) -> Result<u8, Fail> {
    let c = &args.common;
    let rows = experiment_pivot_sweep(&checked_sizes(c)?, c.seeds, c.seed)?;
    emit(c, &rows)?;
    Ok(0)
}

fn norm_sweep(args: &NormArgs) -> Result<u8, Fail> {
    let c = &args.common;
    let pivoting = match args.pivot {
        Pivot::None => Pivoting::None,
        Pivot::Partial => Pivoting::Partial,
    };
    let rows = experiment_norm_sweep(&checked_sizes(c)?, c.seeds, c.seed, pivoting)?;
    emit(c, &rows)?;
    Ok(if rows.iter().all(|r| r.is_ok()) { 0 } else { EXIT_BREAKDOWN })
}

fn checked_sizes(c: &Common) -> Result<Vec<usize>, Fail> {
    let sizes = c.sizes();
    for &n in &sizes {
        GenSpec::uniform(n, 0, DiagScaling::None).validate()?;
    }
    Ok(sizes)
}

fn dispatch(cmd: &Command) -> Result<u8, Fail> {
    match cmd {
        Command::Bench(a) => bench(a),
        Command::PivotSweep(a) => pivot_sweep(a),
        Command::NormSweep(a) => norm_sweep(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let threads = match &cli.cmd {
        Command::Bench(a) => a.common.threads,
        Command::PivotSweep(a) => a.common.threads,
        Command::NormSweep(a) => a.common.threads,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match pool.install(|| dispatch(&cli.cmd)) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
