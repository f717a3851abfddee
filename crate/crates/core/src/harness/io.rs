//! CSV persistence. Floats are written in shortest round-trip form, so
//! reading a file back reproduces every value exactly.

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::bench::BenchReport;
use crate::error::Result;

/// One `bench` CSV line. Field order fixes the header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub seed: u64,
    pub dist: String,
    pub scale: String,
    pub theta: Option<f64>,
    pub low: String,
    pub panel: String,
    pub accum: String,
    pub nb: usize,
    pub equilibrate: bool,
    pub t_scale: f64,
    pub t_factor: f64,
    pub t_refine: f64,
    pub t_total: f64,
    pub iters: usize,
    pub berr: f64,
    pub fom: f64,
    pub valid: bool,
    pub debug_only: bool,
}

pub const BENCH_HEADER: &str = "n,seed,dist,scale,theta,low,panel,accum,nb,equilibrate,\
t_scale,t_factor,t_refine,t_total,iters,berr,fom,valid,debug_only";
pub const PIVOT_HEADER: &str = "n,seed,max_pivot,max_pivot_col,sqrt_n,c58_sqrt_n,n_045";
pub const NORM_HEADER: &str = "n,seed,pivoting,norm1,norm2,norminf,status";

/// Wall-clock columns of the bench schema.
pub const TIMING_COLUMNS: [&str; 5] = ["t_scale", "t_factor", "t_refine", "t_total", "fom"];

impl From<&BenchReport> for BenchRow {
    fn from(r: &BenchReport) -> Self {
        let s = &r.spec;
        Self {
            n: s.n,
            seed: s.seed,
            dist: s.distribution.cli_name().to_string(),
            scale: s.diag_scaling.cli_name().to_string(),
            theta: s.diag_scaling.theta(),
            low: r.factor_cfg.low_fmt.cli_name().to_string(),
            panel: r.factor_cfg.panel_fmt.cli_name().to_string(),
            accum: r.factor_cfg.accum_fmt.cli_name().to_string(),
            nb: r.factor_cfg.block_size,
            equilibrate: r.equilibrate,
            t_scale: r.t_scale,
            t_factor: r.t_factor,
            t_refine: r.t_refine,
            t_total: r.t_total,
            iters: r.iterations,
            berr: r.berr,
            fom: r.fom_ops_per_sec,
            valid: r.valid,
            debug_only: r.debug_only,
        }
    }
}

pub fn write_csv<T: Serialize>(out: impl Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_csv(std::fs::File::create(path)?, rows)
}

pub fn read_csv<T: DeserializeOwned>(input: impl Read) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn read_csv_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_csv(std::fs::File::open(path)?)
}
