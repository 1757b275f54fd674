//! CSV and JSON writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use unilateral_core::harness::{Branch, SweepRecord};
use unilateral_core::stability::ConeIterate;

/// One sweep CSV row; the column names are part of the file format.
#[derive(Debug, Serialize)]
struct SweepRow {
    a: f64,
    b: f64,
    c: f64,
    pi2a: f64,
    bc2: f64,
    #[serde(rename = "R_space_num")]
    r_space_num: f64,
    #[serde(rename = "R_space_ref")]
    r_space_ref: f64,
    #[serde(rename = "R_cone_num")]
    r_cone_num: f64,
    #[serde(rename = "R_cone_ref")]
    r_cone_ref: f64,
    #[serde(rename = "D_num")]
    d_num: f64,
    #[serde(rename = "D_ref")]
    d_ref: f64,
    branch_ref: Branch,
    converged_space: bool,
    converged_cone: bool,
    iters_cone: usize,
}

impl From<&SweepRecord> for SweepRow {
    fn from(r: &SweepRecord) -> Self {
        Self {
            a: r.a,
            b: r.b,
            c: r.c,
            pi2a: r.pi2a,
            bc2: r.bc2,
            r_space_num: r.r_space_num,
            r_space_ref: r.r_space_ref,
            r_cone_num: r.r_cone_num,
            r_cone_ref: r.r_cone_ref,
            d_num: r.d_num,
            d_ref: r.d_ref,
            branch_ref: r.branch_ref,
            converged_space: r.converged_space,
            converged_cone: r.converged_cone,
            iters_cone: r.iters_cone,
        }
    }
}

pub const SWEEP_HEADER: &str = "a,b,c,pi2a,bc2,R_space_num,R_space_ref,R_cone_num,R_cone_ref,D_num,D_ref,branch_ref,converged_space,converged_cone,iters_cone";
pub const HISTORY_HEADER: &str = "iter,lambda,x_error,residual_norm";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn write_sweep_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut out = create(path)?;
    if records.is_empty() {
        // csv only emits a header alongside the first record
        writeln!(out, "{SWEEP_HEADER}")?;
    } else {
        let mut w = csv::Writer::from_writer(&mut out);
        for r in records {
            w.serialize(SweepRow::from(r))?;
        }
        w.flush()?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_history_csv(path: &Path, history: &[ConeIterate]) -> Result<()> {
    let mut out = create(path)?;
    if history.is_empty() {
        writeln!(out, "{HISTORY_HEADER}")?;
    } else {
        let mut w = csv::Writer::from_writer(&mut out);
        for it in history {
            w.serialize(it)?;
        }
        w.flush()?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// `results/sweep.csv` → `results/sweep.json`.
pub fn json_sibling(path: &Path) -> PathBuf {
    path.with_extension("json")
}
