//! Grid specifications and the parallel sweep driver.

use std::str::FromStr;

use anyhow::{bail, Context, Error, Result};
use rayon::prelude::*;
use unilateral_core::harness::{linspace, sweep_point, SweepConfig, SweepRecord};

/// `MIN:MAX:COUNT`, or a single value.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.count)
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number {t:?} in grid {s:?}"))
        };
        let spec = match parts.as_slice() {
            [v] => {
                let v = num(v)?;
                GridSpec {
                    min: v,
                    max: v,
                    count: 1,
                }
            }
            [lo, hi, n] => GridSpec {
                min: num(lo)?,
                max: num(hi)?,
                count: n
                    .trim()
                    .parse()
                    .with_context(|| format!("bad count in grid {s:?}"))?,
            },
            _ => bail!("grid must be MIN:MAX:COUNT or a single value, got {s:?}"),
        };
        if !(spec.min > 0.0 && spec.max >= spec.min && spec.max.is_finite()) {
            bail!("grid bounds must satisfy 0 < MIN <= MAX, got {s:?}");
        }
        Ok(spec)
    }
}

/// Runs every grid point in parallel; records come back in grid order with
/// `pi2a` varying slowest.
pub fn parallel_sweep(pi2a: &[f64], bc2: &[f64], config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    let points: Vec<(f64, f64)> = pi2a
        .iter()
        .flat_map(|&p| bc2.iter().map(move |&q| (p, q)))
        .collect();
    let records = points
        .par_iter()
        .map(|&(p, q)| sweep_point(p, q, config))
        .collect::<unilateral_core::Result<Vec<_>>>()?;
    Ok(records)
}
