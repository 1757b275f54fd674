//! Closed-form references for the Rayleigh benchmark, support measurement
//! and parameter sweeps.
//!
//! In the space `H¹₀ × H¹` the minimum of the ratio is `min(π²a, bc²)`:
//! minimizing over `v` leaves `a∫β'² + bc²(∫β)²`, and splitting `β` into its
//! mean and a zero-mean part separates the two branches. In the cone
//! `β ≥ 0` the minimizer is constant when `π²a ≥ bc²`. Otherwise it is the
//! profile `1 + cos(πx/D)` on a support of length `D` touching one end, with
//! `D³ = π²a / bc²` and minimum `bc²·D = (π²a)^{1/3} (bc²)^{2/3}`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::bifurcation::{solve_bifurcation, BifurcationParams};
use crate::error::invalid_arg;
use crate::fem1d::{build_mesh, ScalarField};
use crate::models::{rayleigh_pencil, RayleighQuotientModel};
use crate::stability::{solve_cone_eigen, ConeParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "lowercase")
)]
pub enum Branch {
    Constant,
    Localized,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Constant => "constant",
            Branch::Localized => "localized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClosedFormReference {
    pub r_space: f64,
    pub r_cone: f64,
    pub d_star: f64,
    pub branch: Branch,
}

pub fn closed_form_reference(a: f64, b: f64, c: f64) -> Result<ClosedFormReference> {
    RayleighQuotientModel::new(a, b, c)?;
    Ok(reference_for_products(PI * PI * a, b * c * c))
}

/// The same references as functions of the products `π²a` and `bc²`.
pub fn reference_for_products(pi2a: f64, bc2: f64) -> ClosedFormReference {
    let r_space = pi2a.min(bc2);
    if pi2a < bc2 {
        let d_star = libm::cbrt(pi2a / bc2);
        ClosedFormReference {
            r_space,
            r_cone: bc2 * d_star,
            d_star,
            branch: Branch::Localized,
        }
    } else {
        ClosedFormReference {
            r_space,
            r_cone: bc2,
            d_star: 1.0,
            branch: Branch::Constant,
        }
    }
}

/// The localized cone minimizer `1 + cos(πx/D)` on `[0, D]`, zero beyond.
pub fn localized_profile(d: f64, x: f64) -> f64 {
    if x < d {
        1.0 + libm::cos(PI * x / d)
    } else {
        0.0
    }
}

/// Measure of `{x : β_h(x) > ε·max β}` for the piecewise linear `β_h`.
pub fn support_size(beta: &ScalarField<'_>, epsilon_rel: f64) -> Result<f64> {
    if !(epsilon_rel >= 0.0) {
        return Err(invalid_arg!("epsilon_rel must be nonnegative"));
    }
    let values = beta.values();
    let peak = values.iter().fold(0.0_f64, |m, v| m.max(*v));
    if peak <= 0.0 {
        return Err(Error::UndefinedSupport);
    }
    let t = epsilon_rel * peak;
    let nodes = beta.mesh().nodes();
    let mut measure = 0.0;
    for i in 0..values.len() - 1 {
        let (p, q) = (values[i], values[i + 1]);
        let h = nodes[i + 1] - nodes[i];
        measure += match (p > t, q > t) {
            (true, true) => h,
            (false, false) => 0.0,
            (true, false) => h * (p - t) / (p - q),
            (false, true) => h * (q - t) / (q - p),
        };
    }
    Ok(measure)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default, deny_unknown_fields)
)]
pub struct SweepConfig {
    pub n_cells: usize,
    pub epsilon_rel: f64,
    pub bifurcation: BifurcationParams,
    pub stability: ConeParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_cells: 1000,
            epsilon_rel: 1e-6,
            bifurcation: BifurcationParams::default(),
            stability: ConeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRecord {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub pi2a: f64,
    pub bc2: f64,
    pub r_space_num: f64,
    pub r_space_ref: f64,
    pub r_cone_num: f64,
    pub r_cone_ref: f64,
    pub d_num: f64,
    pub d_ref: f64,
    pub branch_ref: Branch,
    pub converged_space: bool,
    pub converged_cone: bool,
    pub iters_cone: usize,
    /// `R_cone_num > 1`.
    pub stable: bool,
    /// Failure message of either solver, if any.
    pub error: Option<String>,
}

/// Solves one grid point with `b = 1`, `a = pi2a/π²` and `c = √bc2`.
/// Solver failures are recorded in the record, never propagated.
pub fn sweep_point(pi2a: f64, bc2: f64, config: &SweepConfig) -> Result<SweepRecord> {
    if !(pi2a > 0.0) || !(bc2 > 0.0) {
        return Err(invalid_arg!(
            "grid coordinates must be positive (pi2a={pi2a}, bc2={bc2})"
        ));
    }
    let (a, b, c) = (pi2a / (PI * PI), 1.0, libm::sqrt(bc2));
    let reference = reference_for_products(pi2a, bc2);
    let mut record = SweepRecord {
        a,
        b,
        c,
        pi2a,
        bc2,
        r_space_num: f64::NAN,
        r_space_ref: reference.r_space,
        r_cone_num: f64::NAN,
        r_cone_ref: reference.r_cone,
        d_num: f64::NAN,
        d_ref: reference.d_star,
        branch_ref: reference.branch,
        converged_space: false,
        converged_cone: false,
        iters_cone: 0,
        stable: false,
        error: None,
    };

    let mesh = build_mesh(config.n_cells)?;
    let model = RayleighQuotientModel::new(a, b, c)?;
    let rp = rayleigh_pencil(&model, &mesh, &[RayleighQuotientModel::clamped_ends(&mesh)])?;
    let all: Vec<usize> = (0..rp.dim()).collect();

    match solve_bifurcation(&rp.pencil, &all, 1, &config.bifurcation) {
        Ok(spectrum) => {
            record.r_space_num = spectrum.eigenvalues[0];
            record.converged_space = true;
        }
        Err(e) => record.error = Some(e.to_string()),
    }

    match solve_cone_eigen(&rp.pencil, &rp.cone(), &config.stability) {
        Ok(res) => {
            record.iters_cone = res.iterations;
            record.converged_cone = res.converged;
            if res.converged {
                record.r_cone_num = res.lambda_star;
                record.stable = res.lambda_star > 1.0;
                let beta = rp.extend(&res.z_star)?.second;
                let field = ScalarField::new(&mesh, beta)?;
                record.d_num = support_size(&field, config.epsilon_rel).unwrap_or(f64::NAN);
            }
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    Ok(record)
}

/// Evenly spaced values `min, …, max` (a single value when `count == 1`).
pub fn linspace(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => alloc::vec![min],
        _ => (0..count)
            .map(|i| min + (max - min) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Sequential sweep over the tensor grid, `pi2a` varying slowest.
pub fn run_sweep(
    pi2a_grid: &[f64],
    bc2_grid: &[f64],
    config: &SweepConfig,
) -> Result<Vec<SweepRecord>> {
    let mut out = Vec::with_capacity(pi2a_grid.len() * bc2_grid.len());
    for &p in pi2a_grid {
        for &q in bc2_grid {
            out.push(sweep_point(p, q, config)?);
        }
    }
    Ok(out)
}
