//! P1 finite-element test problems for the `solve` subcommand.

use anyhow::{bail, Result};
use serde::Serialize;
use unilateral_core::fem1d::{assemble_forms, BlockState, IntervalMesh};
use unilateral_core::hybrid::{solve_equilibrium, HybridParams, SolveReport};
use unilateral_core::linalg::{complement, SymmetricOperator};
use unilateral_core::models::{
    BlockLayout, Bounds, CoupledQuadraticModel, EnergyModel, ObstacleQuadraticModel,
};

use crate::config::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// `½∫(κu'² + μu²) − ∫fu` with `u ≥ ψ`.
    Obstacle,
    /// Clamped displacement `u` coupled through `γ∫u'α` to an order parameter `α ≥ ψ`.
    Coupled,
}

#[derive(Debug, Serialize)]
pub struct SolveOutput {
    pub model: ModelKind,
    pub n_cells: usize,
    pub nodes: Vec<f64>,
    pub energy: f64,
    pub final_residual: f64,
    #[serde(flatten)]
    pub report: SolveReport,
}

/// Consistent load vector `M f` for `f(x) = amplitude · cos(2πx)`.
fn load_vector(mesh: &IntervalMesh, mass: &SymmetricOperator, amplitude: f64) -> Vec<f64> {
    let f = mesh.interpolate(|x| amplitude * (2.0 * std::f64::consts::PI * x).cos());
    mass.apply(&f)
}

pub fn obstacle_model(mesh: &IntervalMesh, cfg: &ModelConfig) -> Result<ObstacleQuadraticModel> {
    let forms = assemble_forms(mesh);
    let a = forms
        .stiffness
        .combine(cfg.stiffness, &forms.mass, cfg.reaction)?;
    let f = load_vector(mesh, &forms.mass, cfg.load);
    Ok(ObstacleQuadraticModel::new(
        a,
        f,
        vec![cfg.obstacle; mesh.n_nodes()],
    )?)
}

/// Returns the model and its order-parameter bounds.
pub fn coupled_model(
    mesh: &IntervalMesh,
    cfg: &ModelConfig,
) -> Result<(CoupledQuadraticModel, Bounds)> {
    let forms = assemble_forms(mesh);
    let n = mesh.n_nodes();
    let a_u = forms.stiffness.scaled(cfg.stiffness);
    let a_alpha = forms
        .stiffness
        .combine(cfg.stiffness, &forms.mass, cfg.reaction)?;
    let f_u = forms.mass.apply(&vec![cfg.load; n]);
    let f_alpha = load_vector(mesh, &forms.mass, cfg.load);
    let model = CoupledQuadraticModel::new(
        BlockLayout::stacked(n, n),
        &a_u,
        &a_alpha,
        &forms.mixed,
        cfg.coupling,
        &f_u,
        &f_alpha,
        &[0, n - 1],
    )?;
    // The alternating scheme needs a jointly convex energy, not just convex blocks.
    let free = complement(&model.fixed(), 2 * n);
    if model
        .hessian(&vec![0.0; 2 * n])
        .restrict(&free)?
        .cholesky()
        .is_err()
    {
        bail!(
            "coupling {} makes the energy nonconvex; reduce it",
            cfg.coupling
        );
    }
    Ok((model, Bounds::lower_only(vec![cfg.obstacle; n])?))
}

pub fn solve(
    kind: ModelKind,
    mesh: &IntervalMesh,
    cfg: &ModelConfig,
    params: &HybridParams,
) -> Result<SolveOutput> {
    let n = mesh.n_nodes();
    let (report, energy) = match kind {
        ModelKind::Obstacle => {
            let model = obstacle_model(mesh, cfg)?;
            let z0 = BlockState::new(vec![], vec![cfg.obstacle; n]);
            let report = solve_equilibrium(&model, &z0, &model.bounds(), params)?;
            let e = model.energy(&model.layout().join(&report.final_state)?);
            (report, e)
        }
        ModelKind::Coupled => {
            let (model, bounds) = coupled_model(mesh, cfg)?;
            let z0 = BlockState::new(vec![0.0; n], vec![cfg.obstacle; n]);
            let report = solve_equilibrium(&model, &z0, &bounds, params)?;
            let e = model.energy(&model.layout().join(&report.final_state)?);
            (report, e)
        }
    };
    Ok(SolveOutput {
        model: kind,
        n_cells: mesh.n_cells(),
        nodes: mesh.nodes().to_vec(),
        energy,
        final_residual: report.final_residual(),
        report,
    })
}
