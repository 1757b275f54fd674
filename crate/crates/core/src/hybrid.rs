//! Equilibrium under bound constraints.
//!
//! Phase one alternates exact minimizations over the kinematic block and the
//! bound-constrained order-parameter block. Once the constrained residual has
//! dropped by `switch_threshold`, phase two takes reduced-space Newton steps
//! on the full block system until the residual meets `tol_residual`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid_arg;
use crate::fem1d::{Block, BlockState};
use crate::linalg::{dot, gather, norm, norm_inf};
use crate::models::{Bounds, EnergyModel};
use crate::qp::solve_box_qp;
use crate::{Error, Result};

/// Distance to a bound below which a dof counts as sitting on it.
const AT_BOUND: f64 = 1e-12;
const MAX_HALVINGS: usize = 40;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default, deny_unknown_fields)
)]
pub struct HybridParams {
    pub max_it_amin: usize,
    pub max_it_newton: usize,
    pub tol_residual: f64,
    /// Phase one also hands over to Newton when the order parameter stops moving.
    pub tol_alpha_increment: f64,
    /// Residual reduction, relative to the initial residual, that triggers phase two.
    pub switch_threshold: f64,
}

impl Default for HybridParams {
    fn default() -> Self {
        Self {
            max_it_amin: 1000,
            max_it_newton: 50,
            tol_residual: 1e-10,
            tol_alpha_increment: 1e-12,
            switch_threshold: 1e-3,
        }
    }
}

impl HybridParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_it_amin == 0 || self.max_it_newton == 0 {
            return Err(invalid_arg!("iteration caps must be at least 1"));
        }
        for (name, v) in [
            ("tol_residual", self.tol_residual),
            ("tol_alpha_increment", self.tol_alpha_increment),
            ("switch_threshold", self.switch_threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid_arg!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveReport {
    pub converged: bool,
    pub iterations_phase1: usize,
    pub iterations_phase2: usize,
    /// Constrained residual norm: initial value, then one entry per
    /// alternate-minimization sweep and per Newton step.
    pub residual_history: Vec<f64>,
    /// Energy: initial value, then one entry per half-step of phase one and
    /// per Newton step.
    pub energy_history: Vec<f64>,
    /// Index into `residual_history` where Newton steps start.
    pub switch_index: Option<usize>,
    /// Number of phase-one sweeps used as Newton fallback.
    pub newton_fallbacks: usize,
    pub final_state: BlockState,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self
            .residual_history
            .last()
            .expect("history starts with the initial residual")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedResidual {
    pub vector: Vec<f64>,
    pub norm: f64,
}

/// Projected gradient: `g_i` on free dofs, `min(g_i, 0)` on dofs at their
/// lower bound, `max(g_i, 0)` at their upper bound and `0` on fixed dofs.
/// Its norm vanishes exactly at KKT points.
pub fn constrained_residual<M: EnergyModel + ?Sized>(
    model: &M,
    z: &BlockState,
    bounds: &Bounds,
) -> Result<ConstrainedResidual> {
    let problem = Problem::new(model, bounds)?;
    let x = model.layout().join(z)?;
    problem.check_feasible(&x)?;
    let vector = problem.residual(&x, &model.gradient(&x));
    let norm = norm(&vector);
    Ok(ConstrainedResidual { vector, norm })
}

/// Phase one only: alternate minimization until the residual falls below
/// `switch_threshold · ‖r₀‖` (or `tol_residual`), the order parameter
/// stagnates or `max_it_amin` sweeps have run.
pub fn alternate_minimization<M: EnergyModel + ?Sized>(
    model: &M,
    z0: &BlockState,
    bounds: &Bounds,
    params: &HybridParams,
) -> Result<SolveReport> {
    params.validate()?;
    let problem = Problem::new(model, bounds)?;
    let mut run = Run::start(&problem, z0)?;
    run.phase_one(params)?;
    Ok(run.finish(params))
}

/// Both phases: alternate minimization, then reduced-space Newton.
///
/// If the reduced Hessian is not positive definite or the line search fails,
/// one alternate-minimization sweep is performed and Newton is retried.
pub fn solve_equilibrium<M: EnergyModel + ?Sized>(
    model: &M,
    z0: &BlockState,
    bounds: &Bounds,
    params: &HybridParams,
) -> Result<SolveReport> {
    params.validate()?;
    let problem = Problem::new(model, bounds)?;
    let mut run = Run::start(&problem, z0)?;
    run.phase_one(params)?;
    if run.residual_norm() > params.tol_residual {
        run.phase_two(params)?;
    }
    Ok(run.finish(params))
}

struct Problem<'a, M: ?Sized> {
    model: &'a M,
    lower: Vec<f64>,
    upper: Vec<f64>,
    fixed: Vec<bool>,
    kinematic: Vec<usize>,
    order: Vec<usize>,
}

impl<'a, M: EnergyModel + ?Sized> Problem<'a, M> {
    fn new(model: &'a M, bounds: &Bounds) -> Result<Self> {
        let layout = model.layout();
        let (lower, upper) = bounds.global(&layout)?;
        let mut fixed = vec![false; layout.dim()];
        for i in model.fixed() {
            fixed[i] = true;
        }
        let kinematic = layout
            .indices(Block::First)
            .into_iter()
            .filter(|&i| !fixed[i])
            .collect();
        let order = layout
            .indices(Block::Second)
            .into_iter()
            .filter(|&i| !fixed[i])
            .collect();
        Ok(Self {
            model,
            lower,
            upper,
            fixed,
            kinematic,
            order,
        })
    }

    fn check_feasible(&self, x: &[f64]) -> Result<()> {
        for (i, &v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidState(format!("dof {i} is not finite")));
            }
            if v < self.lower[i] - AT_BOUND || v > self.upper[i] + AT_BOUND {
                return Err(Error::InvalidState(format!(
                    "dof {i} = {v} violates bounds [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        Ok(())
    }

    fn at_lower(&self, x: &[f64], i: usize) -> bool {
        self.lower[i].is_finite() && x[i] - self.lower[i] <= AT_BOUND * self.lower[i].abs().max(1.0)
    }

    fn at_upper(&self, x: &[f64], i: usize) -> bool {
        self.upper[i].is_finite() && self.upper[i] - x[i] <= AT_BOUND * self.upper[i].abs().max(1.0)
    }

    fn residual(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                if self.fixed[i] {
                    0.0
                } else if self.at_lower(x, i) {
                    g[i].min(0.0)
                } else if self.at_upper(x, i) {
                    g[i].max(0.0)
                } else {
                    g[i]
                }
            })
            .collect()
    }

    fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }
}

struct Run<'p, 'a, M: ?Sized> {
    problem: &'p Problem<'a, M>,
    x: Vec<f64>,
    energy: f64,
    residual_history: Vec<f64>,
    energy_history: Vec<f64>,
    iterations_phase1: usize,
    iterations_phase2: usize,
    switch_index: Option<usize>,
    newton_fallbacks: usize,
}

impl<'p, 'a, M: EnergyModel + ?Sized> Run<'p, 'a, M> {
    fn start(problem: &'p Problem<'a, M>, z0: &BlockState) -> Result<Self> {
        let x = problem.model.layout().join(z0)?;
        problem.check_feasible(&x)?;
        let mut x = x;
        problem.project(&mut x);
        let energy = problem.model.energy(&x);
        let r0 = norm(&problem.residual(&x, &problem.model.gradient(&x)));
        Ok(Self {
            problem,
            x,
            energy,
            residual_history: vec![r0],
            energy_history: vec![energy],
            iterations_phase1: 0,
            iterations_phase2: 0,
            switch_index: None,
            newton_fallbacks: 0,
        })
    }

    fn residual_norm(&self) -> f64 {
        *self.residual_history.last().unwrap()
    }

    fn record_residual(&mut self) {
        let g = self.problem.model.gradient(&self.x);
        let r = norm(&self.problem.residual(&self.x, &g));
        self.residual_history.push(r);
    }

    fn phase_one(&mut self, params: &HybridParams) -> Result<()> {
        let r0 = self.residual_history[0];
        if r0 <= params.tol_residual {
            return Ok(());
        }
        let target = (params.switch_threshold * r0).max(params.tol_residual);
        while self.residual_norm() > target && self.iterations_phase1 < params.max_it_amin {
            let increment = self.sweep()?;
            self.iterations_phase1 += 1;
            self.record_residual();
            if increment <= params.tol_alpha_increment {
                break;
            }
        }
        Ok(())
    }

    /// One alternate-minimization sweep; returns the order-parameter increment.
    fn sweep(&mut self) -> Result<f64> {
        let model = self.problem.model;

        // Kinematic block: unconstrained Newton step, exact for quadratics.
        let kin = &self.problem.kinematic;
        if !kin.is_empty() {
            let g = model.gradient(&self.x);
            let h = model.hessian(&self.x).restrict(kin)?;
            let chol = h
                .cholesky()
                .map_err(|_| Error::Solver("kinematic block operator is singular".into()))?;
            let step = chol.solve(&gather(&g, kin));
            let mut candidate = self.x.clone();
            for (&i, &s) in kin.iter().zip(&step) {
                candidate[i] -= s;
            }
            self.accept_along(candidate);
        }
        self.energy_history.push(self.energy);

        // Order-parameter block: bound-constrained quadratic model.
        let ord = &self.problem.order;
        let before = gather(&self.x, ord);
        if !ord.is_empty() {
            let g = model.gradient(&self.x);
            let h = model.hessian(&self.x).restrict(ord)?;
            // min ½ α'ᵀHα' − (Hα − g)ᵀα' over the box.
            let hx = h.apply(&before);
            let f: Vec<f64> = hx.iter().zip(ord).map(|(v, &i)| v - g[i]).collect();
            let lo = gather(&self.problem.lower, ord);
            let hi = gather(&self.problem.upper, ord);
            let sol = solve_box_qp(&h, &f, &lo, &hi, &before)?;
            let mut candidate = self.x.clone();
            for (&i, &v) in ord.iter().zip(&sol.x) {
                candidate[i] = v;
            }
            self.accept_along(candidate);
        }
        self.energy_history.push(self.energy);

        let after = gather(&self.x, ord);
        Ok(before
            .iter()
            .zip(&after)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Moves toward `candidate` with the largest step `2^-k` that does not
    /// raise the energy. The segment stays feasible because the box is convex.
    fn accept_along(&mut self, candidate: Vec<f64>) {
        let model = self.problem.model;
        let mut t = 1.0;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = if t == 1.0 {
                candidate.clone()
            } else {
                self.x
                    .iter()
                    .zip(&candidate)
                    .map(|(a, b)| a + t * (b - a))
                    .collect()
            };
            let e = model.energy(&trial);
            if e <= self.energy {
                self.x = trial;
                self.energy = e;
                return;
            }
            t *= 0.5;
        }
    }

    fn phase_two(&mut self, params: &HybridParams) -> Result<()> {
        self.switch_index = Some(self.residual_history.len() - 1);
        let model = self.problem.model;
        while self.residual_norm() > params.tol_residual
            && self.iterations_phase2 < params.max_it_newton
        {
            self.iterations_phase2 += 1;
            let g = model.gradient(&self.x);
            if !self.newton_step(&g, self.residual_norm())? {
                self.newton_fallbacks += 1;
                self.sweep()?;
            } else {
                self.energy_history.push(self.energy);
            }
            self.record_residual();
        }
        Ok(())
    }

    /// Returns `false` when the reduced Hessian is indefinite or the line search fails.
    fn newton_step(&mut self, g: &[f64], residual: f64) -> Result<bool> {
        let p = self.problem;
        let n = self.x.len();
        // ε-active set: dofs near a bound whose gradient pushes into it.
        let eps = residual.min(1e-8);
        let free: Vec<usize> = (0..n)
            .filter(|&i| {
                if p.fixed[i] {
                    return false;
                }
                let near_lower = self.x[i] - p.lower[i] <= eps;
                let near_upper = p.upper[i] - self.x[i] <= eps;
                !((near_lower && g[i] > 0.0) || (near_upper && g[i] < 0.0))
            })
            .collect();
        if free.is_empty() {
            return Ok(false);
        }
        let h = p.model.hessian(&self.x).restrict(&free)?;
        let Ok(chol) = h.cholesky() else {
            return Ok(false);
        };
        let d = chol.solve(&gather(g, &free));

        let mut t = 1.0;
        for _ in 0..MAX_HALVINGS {
            let mut trial = self.x.clone();
            for (&i, &di) in free.iter().zip(&d) {
                trial[i] -= t * di;
            }
            p.project(&mut trial);
            let moved: Vec<f64> = trial.iter().zip(&self.x).map(|(a, b)| a - b).collect();
            if norm_inf(&moved) == 0.0 {
                return Ok(false);
            }
            let e = p.model.energy(&trial);
            if e <= self.energy + ARMIJO * dot(g, &moved) {
                self.x = trial;
                self.energy = e;
                return Ok(true);
            }
            t *= 0.5;
        }
        Ok(false)
    }

    fn finish(self, params: &HybridParams) -> SolveReport {
        let converged = self.residual_norm() <= params.tol_residual;
        SolveReport {
            converged,
            iterations_phase1: self.iterations_phase1,
            iterations_phase2: self.iterations_phase2,
            final_state: self.problem.model.layout().split(&self.x),
            residual_history: self.residual_history,
            energy_history: self.energy_history,
            switch_index: self.switch_index,
            newton_fallbacks: self.newton_fallbacks,
        }
    }
}
