//! Smallest eigenvalue of a symmetric pencil over a convex cone.
//!
//! The cone is `{z : z_i ≥ 0 for order-parameter dofs, z_i = 0 on fixed dofs}`.
//! The projection-and-scaling iteration is
//!
//! ```text
//! λ_k     = ⟨A z_k, z_k⟩ / ⟨B z_k, z_k⟩
//! r_k     = A z_k − λ_k B z_k
//! z'      = Π_K(z_k − s P⁻¹ r_k)
//! z_{k+1} = z' / ‖z'‖_B
//! ```
//!
//! With the Euclidean metric `P = I` and `Π_K` is nodal clipping. With the
//! energy metric `P = A + τB` and `Π_K` is the projection in the `P` inner
//! product, a bound-constrained quadratic program; for `s = 1` the step is a
//! projected inverse iteration, whose Rayleigh quotient never increases and
//! whose rate does not degrade with mesh refinement. The default
//! shift-invert metric takes `τ = −σ'` with `σ'` just below the smallest
//! eigenvalue of the pencil on the free dofs, found by bisection on Cholesky
//! success of `A − σB`.
//!
//! Monotonicity, for `s = 1`, `P ≻ 0`, `λ + τ > 0` and `‖z‖_B = 1`: the step
//! is `y = (λ + τ)P⁻¹Bz`, so `w = z'` before scaling minimizes
//! `q(w) = ½wᵀPw − (λ + τ)wᵀBz` over the cone. Optimality along the ray
//! through `w` gives `wᵀPw = (λ + τ)⟨w, z⟩_B`, and comparing with the ray
//! through `z` gives `wᵀPw ≥ λ + τ`. With Cauchy–Schwarz,
//! `R(w) + τ = wᵀPw / ‖w‖²_B ≤ (λ + τ)² / wᵀPw ≤ λ + τ`.
//!
//! At a solution the residual `r*` need not vanish: it is orthogonal to `z*`
//! and lies in the dual cone, which [`ConeResult`] reports.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bifurcation::SymmetricPencil;
use crate::error::invalid_arg;
use crate::linalg::{
    axpy, check_increasing, complement, distance, dot, norm, pseudo_random, BandCholesky,
    SymmetricOperator,
};
use crate::qp::solve_box_qp;
use crate::{Error, Result};

/// Product of a nonnegative orthant on some coordinates, `{0}` on fixed
/// coordinates and the whole line elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Cone {
    dim: usize,
    nonneg: Vec<usize>,
    fixed: Vec<usize>,
}

impl Cone {
    pub fn new(dim: usize, mut nonneg: Vec<usize>, mut fixed: Vec<usize>) -> Result<Self> {
        nonneg.sort_unstable();
        fixed.sort_unstable();
        check_increasing(&nonneg, dim)?;
        check_increasing(&fixed, dim)?;
        if nonneg.iter().any(|i| fixed.binary_search(i).is_ok()) {
            return Err(invalid_arg!(
                "a dof cannot be both sign-constrained and fixed"
            ));
        }
        Ok(Self { dim, nonneg, fixed })
    }

    /// The nonnegative orthant of `R^dim`.
    pub fn orthant(dim: usize) -> Self {
        Self {
            dim,
            nonneg: (0..dim).collect(),
            fixed: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nonneg(&self) -> &[usize] {
        &self.nonneg
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let mut z = y.to_vec();
        for &i in &self.nonneg {
            z[i] = z[i].max(0.0);
        }
        for &i in &self.fixed {
            z[i] = 0.0;
        }
        z
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.nonneg.iter().all(|&i| z[i] >= 0.0) && self.fixed.iter().all(|&i| z[i] == 0.0)
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::NEG_INFINITY; self.dim];
        let mut hi = vec![f64::INFINITY; self.dim];
        for &i in &self.nonneg {
            lo[i] = 0.0;
        }
        for &i in &self.fixed {
            lo[i] = 0.0;
            hi[i] = 0.0;
        }
        (lo, hi)
    }
}

/// Nodal projection onto `cone`: clips sign-constrained dofs at zero and
/// resets fixed dofs.
pub fn project_cone(cone: &Cone, y: &[f64]) -> Vec<f64> {
    cone.project(y)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ConeMetric {
    /// `P = I`; the default step is `1 / λ_max(A)`.
    Euclidean,
    /// `P = A + shift·B`, which must be positive definite off the fixed
    /// dofs; the default step is 1.
    Energy { shift: f64 },
    /// `P = A − σB` with `σ` just below the smallest eigenvalue of the pencil
    /// on the free dofs, located by bisection on the success of a Cholesky
    /// factorization. `margin` is the gap, relative to `|σ|`. The default
    /// step is 1, making this a shifted projected inverse iteration.
    ShiftInvert { margin: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum InitialGuess {
    /// Zero on unconstrained dofs and `1 + i/m` on the `i`-th of `m`
    /// sign-constrained dofs. Strictly positive but not constant, so it is not
    /// an eigenvector of pencils that have constants in their spectrum.
    Ramp,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default, deny_unknown_fields)
)]
pub struct ConeParams {
    /// Step `s`; `None` picks the metric's default.
    pub step_scale: Option<f64>,
    pub max_iter: usize,
    pub tol_lambda: f64,
    pub tol_x: f64,
    pub metric: ConeMetric,
    pub initial: InitialGuess,
}

impl Default for ConeParams {
    fn default() -> Self {
        Self {
            step_scale: None,
            max_iter: 5000,
            tol_lambda: 1e-10,
            tol_x: 1e-8,
            metric: ConeMetric::ShiftInvert { margin: 1e-6 },
            initial: InitialGuess::Ramp,
        }
    }
}

impl ConeParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.step_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid_arg!("step scale must be positive, got {s}"));
            }
        }
        if !(self.tol_lambda > 0.0) || !(self.tol_x > 0.0) {
            return Err(invalid_arg!("tolerances must be positive"));
        }
        if let ConeMetric::ShiftInvert { margin } = self.metric {
            if !(margin > 0.0 && margin < 1.0) {
                return Err(invalid_arg!(
                    "shift margin must lie in (0, 1), got {margin}"
                ));
            }
        }
        if self.max_iter == 0 {
            return Err(invalid_arg!("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConeIterate {
    pub iter: usize,
    pub lambda: f64,
    /// `‖z_k − z_{k−1}‖₂ / ‖z_k‖₂`.
    pub x_error: f64,
    /// `‖A z_k − λ_k B z_k‖₂`.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The projection annihilated the `B`-norm; the last valid pair is returned.
    Degenerate,
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConeResult {
    pub lambda_star: f64,
    pub z_star: Vec<f64>,
    pub residual: Vec<f64>,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub step_scale: f64,
    pub history: Vec<ConeIterate>,
    /// `⟨r*, z*⟩`.
    pub complementarity: f64,
    /// `max(0, −min r*_i)` over sign-constrained dofs with `z*_i = 0`.
    pub dual_feasibility_violation: f64,
    /// `max |r*_i|` over unconstrained dofs and sign-constrained dofs with `z*_i > 0`.
    pub stationarity_violation: f64,
}

impl ConeResult {
    /// `λ* > 0`: the quadratic form is positive on the cone.
    pub fn is_stable(&self) -> bool {
        self.lambda_star > 0.0
    }
}

/// Runs the projection-and-scaling iteration for the smallest cone eigenvalue.
pub fn solve_cone_eigen(
    pencil: &SymmetricPencil,
    cone: &Cone,
    params: &ConeParams,
) -> Result<ConeResult> {
    params.validate()?;
    let n = pencil.dim();
    if cone.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: cone.dim(),
        });
    }
    let (a, b) = (pencil.a(), pencil.b());

    let z0 = match &params.initial {
        InitialGuess::Ramp => {
            let mut z = vec![0.0; n];
            let m = cone.nonneg().len().max(1) as f64;
            for (k, &i) in cone.nonneg().iter().enumerate() {
                z[i] = 1.0 + k as f64 / m;
            }
            z
        }
        InitialGuess::Given(z) => {
            if z.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: z.len(),
                });
            }
            z.clone()
        }
    };
    let z0 = cone.project(&z0);
    let b0 = b.quad_form(&z0);
    if !(b0 > 0.0) {
        return Err(invalid_arg!(
            "initial guess has zero B-norm after projection"
        ));
    }
    let mut z: Vec<f64> = z0.iter().map(|v| v / libm::sqrt(b0)).collect();

    let mut lambda = pencil.rayleigh_quotient(&z);
    let stepper = Stepper::new(pencil, cone, &params.metric, lambda)?;
    let s = match (params.step_scale, &params.metric) {
        (Some(s), _) => s,
        (None, ConeMetric::Euclidean) => 1.0 / spectral_radius(a),
        (None, _) => 1.0,
    };

    let mut history = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    for k in 1..=params.max_iter {
        let az = a.apply(&z);
        let bz = b.apply(&z);
        let r: Vec<f64> = az.iter().zip(&bz).map(|(x, y)| x - lambda * y).collect();
        let projected = stepper.step(&z, &r, s)?;
        let bn = b.quad_form(&projected);
        if !(bn > 0.0) {
            termination = Termination::Degenerate;
            break;
        }
        let next: Vec<f64> = projected.iter().map(|v| v / libm::sqrt(bn)).collect();
        let next_lambda = pencil.rayleigh_quotient(&next);
        if !next_lambda.is_finite() || next.iter().any(|v| !v.is_finite()) {
            termination = Termination::Diverged;
            break;
        }
        let x_error = distance(&next, &z) / norm(&next);
        let d_lambda = (next_lambda - lambda).abs();
        z = next;
        lambda = next_lambda;
        iterations = k;
        let az = a.apply(&z);
        let bz = b.apply(&z);
        let residual_norm = libm::sqrt(
            az.iter()
                .zip(&bz)
                .map(|(x, y)| (x - lambda * y) * (x - lambda * y))
                .sum(),
        );
        history.push(ConeIterate {
            iter: k,
            lambda,
            x_error,
            residual_norm,
        });
        if d_lambda <= params.tol_lambda && x_error <= params.tol_x {
            termination = Termination::Converged;
            break;
        }
    }

    let az = a.apply(&z);
    let bz = b.apply(&z);
    let mut residual: Vec<f64> = az.iter().zip(&bz).map(|(x, y)| x - lambda * y).collect();
    // When r* is tiny the quotient loses digits to cancellation; refine it
    // against the residual so that ⟨r*, z*⟩ is at roundoff relative to ‖r*‖‖z*‖.
    let zbz = dot(&z, &bz);
    for _ in 0..2 {
        let delta = dot(&residual, &z) / zbz;
        if !(delta.is_finite() && delta != 0.0) {
            break;
        }
        lambda += delta;
        axpy(-delta, &bz, &mut residual);
    }
    let complementarity = dot(&residual, &z);
    let mut dual = 0.0_f64;
    let mut stationarity = 0.0_f64;
    let mut constrained = vec![false; n];
    for &i in cone.nonneg() {
        constrained[i] = true;
        if z[i] == 0.0 {
            dual = dual.max(-residual[i]);
        } else {
            stationarity = stationarity.max(residual[i].abs());
        }
    }
    for &i in cone.fixed() {
        constrained[i] = true;
    }
    for i in (0..n).filter(|&i| !constrained[i]) {
        stationarity = stationarity.max(residual[i].abs());
    }

    Ok(ConeResult {
        lambda_star: lambda,
        z_star: z,
        residual,
        converged: termination == Termination::Converged,
        termination,
        iterations,
        step_scale: s,
        history,
        complementarity,
        dual_feasibility_violation: dual,
        stationarity_violation: stationarity,
    })
}

enum Stepper<'a> {
    Euclidean {
        cone: &'a Cone,
    },
    Energy {
        cone: &'a Cone,
        metric: SymmetricOperator,
        chol: BandCholesky,
        free: Vec<usize>,
    },
}

impl<'a> Stepper<'a> {
    /// `lambda0` is the Rayleigh quotient of the initial guess, an upper
    /// bound for the shift search.
    fn new(
        pencil: &SymmetricPencil,
        cone: &'a Cone,
        metric: &ConeMetric,
        lambda0: f64,
    ) -> Result<Self> {
        let free = complement(cone.fixed(), cone.dim());
        let shift = match *metric {
            ConeMetric::Euclidean => return Ok(Self::Euclidean { cone }),
            ConeMetric::Energy { shift } => shift,
            ConeMetric::ShiftInvert { margin } => {
                let a = pencil.a().restrict(&free)?;
                let b = pencil.b().restrict(&free)?;
                let sigma = definite_limit(&a, &b, lambda0)?;
                -(sigma - margin * sigma.abs().max(1e-3 * lambda0.abs()).max(f64::MIN_POSITIVE))
            }
        };
        let metric = pencil
            .a()
            .combine(1.0, pencil.b(), shift)?
            .restrict(&free)?;
        let chol = metric.cholesky().map_err(|_| {
            Error::Solver(format!("A + {shift}·B is not positive definite; use a larger shift or the Euclidean metric"))
        })?;
        Ok(Self::Energy {
            cone,
            metric,
            chol,
            free,
        })
    }

    fn step(&self, z: &[f64], r: &[f64], s: f64) -> Result<Vec<f64>> {
        match self {
            Self::Euclidean { cone } => {
                let y: Vec<f64> = z.iter().zip(r).map(|(zi, ri)| zi - s * ri).collect();
                Ok(cone.project(&y))
            }
            Self::Energy {
                cone,
                metric,
                chol,
                free,
            } => {
                let zf: Vec<f64> = free.iter().map(|&i| z[i]).collect();
                let rf: Vec<f64> = free.iter().map(|&i| r[i]).collect();
                // argmin_{w ∈ K} ½‖w − y‖²_P with y = z − s P⁻¹ r, i.e. linear term P y = P z − s r.
                let pz = metric.apply(&zf);
                let f: Vec<f64> = pz.iter().zip(&rf).map(|(p, ri)| p - s * ri).collect();
                let (lo, hi) = cone.bounds();
                let lo: Vec<f64> = free.iter().map(|&i| lo[i]).collect();
                let hi: Vec<f64> = free.iter().map(|&i| hi[i]).collect();
                // Warm start from the unconstrained target if it is feasible.
                let y = chol.solve(&f);
                let start = if y.iter().zip(&lo).all(|(v, l)| v >= l) {
                    y
                } else {
                    zf
                };
                let sol = solve_box_qp(metric, &f, &lo, &hi, &start)?;
                let mut out = vec![0.0; cone.dim()];
                for (&i, &v) in free.iter().zip(&sol.x) {
                    out[i] = v;
                }
                Ok(out)
            }
        }
    }
}

/// Largest `σ` (to bisection accuracy) with `A − σB` positive definite,
/// given an upper bound `hi` such as a Rayleigh quotient.
fn definite_limit(a: &SymmetricOperator, b: &SymmetricOperator, hi: f64) -> Result<f64> {
    let definite = |sigma: f64| a.combine(1.0, b, -sigma).and_then(|m| m.cholesky()).is_ok();
    let mut hi = hi;
    let mut lo = hi.min(0.0);
    let mut step = hi.abs().max(1.0);
    let mut tries = 0;
    while !definite(lo) {
        hi = lo;
        lo -= step;
        step *= 4.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::Solver(
                "A − σB is not positive definite for any shift".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * hi.abs().max(lo.abs()) || mid == lo || mid == hi {
            break;
        }
        if definite(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Power-iteration estimate of `max |λ(A)|`, rounded up slightly.
fn spectral_radius(a: &SymmetricOperator) -> f64 {
    let mut x = pseudo_random(a.dim(), 11);
    let mut est = 0.0;
    for _ in 0..50 {
        let nx = norm(&x);
        if nx == 0.0 {
            break;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let y = a.apply(&x);
        est = norm(&y);
        x = y;
    }
    let est = 1.05 * est;
    if est > 0.0 {
        est
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymmetricOperator;
    use alloc::vec;

    fn pencil(rows: &[Vec<f64>]) -> SymmetricPencil {
        let a = SymmetricOperator::from_dense_rows(rows).unwrap();
        SymmetricPencil::new(a, SymmetricOperator::identity(rows.len())).unwrap()
    }

    #[test]
    fn projection_examples() {
        let cone = Cone::new(4, vec![2, 3], vec![]).unwrap();
        let y = [0.2, -0.1, -0.5, 0.7];
        let z = project_cone(&cone, &y);
        assert_eq!(z, vec![0.2, -0.1, 0.0, 0.7]);
        assert_eq!(project_cone(&cone, &z), z);
        assert_eq!(
            project_cone(&cone, &[1.0, 1.0, -1.0, -2.0]),
            vec![1.0, 1.0, 0.0, 0.0]
        );
        let with_bc = Cone::new(3, vec![1], vec![0]).unwrap();
        assert_eq!(with_bc.project(&[3.0, -1.0, 2.0]), vec![0.0, 0.0, 2.0]);
        assert!(Cone::new(2, vec![0], vec![0]).is_err());
    }

    #[test]
    fn interior_eigenvector_in_cone() {
        let p = pencil(&[vec![2.0, -1.0], vec![-1.0, 2.0]]);
        for metric in [
            ConeMetric::Euclidean,
            ConeMetric::Energy { shift: 0.0 },
            ConeMetric::ShiftInvert { margin: 1e-6 },
        ] {
            let params = ConeParams {
                metric,
                ..ConeParams::default()
            };
            let res = solve_cone_eigen(&p, &Cone::orthant(2), &params).unwrap();
            assert!(res.converged);
            assert!((res.lambda_star - 1.0).abs() < 1e-9);
            let h = 1.0 / libm::sqrt(2.0);
            assert!((res.z_star[0] - h).abs() < 1e-6 && (res.z_star[1] - h).abs() < 1e-6);
        }
    }

    #[test]
    fn boundary_minimizer_with_nonzero_residual() {
        let p = pencil(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        for metric in [
            ConeMetric::Euclidean,
            ConeMetric::Energy { shift: 2.0 },
            ConeMetric::ShiftInvert { margin: 1e-6 },
        ] {
            let params = ConeParams {
                metric,
                ..ConeParams::default()
            };
            let res = solve_cone_eigen(&p, &Cone::orthant(2), &params).unwrap();
            assert!(res.converged, "{:?}", res.termination);
            assert!((res.lambda_star - 1.0).abs() < 1e-9);
            let on_e1 = (res.z_star[0] - 1.0).abs() < 1e-9 && res.z_star[1] == 0.0;
            let on_e2 = (res.z_star[1] - 1.0).abs() < 1e-9 && res.z_star[0] == 0.0;
            assert!(on_e1 || on_e2, "{:?}", res.z_star);
            let mut r = res.residual.clone();
            r.sort_by(f64::total_cmp);
            assert!(r[0].abs() < 1e-9 && (r[1] - 2.0).abs() < 1e-9);
            assert!(res.complementarity.abs() < 1e-12);
            assert_eq!(res.dual_feasibility_violation, 0.0);
        }
    }

    #[test]
    fn energy_metric_requires_definite_operator() {
        let p = pencil(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let params = ConeParams {
            metric: ConeMetric::Energy { shift: 0.0 },
            ..ConeParams::default()
        };
        let r = solve_cone_eigen(&p, &Cone::orthant(2), &params);
        assert!(matches!(r, Err(Error::Solver(_))));
    }

    #[test]
    fn definite_limit_brackets_smallest_eigenvalue() {
        // eigenvalues −1 and 3
        let a = SymmetricOperator::from_dense_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let b = SymmetricOperator::identity(2);
        let sigma = definite_limit(&a, &b, 1.0).unwrap();
        assert!(sigma < -1.0 && sigma > -1.0 - 1e-10, "{sigma}");
        let sigma = definite_limit(&a.scaled(-1.0), &b, 100.0).unwrap();
        assert!(sigma < -3.0 && sigma > -3.0 - 1e-10, "{sigma}");
    }

    #[test]
    fn zero_initial_guess_is_rejected() {
        let p = pencil(&[vec![2.0, 0.0], vec![0.0, 3.0]]);
        let params = ConeParams {
            initial: InitialGuess::Given(vec![-1.0, -1.0]),
            ..ConeParams::default()
        };
        assert!(solve_cone_eigen(&p, &Cone::orthant(2), &params).is_err());
    }

    #[test]
    fn normalization_and_feasibility_hold_every_iteration() {
        let a = SymmetricOperator::from_dense_rows(&[
            vec![3.0, -1.0, 0.5],
            vec![-1.0, 2.0, -1.5],
            vec![0.5, -1.5, 4.0],
        ])
        .unwrap();
        let p =
            SymmetricPencil::new(a, SymmetricOperator::from_diagonal(&[1.0, 2.0, 0.5])).unwrap();
        let cone = Cone::new(3, vec![0, 2], vec![]).unwrap();
        let params = ConeParams {
            metric: ConeMetric::Euclidean,
            ..ConeParams::default()
        };
        let res = solve_cone_eigen(&p, &cone, &params).unwrap();
        assert!(res.converged);
        assert!(cone.contains(&res.z_star));
        assert!((p.b().quad_form(&res.z_star) - 1.0).abs() < 1e-12);
        for w in res.history.windows(2) {
            assert!(w[1].lambda <= w[0].lambda + 1e-12);
        }
    }
}
