//! Bound-constrained convex quadratic programs
//! `min ½ xᵀHx − fᵀx  s.t.  l ≤ x ≤ u` by a primal active-set method.
//!
//! Each iteration solves the equality-constrained problem on the current
//! working set, moves toward its minimizer as far as feasibility allows and
//! either adds the blocking bound or, at a stationary point of the working
//! set, releases the bound with the most negative multiplier. The objective
//! decreases monotonically and the method terminates finitely for positive
//! definite `H`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::invalid_arg;
use crate::linalg::{norm_inf, SymmetricOperator};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Free,
    Lower,
    Upper,
    /// `l = u`; never released.
    Fixed,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Indices held at a bound at the solution.
    pub active: Vec<usize>,
}

/// Solves the box-constrained QP starting from the feasible point `x0`.
///
/// Bounds may be infinite. `x0` is clamped onto the box first, so starting
/// points that violate the bounds by roundoff are accepted.
pub fn solve_box_qp(
    h: &SymmetricOperator,
    f: &[f64],
    lower: &[f64],
    upper: &[f64],
    x0: &[f64],
) -> Result<QpSolution> {
    let n = h.dim();
    for len in [f.len(), lower.len(), upper.len(), x0.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    if lower
        .iter()
        .zip(upper)
        .any(|(l, u)| l > u || l.is_nan() || u.is_nan())
    {
        return Err(invalid_arg!("inconsistent bounds"));
    }

    let mut x: Vec<f64> = x0
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(&v, (&l, &u))| v.clamp(l, u))
        .collect();
    let mut status: Vec<Status> = (0..n)
        .map(|i| {
            if lower[i] == upper[i] {
                Status::Fixed
            } else if x[i] == lower[i] {
                Status::Lower
            } else if x[i] == upper[i] {
                Status::Upper
            } else {
                Status::Free
            }
        })
        .collect();

    let scale = h.max_abs().max(norm_inf(f)).max(1e-300);
    let max_iter = 10 * n + 100;
    for iteration in 0..max_iter {
        let free: Vec<usize> = (0..n).filter(|&i| status[i] == Status::Free).collect();

        let mut target = x.clone();
        if !free.is_empty() {
            // H_FF y = f_F − H_FW x_W
            let mut fixed_part = x.clone();
            for &i in &free {
                fixed_part[i] = 0.0;
            }
            let hw = h.apply(&fixed_part);
            let rhs: Vec<f64> = free.iter().map(|&i| f[i] - hw[i]).collect();
            let chol = h.restrict(&free)?.cholesky().map_err(|_| {
                Error::Solver(format!(
                    "QP Hessian is not positive definite on {} free variables",
                    free.len()
                ))
            })?;
            let y = chol.solve(&rhs);
            for (&i, &v) in free.iter().zip(&y) {
                target[i] = v;
            }
        }

        let step: Vec<f64> = target.iter().zip(&x).map(|(t, v)| t - v).collect();
        let step_size = norm_inf(&step);
        let xscale = norm_inf(&x).max(1.0);

        if step_size <= 1e-14 * xscale {
            x = target;
            let mut g = h.apply(&x);
            g.iter_mut().zip(f).for_each(|(gi, fi)| *gi -= fi);
            // Multipliers: g_i at a lower bound, −g_i at an upper bound.
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..n {
                let mu = match status[i] {
                    Status::Lower => g[i],
                    Status::Upper => -g[i],
                    _ => continue,
                };
                if mu < -1e-13 * scale * xscale && worst.is_none_or(|(_, m)| mu < m) {
                    worst = Some((i, mu));
                }
            }
            match worst {
                Some((i, _)) => status[i] = Status::Free,
                None => {
                    let active = (0..n).filter(|&i| status[i] != Status::Free).collect();
                    return Ok(QpSolution {
                        x,
                        iterations: iteration + 1,
                        active,
                    });
                }
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking: Option<(usize, Status)> = None;
        for &i in &free {
            let p = step[i];
            if p < 0.0 && lower[i].is_finite() {
                let t = (lower[i] - x[i]) / p;
                if t < alpha {
                    alpha = t;
                    blocking = Some((i, Status::Lower));
                }
            } else if p > 0.0 && upper[i].is_finite() {
                let t = (upper[i] - x[i]) / p;
                if t < alpha {
                    alpha = t;
                    blocking = Some((i, Status::Upper));
                }
            }
        }
        let alpha = alpha.max(0.0);
        for &i in &free {
            x[i] = (x[i] + alpha * step[i]).clamp(lower[i], upper[i]);
        }
        if let Some((i, s)) = blocking {
            x[i] = if s == Status::Lower {
                lower[i]
            } else {
                upper[i]
            };
            status[i] = s;
        }
    }
    Err(Error::Solver(format!(
        "active-set QP did not terminate in {max_iter} iterations"
    )))
}
