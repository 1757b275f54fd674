//! Lower spectrum of a symmetric pencil restricted to the inactive dofs.
//!
//! The metric `B` may be singular with a kernel spanned by coordinate dofs
//! (the kinematic block of the Rayleigh pencil). Those dofs are eliminated by
//! the Schur complement `S = A_PP − A_PZ A_ZZ⁻¹ A_ZP`, leaving the definite
//! problem `S w = λ B_PP w`; the infinite eigenvalues disappear with them.
//!
//! Small problems use a dense reduction. Larger ones run shift-and-invert
//! Lanczos on `(S − σ B_PP)⁻¹ B_PP`, applied through a banded factorization of
//! `A − σB` so the Schur complement is never formed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::invalid_arg;
use crate::fem1d::{Block, BlockState};
use crate::linalg::{
    axpy, check_increasing, complement, dot, norm, pseudo_random, BandCholesky, SymmetricOperator,
};
use crate::models::{BlockLayout, Bounds};
use crate::{Error, Result};

/// A pair of symmetric operators `(A, B)` with `B` positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricPencil {
    a: SymmetricOperator,
    b: SymmetricOperator,
}

impl SymmetricPencil {
    pub fn new(a: SymmetricOperator, b: SymmetricOperator) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                actual: b.dim(),
            });
        }
        let tol = 1e-12 * b.max_abs();
        for seed in 1..=4 {
            let x = pseudo_random(b.dim(), seed);
            if b.quad_form(&x) < -tol * dot(&x, &x) {
                return Err(invalid_arg!("metric operator is not positive semidefinite"));
            }
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &SymmetricOperator {
        &self.a
    }

    pub fn b(&self) -> &SymmetricOperator {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `⟨Az, z⟩ / ⟨Bz, z⟩`.
    pub fn rayleigh_quotient(&self, z: &[f64]) -> f64 {
        self.a.quad_form(z) / self.b.quad_form(z)
    }

    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            a: self.a.restrict(indices)?,
            b: self.b.restrict(indices)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default, deny_unknown_fields)
)]
pub struct BifurcationParams {
    /// Positivity threshold on the smallest eigenvalue; `None` means
    /// `1e-10 · ‖A_r‖`.
    pub tol_pd: Option<f64>,
    /// Reduced dimensions up to this size use the dense path.
    pub dense_max_dim: usize,
    /// Relative residual required of every returned pair.
    pub tol_residual: f64,
}

impl Default for BifurcationParams {
    fn default() -> Self {
        Self {
            tol_pd: None,
            dense_max_dim: 400,
            tol_residual: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Spectrum {
    /// The smallest finite eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// `B`-normalized eigenvectors on the full pencil dimension, zero outside
    /// the inactive set.
    pub eigenvectors: Vec<Vec<f64>>,
    pub is_positive_definite: bool,
    /// Set when fewer pairs than requested exist.
    pub clamped: bool,
    pub tol_pd: f64,
}

/// Dofs strictly inside their bounds, plus every free kinematic dof.
/// `fixed` lists global Dirichlet dofs, which are never inactive.
pub fn inactive_set(
    layout: &BlockLayout,
    z: &BlockState,
    bounds: &Bounds,
    fixed: &[usize],
    tol_active: f64,
) -> Result<Vec<usize>> {
    let x = layout.join(z)?;
    let (lo, hi) = bounds.global(layout)?;
    let mut out = Vec::new();
    for g in 0..layout.dim() {
        if fixed.contains(&g) {
            continue;
        }
        let inside = match layout.locate(g).0 {
            Block::First => true,
            Block::Second => lo[g] + tol_active < x[g] && x[g] < hi[g] - tol_active,
        };
        if inside {
            out.push(g);
        }
    }
    Ok(out)
}

/// The `k` smallest eigenpairs of `A x = λ B x` on the `inactive` dofs.
pub fn solve_bifurcation(
    pencil: &SymmetricPencil,
    inactive: &[usize],
    k: usize,
    params: &BifurcationParams,
) -> Result<Spectrum> {
    if k == 0 {
        return Err(invalid_arg!("need k >= 1"));
    }
    if inactive.is_empty() {
        return Err(invalid_arg!("the inactive set is empty"));
    }
    check_increasing(inactive, pencil.dim())?;
    let reduced = pencil.restrict(inactive)?;

    let metric_free: Vec<usize> = (0..reduced.dim())
        .filter(|&i| !reduced.b.row_is_zero(i))
        .collect();
    let kernel = complement(&metric_free, reduced.dim());
    if metric_free.is_empty() {
        return Err(Error::Solver("metric vanishes on the inactive set".into()));
    }
    let clamped = k > metric_free.len();
    let k = k.min(metric_free.len());

    let split = Split {
        kernel,
        metric: metric_free,
    };
    let (values, vectors) = if split.metric.len() <= params.dense_max_dim {
        dense_pairs(&reduced, &split, k)?
    } else {
        lanczos_pairs(&reduced, &split, k, params.tol_residual)?
    };

    let a_norm = reduced.a.norm_inf();
    for (lambda, x) in values.iter().zip(&vectors) {
        let ax = reduced.a.apply(x);
        let bx = reduced.b.apply(x);
        let res: Vec<f64> = ax.iter().zip(&bx).map(|(a, b)| a - lambda * b).collect();
        if norm(&res) > 1e-8 * a_norm.max(f64::MIN_POSITIVE) * norm(x) {
            return Err(Error::Solver(format!(
                "eigenpair λ={lambda} failed the residual check"
            )));
        }
    }

    let tol_pd = params.tol_pd.unwrap_or(1e-10 * a_norm);
    let is_positive_definite = values[0] > tol_pd;
    let eigenvectors = vectors
        .into_iter()
        .map(|x| {
            let mut full = vec![0.0; pencil.dim()];
            for (&g, &v) in inactive.iter().zip(&x) {
                full[g] = v;
            }
            full
        })
        .collect();
    Ok(Spectrum {
        eigenvalues: values,
        eigenvectors,
        is_positive_definite,
        clamped,
        tol_pd,
    })
}

struct Split {
    /// Rows where `B` vanishes.
    kernel: Vec<usize>,
    metric: Vec<usize>,
}

impl Split {
    /// Full reduced vector from the metric part `w`, with kernel dofs
    /// `v = −A_ZZ⁻¹ A_ZP w`.
    fn lift(&self, a: &SymmetricOperator, azz: Option<&BandCholesky>, w: &[f64]) -> Vec<f64> {
        let n = self.kernel.len() + self.metric.len();
        let mut x = vec![0.0; n];
        for (&i, &v) in self.metric.iter().zip(w) {
            x[i] = v;
        }
        if let Some(chol) = azz {
            let ax = a.apply(&x);
            let rhs: Vec<f64> = self.kernel.iter().map(|&i| -ax[i]).collect();
            let v = chol.solve(&rhs);
            for (&i, &vi) in self.kernel.iter().zip(&v) {
                x[i] = vi;
            }
        }
        x
    }
}

fn kernel_factor(a: &SymmetricOperator, split: &Split) -> Result<Option<BandCholesky>> {
    if split.kernel.is_empty() {
        return Ok(None);
    }
    a.restrict(&split.kernel)?
        .cholesky()
        .map(Some)
        .map_err(|_| {
            Error::Solver("the block where the metric vanishes must be positive definite".into())
        })
}

fn dense_pairs(
    pencil: &SymmetricPencil,
    split: &Split,
    k: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let azz = kernel_factor(&pencil.a, split)?;
    let (z, p) = (&split.kernel, &split.metric);
    let mut s = pencil.a.block(p, p);
    if !z.is_empty() {
        let azp = pencil.a.block(z, p);
        let chol = pencil
            .a
            .block(z, z)
            .cholesky()
            .ok_or_else(|| Error::Solver("kinematic block is singular".into()))?;
        s -= azp.transpose() * chol.solve(&azp);
    }
    s = (&s + s.transpose()) * 0.5;
    let bpp = pencil.b.block(p, p);
    let l = bpp
        .cholesky()
        .ok_or_else(|| Error::Solver("metric is not definite off its coordinate kernel".into()))?
        .l();
    // C = L⁻¹ S L⁻ᵀ
    let linv_s = l
        .solve_lower_triangular(&s)
        .expect("Cholesky factor is nonsingular");
    let c = l
        .solve_lower_triangular(&linv_s.transpose())
        .expect("Cholesky factor is nonsingular");
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let lt = l.transpose();
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let y: DVector<f64> = eig.eigenvectors.column(idx).into_owned();
        let w = lt
            .solve_upper_triangular(&y)
            .expect("Cholesky factor is nonsingular");
        let x = split.lift(&pencil.a, azz.as_ref(), w.as_slice());
        values.push(eig.eigenvalues[idx]);
        vectors.push(normalize_b(&pencil.b, x));
    }
    Ok((values, vectors))
}

fn normalize_b(b: &SymmetricOperator, mut x: Vec<f64>) -> Vec<f64> {
    let s = libm::sqrt(b.quad_form(&x));
    x.iter_mut().for_each(|v| *v /= s);
    x
}

/// Finds a shift below the spectrum: the largest tried `σ` with `A − σB`
/// positive definite. By Sylvester's law of inertia every finite eigenvalue
/// then exceeds `σ`.
fn shifted_factor(pencil: &SymmetricPencil) -> Result<(f64, BandCholesky)> {
    let scale = pencil.a.norm_inf() / pencil.b.max_abs().max(f64::MIN_POSITIVE);
    let mut sigma = 0.0;
    let mut step = 1e-6 * scale;
    for _ in 0..80 {
        let shifted = pencil.a.combine(1.0, &pencil.b, -sigma)?;
        if let Ok(chol) = shifted.cholesky() {
            return Ok((sigma, chol));
        }
        sigma = -step;
        step *= 4.0;
    }
    Err(Error::Solver(
        "no shift makes A − σB positive definite".into(),
    ))
}

fn lanczos_pairs(
    pencil: &SymmetricPencil,
    split: &Split,
    k: usize,
    tol: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let azz = kernel_factor(&pencil.a, split)?;
    let (_, shifted) = shifted_factor(pencil)?;
    let p = &split.metric;
    let m = p.len();
    let n = pencil.dim();
    let bpp = pencil.b.restrict(p)?;

    // w ↦ [(A − σB)⁻¹ (0, B_PP w)]_P = (S − σB_PP)⁻¹ B_PP w
    let op = |w: &[f64]| -> Vec<f64> {
        let bw = bpp.apply(w);
        let mut rhs = vec![0.0; n];
        for (&i, &v) in p.iter().zip(&bw) {
            rhs[i] = v;
        }
        let x = shifted.solve(&rhs);
        p.iter().map(|&i| x[i]).collect()
    };
    let inner = |x: &[f64], y: &[f64]| bpp.bilinear(x, y);

    let mut q0 = pseudo_random(m, 7);
    q0.iter_mut().for_each(|v| *v += 1.5);
    let nrm = libm::sqrt(inner(&q0, &q0));
    q0.iter_mut().for_each(|v| *v /= nrm);

    let mut basis: Vec<Vec<f64>> = vec![q0];
    let mut bbasis: Vec<Vec<f64>> = vec![bpp.apply(&basis[0])];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let max_steps = m;
    let mut check_at = (2 * k + 20).min(max_steps);

    loop {
        let j = basis.len() - 1;
        let mut w = op(&basis[j]);
        let alpha = dot(&w, &bbasis[j]);
        alphas.push(alpha);
        // Full reorthogonalization in the B-inner product, twice.
        for _ in 0..2 {
            for (q, bq) in basis.iter().zip(&bbasis) {
                let c = dot(&w, bq);
                axpy(-c, q, &mut w);
            }
        }
        let bw = bpp.apply(&w);
        let beta = libm::sqrt(dot(&w, &bw).max(0.0));
        let steps = alphas.len();
        let exhausted = steps == max_steps || beta <= 1e-14 * alpha.abs().max(f64::MIN_POSITIVE);

        if steps >= check_at || exhausted {
            let (thetas, s) = tridiagonal_eigen(&alphas, &betas);
            // Largest θ correspond to the smallest λ = σ + 1/θ.
            let top: Vec<usize> = (0..thetas.len()).rev().take(k).collect();
            let done = top.len() == k
                && top.iter().all(|&i| {
                    let last = s[(steps - 1, i)];
                    (beta * last).abs() <= tol * thetas[i].abs()
                });
            if done || exhausted {
                if top.len() < k {
                    return Err(Error::Solver(
                        "Krylov space too small for the requested pairs".into(),
                    ));
                }
                let mut pairs: Vec<(f64, Vec<f64>)> = top
                    .iter()
                    .map(|&i| {
                        let mut w = vec![0.0; m];
                        for (c, q) in basis.iter().enumerate() {
                            axpy(s[(c, i)], q, &mut w);
                        }
                        let x = normalize_b(&pencil.b, split.lift(&pencil.a, azz.as_ref(), &w));
                        // Rayleigh quotient is more accurate than σ + 1/θ.
                        (pencil.a.quad_form(&x), x)
                    })
                    .collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                return Ok(pairs.into_iter().unzip());
            }
            check_at = (check_at + check_at / 2 + 10).min(max_steps);
        }

        betas.push(beta);
        w.iter_mut().for_each(|v| *v /= beta);
        bbasis.push(bw.iter().map(|v| v / beta).collect());
        basis.push(w);
    }
}

fn tridiagonal_eigen(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alphas.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alphas[i]
        } else if i == j + 1 {
            betas[j]
        } else if j == i + 1 {
            betas[i]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem1d::build_mesh;
    use crate::models::{rayleigh_pencil, RayleighQuotientModel};
    use alloc::vec;
    use core::f64::consts::PI;

    fn dense(rows: &[Vec<f64>]) -> SymmetricOperator {
        SymmetricOperator::from_dense_rows(rows).unwrap()
    }

    #[test]
    fn inactive_set_examples() {
        let layout = BlockLayout::stacked(0, 3);
        let z = BlockState::new(vec![], vec![0.0, 0.3, 0.0]);
        let b = Bounds::lower_only(vec![0.0; 3]).unwrap();
        assert_eq!(inactive_set(&layout, &z, &b, &[], 1e-8).unwrap(), vec![1]);

        let layout = BlockLayout::interleaved(3);
        let z = BlockState::new(vec![0.0; 3], vec![0.5; 3]);
        let got = inactive_set(&layout, &z, &b, &[0, 4], 1e-8).unwrap();
        assert_eq!(got, vec![1, 2, 3, 5]);

        let z = BlockState::new(vec![0.0; 3], vec![0.0; 3]);
        assert_eq!(
            inactive_set(&layout, &z, &b, &[0, 4], 1e-8).unwrap(),
            vec![2]
        );
    }

    #[test]
    fn diagonal_pencil() {
        let p = SymmetricPencil::new(
            SymmetricOperator::from_diagonal(&[2.0, 5.0]),
            SymmetricOperator::identity(2),
        )
        .unwrap();
        let s = solve_bifurcation(&p, &[0, 1], 1, &BifurcationParams::default()).unwrap();
        assert!((s.eigenvalues[0] - 2.0).abs() < 1e-14);
        assert!((s.eigenvectors[0][0].abs() - 1.0).abs() < 1e-14);
        assert_eq!(s.eigenvectors[0][1], 0.0);
        assert!(s.is_positive_definite);
    }

    #[test]
    fn two_by_two_pencil() {
        let p = SymmetricPencil::new(
            dense(&[vec![2.0, -1.0], vec![-1.0, 2.0]]),
            SymmetricOperator::identity(2),
        )
        .unwrap();
        let s = solve_bifurcation(&p, &[0, 1], 2, &BifurcationParams::default()).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 3.0).abs() < 1e-14);
        let v = &s.eigenvectors[0];
        assert!((v[0] - v[1]).abs() < 1e-14);
        let v = &s.eigenvectors[1];
        assert!((v[0] + v[1]).abs() < 1e-14);
        // k larger than the dimension is clamped.
        let s = solve_bifurcation(&p, &[0, 1], 5, &BifurcationParams::default()).unwrap();
        assert!(s.clamped);
        assert_eq!(s.eigenvalues.len(), 2);
    }

    #[test]
    fn indefinite_restriction_is_flagged() {
        let p = SymmetricPencil::new(
            dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]),
            SymmetricOperator::identity(2),
        )
        .unwrap();
        let s = solve_bifurcation(&p, &[0, 1], 1, &BifurcationParams::default()).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!(!s.is_positive_definite);
        let s = solve_bifurcation(&p, &[1], 1, &BifurcationParams::default()).unwrap();
        assert!(s.is_positive_definite);
        assert_eq!(s.eigenvectors[0][0], 0.0);
    }

    #[test]
    fn singular_kinematic_block_is_an_error() {
        let a = dense(&[vec![0.0, 1.0], vec![1.0, 1.0]]);
        let b = SymmetricOperator::from_diagonal(&[0.0, 1.0]);
        let p = SymmetricPencil::new(a, b).unwrap();
        assert!(matches!(
            solve_bifurcation(&p, &[0, 1], 1, &BifurcationParams::default()),
            Err(Error::Solver(_))
        ));
        assert!(solve_bifurcation(&p, &[], 1, &BifurcationParams::default()).is_err());
    }

    fn rayleigh(a: f64, b: f64, c: f64, n: usize) -> crate::models::RayleighPencil {
        let mesh = build_mesh(n).unwrap();
        let m = RayleighQuotientModel::new(a, b, c).unwrap();
        rayleigh_pencil(&m, &mesh, &[RayleighQuotientModel::clamped_ends(&mesh)]).unwrap()
    }

    #[test]
    fn rayleigh_space_minimum_branches() {
        let rp = rayleigh(1.0, 1.0, 4.0, 200);
        let all: Vec<usize> = (0..rp.dim()).collect();
        let s = solve_bifurcation(&rp.pencil, &all, 1, &BifurcationParams::default()).unwrap();
        assert!((s.eigenvalues[0] - PI * PI).abs() / (PI * PI) < 1e-3);

        let rp = rayleigh(1.0, 1.0, 2.0, 200);
        let s = solve_bifurcation(&rp.pencil, &all, 1, &BifurcationParams::default()).unwrap();
        assert!((s.eigenvalues[0] - 4.0).abs() / 4.0 < 1e-3);
        let beta = rp.extend(&s.eigenvectors[0]).unwrap().second;
        let mean = beta.iter().sum::<f64>() / beta.len() as f64;
        assert!(beta.iter().all(|v| (v - mean).abs() < 1e-6 * mean.abs()));
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let rp = rayleigh(0.3, 1.0, 3.0, 150);
        let all: Vec<usize> = (0..rp.dim()).collect();
        let dense = solve_bifurcation(&rp.pencil, &all, 4, &BifurcationParams::default()).unwrap();
        let params = BifurcationParams {
            dense_max_dim: 10,
            ..BifurcationParams::default()
        };
        let sparse = solve_bifurcation(&rp.pencil, &all, 4, &params).unwrap();
        for (d, s) in dense.eigenvalues.iter().zip(&sparse.eigenvalues) {
            assert!((d - s).abs() <= 1e-9 * d.abs(), "{d} vs {s}");
        }
    }
}
