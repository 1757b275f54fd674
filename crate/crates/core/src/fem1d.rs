//! P1 finite elements on a uniform mesh of the unit interval.
//!
//! Element integrals are exact closed forms, so the assembled operators carry
//! no quadrature error.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid_arg;
use crate::linalg::{check_increasing, complement, SparseMatrix, SymmetricOperator};
use crate::{Error, Result};

/// Uniform mesh of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMesh {
    nodes: Vec<f64>,
    h: f64,
}

/// Builds a uniform mesh of `[0, 1]` with `n_cells` cells.
pub fn build_mesh(n_cells: usize) -> Result<IntervalMesh> {
    if n_cells == 0 {
        return Err(invalid_arg!("a mesh needs at least one cell"));
    }
    let n = n_cells as f64;
    let nodes = (0..=n_cells).map(|i| i as f64 / n).collect();
    Ok(IntervalMesh { nodes, h: 1.0 / n })
}

impl IntervalMesh {
    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

/// A P1 field given by its nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<'m> {
    mesh: &'m IntervalMesh,
    values: Vec<f64>,
}

impl<'m> ScalarField<'m> {
    pub fn new(mesh: &'m IntervalMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_nodes(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid_arg!("field values must be finite"));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: &'m IntervalMesh) -> Self {
        Self {
            mesh,
            values: vec![0.0; mesh.n_nodes()],
        }
    }

    pub fn mesh(&self) -> &'m IntervalMesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// The two blocks of a state `z = (v, β)`: a kinematic field and an order
/// parameter. On a mesh both blocks hold nodal values; abstract models may
/// use blocks of any size, including an empty kinematic block.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockState {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl BlockState {
    pub fn new(first: Vec<f64>, second: Vec<f64>) -> Self {
        Self { first, second }
    }

    pub fn from_fields(first: &ScalarField<'_>, second: &ScalarField<'_>) -> Result<Self> {
        if first.mesh() != second.mesh() {
            return Err(invalid_arg!("both blocks must live on the same mesh"));
        }
        Ok(Self {
            first: first.values.clone(),
            second: second.values.clone(),
        })
    }
}

/// Which block of a [`BlockState`] a degree of freedom belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Block {
    /// Kinematic field (`v` or `u`), never bound-constrained.
    First,
    /// Order parameter (`β` or `α`).
    Second,
}

/// Prescribed values on some dofs of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletBC {
    block: Block,
    dofs: Vec<usize>,
    values: Vec<f64>,
}

impl DirichletBC {
    pub fn new(block: Block, dofs: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dofs.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: dofs.len(),
                actual: values.len(),
            });
        }
        let mut sorted = dofs.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid_arg!("duplicate Dirichlet dof"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid_arg!("Dirichlet values must be finite"));
        }
        Ok(Self {
            block,
            dofs,
            values,
        })
    }

    pub fn homogeneous(block: Block, dofs: Vec<usize>) -> Result<Self> {
        let values = vec![0.0; dofs.len()];
        Self::new(block, dofs, values)
    }

    pub fn block(&self) -> Block {
        self.block
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(dof, value)` pairs in the order given.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.dofs.iter().copied().zip(self.values.iter().copied())
    }
}

/// The three bilinear forms of the benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Forms {
    /// `K_ij = ∫ φᵢ' φⱼ'`.
    pub stiffness: SymmetricOperator,
    /// `M_ij = ∫ φᵢ φⱼ`.
    pub mass: SymmetricOperator,
    /// `G_ij = ∫ φᵢ' φⱼ` (test derivative on the row index).
    pub mixed: SparseMatrix,
}

/// Assembles stiffness, mass and mixed forms from closed-form element matrices.
pub fn assemble_forms(mesh: &IntervalMesh) -> Forms {
    let n = mesh.n_nodes();
    // 1/h is exactly the cell count on a uniform mesh.
    let inv_h = mesh.n_cells() as f64;
    let h = mesh.h();
    let k_elem = [[inv_h, -inv_h], [-inv_h, inv_h]];
    let m_elem = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
    let g_elem = [[-0.5, -0.5], [0.5, 0.5]];

    let mut stiffness = SymmetricOperator::zeros(n, 1);
    let mut mass = SymmetricOperator::zeros(n, 1);
    let mut mixed = Vec::with_capacity(4 * mesh.n_cells());
    for cell in 0..mesh.n_cells() {
        let dofs = [cell, cell + 1];
        for a in 0..2 {
            for b in 0..=a {
                stiffness.add(dofs[a], dofs[b], k_elem[a][b]);
                mass.add(dofs[a], dofs[b], m_elem[a][b]);
            }
            for b in 0..2 {
                mixed.push((dofs[a], dofs[b], g_elem[a][b]));
            }
        }
    }
    let mixed = SparseMatrix::from_triplets(n, n, &mixed).expect("cell dofs are in range");
    Forms {
        stiffness,
        mass,
        mixed,
    }
}

/// A linear system after symmetric elimination of prescribed dofs.
///
/// Constrained rows and columns are removed; their prescribed values are moved
/// to the right-hand side. [`ReducedSystem::extend`] reinserts them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub op: SymmetricOperator,
    pub rhs: Vec<f64>,
    free: Vec<usize>,
    fixed: Vec<(usize, f64)>,
    dim: usize,
}

impl ReducedSystem {
    /// Indices of the original system kept in the reduced one.
    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn fixed(&self) -> &[(usize, f64)] {
        &self.fixed
    }

    /// Full-length vector from reduced values plus prescribed values.
    pub fn extend(&self, reduced: &[f64]) -> Result<Vec<f64>> {
        if reduced.len() != self.free.len() {
            return Err(Error::DimensionMismatch {
                expected: self.free.len(),
                actual: reduced.len(),
            });
        }
        let mut full = vec![0.0; self.dim];
        for (&i, &v) in self.free.iter().zip(reduced) {
            full[i] = v;
        }
        for &(i, v) in &self.fixed {
            full[i] = v;
        }
        Ok(full)
    }
}

/// Eliminates the dofs fixed by `bc` from `op x = rhs`.
///
/// Dof indices of `bc` are indices of `op`.
pub fn apply_dirichlet(
    op: &SymmetricOperator,
    rhs: &[f64],
    bc: &DirichletBC,
) -> Result<ReducedSystem> {
    eliminate(op, rhs, &bc.pairs().collect::<Vec<_>>())
}

/// Symmetric elimination with constraints given as `(index, value)` pairs.
pub fn eliminate(
    op: &SymmetricOperator,
    rhs: &[f64],
    fixed: &[(usize, f64)],
) -> Result<ReducedSystem> {
    let dim = op.dim();
    if rhs.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: rhs.len(),
        });
    }
    let mut idx: Vec<usize> = fixed.iter().map(|p| p.0).collect();
    idx.sort_unstable();
    check_increasing(&idx, dim)?;
    let free = complement(&idx, dim);

    let mut prescribed = vec![0.0; dim];
    for &(i, v) in fixed {
        prescribed[i] = v;
    }
    let lifted = op.apply(&prescribed);
    let rhs = free.iter().map(|&i| rhs[i] - lifted[i]).collect();
    let mut fixed = fixed.to_vec();
    fixed.sort_by_key(|p| p.0);
    Ok(ReducedSystem {
        op: op.restrict(&free)?,
        rhs,
        free,
        fixed,
        dim,
    })
}
