//! Energy models consumed by the solvers.
//!
//! A model maps a global state vector to its energy, gradient and Hessian.
//! The global vector packs the two blocks of a [`BlockState`] according to a
//! [`BlockLayout`]; finite element models interleave the blocks node by node
//! so that assembled operators stay narrow-banded.

use alloc::vec;
use alloc::vec::Vec;

use crate::bifurcation::SymmetricPencil;
use crate::error::invalid_arg;
use crate::fem1d::{assemble_forms, Block, BlockState, DirichletBC, IntervalMesh};
use crate::linalg::{complement, dot, SparseMatrix, SymmetricOperator};
use crate::stability::Cone;
use crate::{Error, Result};

/// How the two blocks of a state are packed into one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    n_first: usize,
    n_second: usize,
    interleaved: bool,
}

impl BlockLayout {
    /// `[first..., second...]`.
    pub fn stacked(n_first: usize, n_second: usize) -> Self {
        Self {
            n_first,
            n_second,
            interleaved: false,
        }
    }

    /// `[first_0, second_0, first_1, second_1, ...]`.
    pub fn interleaved(n_nodes: usize) -> Self {
        Self {
            n_first: n_nodes,
            n_second: n_nodes,
            interleaved: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_first + self.n_second
    }

    pub fn n_first(&self) -> usize {
        self.n_first
    }

    pub fn n_second(&self) -> usize {
        self.n_second
    }

    pub fn index(&self, block: Block, i: usize) -> usize {
        match (block, self.interleaved) {
            (Block::First, true) => 2 * i,
            (Block::Second, true) => 2 * i + 1,
            (Block::First, false) => i,
            (Block::Second, false) => self.n_first + i,
        }
    }

    /// Global indices of one block, increasing.
    pub fn indices(&self, block: Block) -> Vec<usize> {
        let n = match block {
            Block::First => self.n_first,
            Block::Second => self.n_second,
        };
        (0..n).map(|i| self.index(block, i)).collect()
    }

    pub fn locate(&self, global: usize) -> (Block, usize) {
        if self.interleaved {
            if global % 2 == 0 {
                (Block::First, global / 2)
            } else {
                (Block::Second, global / 2)
            }
        } else if global < self.n_first {
            (Block::First, global)
        } else {
            (Block::Second, global - self.n_first)
        }
    }

    pub fn join(&self, z: &BlockState) -> Result<Vec<f64>> {
        if z.first.len() != self.n_first {
            return Err(Error::DimensionMismatch {
                expected: self.n_first,
                actual: z.first.len(),
            });
        }
        if z.second.len() != self.n_second {
            return Err(Error::DimensionMismatch {
                expected: self.n_second,
                actual: z.second.len(),
            });
        }
        let mut out = vec![0.0; self.dim()];
        for (i, &v) in z.first.iter().enumerate() {
            out[self.index(Block::First, i)] = v;
        }
        for (i, &v) in z.second.iter().enumerate() {
            out[self.index(Block::Second, i)] = v;
        }
        Ok(out)
    }

    pub fn split(&self, x: &[f64]) -> BlockState {
        assert_eq!(x.len(), self.dim());
        BlockState {
            first: (0..self.n_first)
                .map(|i| x[self.index(Block::First, i)])
                .collect(),
            second: (0..self.n_second)
                .map(|i| x[self.index(Block::Second, i)])
                .collect(),
        }
    }

    /// Global indices of the dofs fixed by `bcs`.
    pub fn constrained(&self, bcs: &[DirichletBC]) -> Result<Vec<(usize, f64)>> {
        let mut out = Vec::new();
        for bc in bcs {
            let n = match bc.block() {
                Block::First => self.n_first,
                Block::Second => self.n_second,
            };
            for (dof, value) in bc.pairs() {
                if dof >= n {
                    return Err(invalid_arg!(
                        "Dirichlet dof {dof} out of range for a block of {n}"
                    ));
                }
                out.push((self.index(bc.block(), dof), value));
            }
        }
        out.sort_by_key(|p| p.0);
        if out.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(invalid_arg!("a dof is constrained twice"));
        }
        Ok(out)
    }
}

/// Lower and upper bounds on the order-parameter block. The kinematic block is
/// always unbounded.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || *l == f64::INFINITY || *u == f64::NEG_INFINITY || l > u {
                return Err(invalid_arg!("invalid bounds [{l}, {u}] at dof {i}"));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn lower_only(lower: Vec<f64>) -> Result<Self> {
        let upper = vec![f64::INFINITY; lower.len()];
        Self::new(lower, upper)
    }

    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    /// Bounds given as full states; the kinematic block must be `(-∞, +∞)`.
    pub fn from_states(lower: &BlockState, upper: &BlockState) -> Result<Self> {
        if lower.first.len() != upper.first.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.first.len(),
                actual: upper.first.len(),
            });
        }
        let unbounded = lower.first.iter().all(|&l| l == f64::NEG_INFINITY)
            && upper.first.iter().all(|&u| u == f64::INFINITY);
        if !unbounded {
            return Err(invalid_arg!("the kinematic block cannot be bounded"));
        }
        Self::new(lower.second.clone(), upper.second.clone())
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Bounds expanded to full global vectors.
    pub fn global(&self, layout: &BlockLayout) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.len() != layout.n_second() {
            return Err(Error::DimensionMismatch {
                expected: layout.n_second(),
                actual: self.len(),
            });
        }
        let mut lo = vec![f64::NEG_INFINITY; layout.dim()];
        let mut hi = vec![f64::INFINITY; layout.dim()];
        for i in 0..self.len() {
            let g = layout.index(Block::Second, i);
            lo[g] = self.lower[i];
            hi[g] = self.upper[i];
        }
        Ok((lo, hi))
    }
}

/// An energy functional with exact first and second variations.
pub trait EnergyModel {
    fn layout(&self) -> BlockLayout;

    /// Global indices held at their initial values (Dirichlet dofs).
    fn fixed(&self) -> Vec<usize> {
        Vec::new()
    }

    fn energy(&self, z: &[f64]) -> f64;

    fn gradient(&self, z: &[f64]) -> Vec<f64>;

    fn hessian(&self, z: &[f64]) -> SymmetricOperator;
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub energy: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymmetricOperator,
}

pub fn evaluate<M: EnergyModel + ?Sized>(model: &M, z: &BlockState) -> Result<Evaluation> {
    let x = model.layout().join(z)?;
    Ok(Evaluation {
        energy: model.energy(&x),
        gradient: model.gradient(&x),
        hessian: model.hessian(&x),
    })
}

/// Coefficients of the benchmark Rayleigh ratio
/// `R(v, β) = (∫ a β'² + ∫ b (v' − c β)²) / ∫ β²`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RayleighQuotientModel {
    a: f64,
    b: f64,
    c: f64,
}

impl RayleighQuotientModel {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) || c == 0.0 || !c.is_finite()
        {
            return Err(invalid_arg!(
                "need a > 0, b > 0, c != 0 (got a={a}, b={b}, c={c})"
            ));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `v(0) = v(1) = 0`, the only boundary conditions of the benchmark.
    pub fn clamped_ends(mesh: &IntervalMesh) -> DirichletBC {
        DirichletBC::homogeneous(Block::First, vec![0, mesh.n_cells()]).expect("two distinct dofs")
    }

    /// Numerator and denominator operators on all nodal dofs, interleaved.
    pub fn assemble_full(&self, mesh: &IntervalMesh) -> (SymmetricOperator, SymmetricOperator) {
        let forms = assemble_forms(mesh);
        let layout = BlockLayout::interleaved(mesh.n_nodes());
        let n = mesh.n_nodes();
        let (a, b, c) = (self.a, self.b, self.c);
        let v = |i| layout.index(Block::First, i);
        let beta = |i| layout.index(Block::Second, i);

        let mut num = SymmetricOperator::zeros(layout.dim(), 3);
        let mut den = SymmetricOperator::zeros(layout.dim(), 2);
        for i in 0..n {
            for j in i.saturating_sub(1)..=i {
                let k = forms.stiffness.get(i, j);
                let m = forms.mass.get(i, j);
                num.add(v(i), v(j), b * k);
                num.add(beta(i), beta(j), a * k + b * c * c * m);
                den.add(beta(i), beta(j), m);
            }
        }
        for (i, j, g) in forms.mixed.entries() {
            num.add(v(i), beta(j), -b * c * g);
        }
        (num, den)
    }

    /// The energy `z ↦ R(z)` on all nodal dofs, with `v` clamped at both ends.
    pub fn energy_on(&self, mesh: &IntervalMesh) -> RayleighEnergy {
        let (num, den) = self.assemble_full(mesh);
        let layout = BlockLayout::interleaved(mesh.n_nodes());
        let fixed = vec![
            layout.index(Block::First, 0),
            layout.index(Block::First, mesh.n_cells()),
        ];
        RayleighEnergy {
            num,
            den,
            layout,
            fixed,
        }
    }
}

/// The benchmark pencil with Dirichlet dofs eliminated.
#[derive(Debug, Clone)]
pub struct RayleighPencil {
    pub pencil: SymmetricPencil,
    layout: BlockLayout,
    free: Vec<usize>,
}

impl RayleighPencil {
    /// Layout of the unreduced interleaved state.
    pub fn layout(&self) -> BlockLayout {
        self.layout
    }

    /// Global indices kept in the reduced pencil.
    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    /// Reduced indices of the order-parameter dofs.
    pub fn order_parameter_dofs(&self) -> Vec<usize> {
        self.free
            .iter()
            .enumerate()
            .filter(|(_, &g)| self.layout.locate(g).0 == Block::Second)
            .map(|(r, _)| r)
            .collect()
    }

    /// `{β ≥ 0}` in reduced numbering.
    pub fn cone(&self) -> Cone {
        Cone::new(self.dim(), self.order_parameter_dofs(), Vec::new()).expect("dofs are in range")
    }

    /// Extends a reduced vector by zero on the eliminated dofs.
    pub fn extend(&self, reduced: &[f64]) -> Result<BlockState> {
        if reduced.len() != self.free.len() {
            return Err(Error::DimensionMismatch {
                expected: self.free.len(),
                actual: reduced.len(),
            });
        }
        let mut full = vec![0.0; self.layout.dim()];
        for (&g, &v) in self.free.iter().zip(reduced) {
            full[g] = v;
        }
        Ok(self.layout.split(&full))
    }

    /// Restricts a full state to the reduced dofs.
    pub fn restrict(&self, z: &BlockState) -> Result<Vec<f64>> {
        let full = self.layout.join(z)?;
        Ok(self.free.iter().map(|&g| full[g]).collect())
    }
}

/// Assembles the pencil `(A, B)` of the Rayleigh ratio on the dofs left free
/// by `bcs`. The boundary conditions must clamp `v` at both ends and be
/// homogeneous.
pub fn rayleigh_pencil(
    model: &RayleighQuotientModel,
    mesh: &IntervalMesh,
    bcs: &[DirichletBC],
) -> Result<RayleighPencil> {
    let layout = BlockLayout::interleaved(mesh.n_nodes());
    let fixed = layout.constrained(bcs)?;
    if fixed.iter().any(|p| p.1 != 0.0) {
        return Err(invalid_arg!(
            "eigenproblem boundary conditions must be homogeneous"
        ));
    }
    let v_ends = [
        layout.index(Block::First, 0),
        layout.index(Block::First, mesh.n_cells()),
    ];
    if !v_ends.iter().all(|g| fixed.iter().any(|p| p.0 == *g)) {
        return Err(invalid_arg!("v must vanish at both ends of the bar"));
    }
    let (num, den) = model.assemble_full(mesh);
    let fixed_idx: Vec<usize> = fixed.iter().map(|p| p.0).collect();
    let free = complement(&fixed_idx, layout.dim());
    let pencil = SymmetricPencil::new(num.restrict(&free)?, den.restrict(&free)?)?;
    Ok(RayleighPencil {
        pencil,
        layout,
        free,
    })
}

/// `R(z) = zᵀAz / zᵀBz` as an [`EnergyModel`].
#[derive(Debug, Clone)]
pub struct RayleighEnergy {
    num: SymmetricOperator,
    den: SymmetricOperator,
    layout: BlockLayout,
    fixed: Vec<usize>,
}

impl EnergyModel for RayleighEnergy {
    fn layout(&self) -> BlockLayout {
        self.layout
    }

    fn fixed(&self) -> Vec<usize> {
        self.fixed.clone()
    }

    fn energy(&self, z: &[f64]) -> f64 {
        self.num.quad_form(z) / self.den.quad_form(z)
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let az = self.num.apply(z);
        let bz = self.den.apply(z);
        let d = dot(z, &bz);
        let r = dot(z, &az) / d;
        az.iter()
            .zip(&bz)
            .map(|(a, b)| 2.0 * (a - r * b) / d)
            .collect()
    }

    fn hessian(&self, z: &[f64]) -> SymmetricOperator {
        // ∇²R = 2(A − R B)/D − 2(Bz ∇Rᵀ + ∇R zᵀB)/D
        let n = z.len();
        let bz = self.den.apply(z);
        let d = dot(z, &bz);
        let r = self.energy(z);
        let g = self.gradient(z);
        let mut h = SymmetricOperator::zeros(n, n.saturating_sub(1));
        for i in 0..n {
            for j in 0..=i {
                let base = 2.0 * (self.num.get(i, j) - r * self.den.get(i, j)) / d;
                let update = 2.0 * (bz[i] * g[j] + g[i] * bz[j]) / d;
                h.set(i, j, base - update);
            }
        }
        h
    }
}

/// `E(x) = ½ xᵀAx − fᵀx` with `x ≥ lower`.
#[derive(Debug, Clone)]
pub struct ObstacleQuadraticModel {
    a: SymmetricOperator,
    f: Vec<f64>,
    lower: Vec<f64>,
}

impl ObstacleQuadraticModel {
    pub fn new(a: SymmetricOperator, f: Vec<f64>, lower: Vec<f64>) -> Result<Self> {
        if f.len() != a.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                actual: f.len(),
            });
        }
        if lower.len() != a.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                actual: lower.len(),
            });
        }
        a.cholesky()
            .map_err(|_| invalid_arg!("obstacle operator must be positive definite"))?;
        Ok(Self { a, f, lower })
    }

    pub fn operator(&self) -> &SymmetricOperator {
        &self.a
    }

    pub fn load(&self) -> &[f64] {
        &self.f
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::lower_only(self.lower.clone()).expect("lower bounds are finite or -inf")
    }
}

impl EnergyModel for ObstacleQuadraticModel {
    fn layout(&self) -> BlockLayout {
        BlockLayout::stacked(0, self.a.dim())
    }

    fn energy(&self, z: &[f64]) -> f64 {
        0.5 * self.a.quad_form(z) - dot(&self.f, z)
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = self.a.apply(z);
        g.iter_mut().zip(&self.f).for_each(|(gi, fi)| *gi -= fi);
        g
    }

    fn hessian(&self, _z: &[f64]) -> SymmetricOperator {
        self.a.clone()
    }
}

/// Two-block quadratic energy
/// `E(u, α) = ½uᵀA_u u + ½αᵀA_α α + γ uᵀCα − f_uᵀu − f_αᵀα`.
#[derive(Debug, Clone)]
pub struct CoupledQuadraticModel {
    layout: BlockLayout,
    hessian: SymmetricOperator,
    load: Vec<f64>,
    fixed: Vec<usize>,
}

impl CoupledQuadraticModel {
    /// `coupling` is `n_u × n_α`. `fixed_kinematic` lists kinematic dofs held
    /// at their initial values; `A_u` must be definite on the rest.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        layout: BlockLayout,
        a_u: &SymmetricOperator,
        a_alpha: &SymmetricOperator,
        coupling: &SparseMatrix,
        gamma: f64,
        f_u: &[f64],
        f_alpha: &[f64],
        fixed_kinematic: &[usize],
    ) -> Result<Self> {
        let (nu, na) = (layout.n_first(), layout.n_second());
        let dims = [
            (a_u.dim(), nu),
            (a_alpha.dim(), na),
            (coupling.rows(), nu),
            (coupling.cols(), na),
            (f_u.len(), nu),
            (f_alpha.len(), na),
        ];
        for (actual, expected) in dims {
            if actual != expected {
                return Err(Error::DimensionMismatch { expected, actual });
            }
        }
        if !gamma.is_finite() {
            return Err(invalid_arg!("coupling strength must be finite"));
        }
        let mut fixed_sorted = fixed_kinematic.to_vec();
        fixed_sorted.sort_unstable();
        fixed_sorted.dedup();
        if fixed_sorted.iter().any(|&i| i >= nu) {
            return Err(invalid_arg!("fixed kinematic dof out of range"));
        }
        a_u.restrict(&complement(&fixed_sorted, nu))?
            .cholesky()
            .map_err(|_| {
                invalid_arg!("A_u must be positive definite on the free kinematic dofs")
            })?;
        a_alpha
            .cholesky()
            .map_err(|_| invalid_arg!("A_alpha must be positive definite"))?;

        let mut entries = Vec::new();
        for i in 0..nu {
            for j in i.saturating_sub(a_u.bandwidth())..=i {
                let v = a_u.get(i, j);
                if v != 0.0 {
                    entries.push((
                        layout.index(Block::First, i),
                        layout.index(Block::First, j),
                        v,
                    ));
                }
            }
        }
        for i in 0..na {
            for j in i.saturating_sub(a_alpha.bandwidth())..=i {
                let v = a_alpha.get(i, j);
                if v != 0.0 {
                    entries.push((
                        layout.index(Block::Second, i),
                        layout.index(Block::Second, j),
                        v,
                    ));
                }
            }
        }
        for (i, j, v) in coupling.entries() {
            entries.push((
                layout.index(Block::First, i),
                layout.index(Block::Second, j),
                gamma * v,
            ));
        }
        let hessian = SymmetricOperator::from_triplets(layout.dim(), &entries)?;
        let load = layout.join(&BlockState::new(f_u.to_vec(), f_alpha.to_vec()))?;
        let fixed = fixed_sorted
            .iter()
            .map(|&i| layout.index(Block::First, i))
            .collect();
        Ok(Self {
            layout,
            hessian,
            load,
            fixed,
        })
    }

    /// Scalar instance used in small examples: one kinematic and one order
    /// parameter dof.
    pub fn scalar(a_u: f64, a_alpha: f64, gamma_c: f64, f_u: f64, f_alpha: f64) -> Result<Self> {
        let c = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)])?;
        Self::new(
            BlockLayout::stacked(1, 1),
            &SymmetricOperator::from_diagonal(&[a_u]),
            &SymmetricOperator::from_diagonal(&[a_alpha]),
            &c,
            gamma_c,
            &[f_u],
            &[f_alpha],
            &[],
        )
    }
}

impl EnergyModel for CoupledQuadraticModel {
    fn layout(&self) -> BlockLayout {
        self.layout
    }

    fn fixed(&self) -> Vec<usize> {
        self.fixed.clone()
    }

    fn energy(&self, z: &[f64]) -> f64 {
        0.5 * self.hessian.quad_form(z) - dot(&self.load, z)
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = self.hessian.apply(z);
        g.iter_mut().zip(&self.load).for_each(|(gi, fi)| *gi -= fi);
        g
    }

    fn hessian(&self, _z: &[f64]) -> SymmetricOperator {
        self.hessian.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem1d::build_mesh;
    use crate::linalg::pseudo_random;
    use alloc::vec;
    use nalgebra::DMatrix;

    fn fd_check<M: EnergyModel>(model: &M, seed: u64) {
        let n = model.layout().dim();
        let z = pseudo_random(n, seed);
        let d = pseudo_random(n, seed + 100);
        let h = 1e-5;
        let shift = |t: f64| -> Vec<f64> { z.iter().zip(&d).map(|(a, b)| a + t * b).collect() };

        let fd = (model.energy(&shift(h)) - model.energy(&shift(-h))) / (2.0 * h);
        let an = dot(&model.gradient(&z), &d);
        assert!(
            (fd - an).abs() <= 1e-6 * an.abs().max(1.0),
            "gradient fd={fd} analytic={an}"
        );

        let gp = model.gradient(&shift(h));
        let gm = model.gradient(&shift(-h));
        let hd = model.hessian(&z).apply(&d);
        let fd: Vec<f64> = gp
            .iter()
            .zip(&gm)
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect();
        let err: f64 = fd
            .iter()
            .zip(&hd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        let scale: f64 = hd.iter().map(|v| v * v).sum::<f64>();
        assert!(
            libm::sqrt(err) <= 1e-6 * libm::sqrt(scale).max(1.0),
            "hessian mismatch"
        );
    }

    #[test]
    fn obstacle_evaluation_example() {
        let m = ObstacleQuadraticModel::new(
            SymmetricOperator::identity(2),
            vec![1.0, -1.0],
            vec![0.0; 2],
        )
        .unwrap();
        let ev = evaluate(&m, &BlockState::new(vec![], vec![1.0, 0.0])).unwrap();
        assert_eq!(ev.energy, -0.5);
        assert_eq!(ev.gradient, vec![0.0, 1.0]);
        assert!(evaluate(&m, &BlockState::new(vec![], vec![1.0])).is_err());
    }

    #[test]
    fn coupled_scalar_gradient_example() {
        let m = CoupledQuadraticModel::scalar(1.0, 1.0, 0.5, 1.0, 0.0).unwrap();
        let ev = evaluate(&m, &BlockState::new(vec![1.0], vec![0.0])).unwrap();
        assert_eq!(ev.gradient, vec![0.0, 0.5]);
    }

    #[test]
    fn quadratic_hessians_are_constant() {
        let m = CoupledQuadraticModel::scalar(2.0, 3.0, 0.5, 1.0, -1.0).unwrap();
        assert_eq!(m.hessian(&[0.0, 0.0]), m.hessian(&[4.0, -7.0]));
        let o =
            ObstacleQuadraticModel::new(SymmetricOperator::identity(3), vec![0.0; 3], vec![0.0; 3])
                .unwrap();
        assert_eq!(o.hessian(&[1.0, 2.0, 3.0]), o.hessian(&[0.0; 3]));
    }

    #[test]
    fn finite_differences_match_all_models() {
        let mesh = build_mesh(6).unwrap();
        let ray = RayleighQuotientModel::new(1.0, 2.0, 3.0)
            .unwrap()
            .energy_on(&mesh);
        let forms = assemble_forms(&mesh);
        let a = forms.stiffness.combine(1.0, &forms.mass, 1.0).unwrap();
        let obstacle =
            ObstacleQuadraticModel::new(a.clone(), pseudo_random(7, 9), vec![0.0; 7]).unwrap();
        let coupled = CoupledQuadraticModel::new(
            BlockLayout::interleaved(7),
            &a,
            &a.scaled(2.0),
            &forms.mixed,
            0.3,
            &pseudo_random(7, 1),
            &pseudo_random(7, 2),
            &[0],
        )
        .unwrap();
        for seed in 1..6 {
            fd_check(&ray, seed);
            fd_check(&obstacle, seed);
            fd_check(&coupled, seed);
        }
    }

    #[test]
    fn rayleigh_pencil_beta_block() {
        let mesh = build_mesh(2).unwrap();
        let model = RayleighQuotientModel::new(1.0, 1.0, 4.0).unwrap();
        let rp =
            rayleigh_pencil(&model, &mesh, &[RayleighQuotientModel::clamped_ends(&mesh)]).unwrap();
        let forms = assemble_forms(&mesh);
        // reduced order: β0, v1, β1, β2
        assert_eq!(rp.free(), &[1, 2, 3, 5]);
        let a = rp.pencil.a();
        for (r, node) in [(0, 0), (2, 1), (3, 2)] {
            let expect = forms.stiffness.get(node, node) + 16.0 * forms.mass.get(node, node);
            assert!((a.get(r, r) - expect).abs() < 1e-14);
        }
        assert!((a.get(1, 1) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn rayleigh_constant_beta_gives_bc2() {
        let mesh = build_mesh(100).unwrap();
        let model = RayleighQuotientModel::new(1.0, 1.0, 1.0).unwrap();
        let rp =
            rayleigh_pencil(&model, &mesh, &[RayleighQuotientModel::clamped_ends(&mesh)]).unwrap();
        let z = rp
            .restrict(&BlockState::new(vec![0.0; 101], vec![1.0; 101]))
            .unwrap();
        let q = rp.pencil.a().quad_form(&z) / rp.pencil.b().quad_form(&z);
        assert!((q - 1.0).abs() < 1e-12);
        let zero_beta = rp
            .restrict(&BlockState::new(pseudo_random(101, 3), vec![0.0; 101]))
            .unwrap();
        assert_eq!(rp.pencil.b().quad_form(&zero_beta), 0.0);
    }

    #[test]
    fn rayleigh_pencil_requires_clamped_ends() {
        let mesh = build_mesh(4).unwrap();
        let model = RayleighQuotientModel::new(1.0, 1.0, 1.0).unwrap();
        let left = DirichletBC::homogeneous(Block::First, vec![0]).unwrap();
        assert!(rayleigh_pencil(&model, &mesh, &[left]).is_err());
        assert!(RayleighQuotientModel::new(0.0, 1.0, 1.0).is_err());
        assert!(RayleighQuotientModel::new(1.0, -1.0, 1.0).is_err());
        assert!(RayleighQuotientModel::new(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn rayleigh_forms_are_semidefinite_and_schur_is_psd() {
        let mesh = build_mesh(12).unwrap();
        let model = RayleighQuotientModel::new(0.7, 1.3, -2.0).unwrap();
        let rp =
            rayleigh_pencil(&model, &mesh, &[RayleighQuotientModel::clamped_ends(&mesh)]).unwrap();
        let (a, b) = (rp.pencil.a(), rp.pencil.b());
        for seed in 1..30 {
            let z = pseudo_random(rp.dim(), seed);
            assert!(a.quad_form(&z) >= 0.0);
            assert!(b.quad_form(&z) > 0.0);
        }
        let beta = rp.order_parameter_dofs();
        let v = complement(&beta, rp.dim());
        let avv = a.block(&v, &v);
        let avb = a.block(&v, &beta);
        let abb = a.block(&beta, &beta);
        let schur: DMatrix<f64> = &abb - avb.transpose() * avv.cholesky().unwrap().solve(&avb);
        assert!((&schur - schur.transpose()).amax() < 1e-10 * schur.amax());
        let eig = schur.symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l > -1e-10));
    }

    #[test]
    fn bounds_validation() {
        assert!(Bounds::new(vec![1.0], vec![0.0]).is_err());
        assert!(Bounds::new(vec![f64::NAN], vec![0.0]).is_err());
        let lo = BlockState::new(vec![f64::NEG_INFINITY], vec![0.0]);
        let hi = BlockState::new(vec![f64::INFINITY], vec![1.0]);
        assert!(Bounds::from_states(&lo, &hi).is_ok());
        let bad = BlockState::new(vec![0.0], vec![0.0]);
        assert!(Bounds::from_states(&bad, &hi).is_err());
    }
}
