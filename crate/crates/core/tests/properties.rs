use proptest::prelude::*;

use unilateral_core::bifurcation::{solve_bifurcation, BifurcationParams, SymmetricPencil};
use unilateral_core::fem1d::{build_mesh, BlockState, ScalarField};
use unilateral_core::harness::support_size;
use unilateral_core::hybrid::{solve_equilibrium, HybridParams};
use unilateral_core::linalg::{SparseMatrix, SymmetricOperator};
use unilateral_core::models::{BlockLayout, Bounds, CoupledQuadraticModel, EnergyModel};
use unilateral_core::qp::solve_box_qp;
use unilateral_core::stability::{solve_cone_eigen, Cone, ConeMetric, ConeParams};

/// `GᵀG + shift·I` from a flat list of entries.
fn spd(n: usize, g: &[f64], shift: f64) -> SymmetricOperator {
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            rows[i][j] = (0..n).map(|k| g[k * n + i] * g[k * n + j]).sum::<f64>();
        }
        rows[i][i] += shift;
    }
    SymmetricOperator::from_dense_rows(&rows).unwrap()
}

fn matrix_and_vectors(
    max_n: usize,
) -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(-1.0..1.0f64, n * n),
            prop::collection::vec(-2.0..2.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cone_projection_is_idempotent_and_feasible(y in prop::collection::vec(-5.0..5.0f64, 1..40)) {
        let n = y.len();
        let cone = Cone::new(n, (0..n).step_by(2).collect(), (1..n).step_by(4).collect()).unwrap();
        let z = cone.project(&y);
        prop_assert!(cone.contains(&z));
        prop_assert_eq!(cone.project(&z), z.clone());
        // Unconstrained coordinates are untouched.
        for i in (0..n).filter(|i| i % 2 == 1 && (i - 1) % 4 != 0) {
            prop_assert_eq!(z[i], y[i]);
        }
    }

    #[test]
    fn box_qp_satisfies_kkt((n, g, f, lo) in matrix_and_vectors(12)) {
        let h = spd(n, &g, 0.1);
        let upper: Vec<f64> = lo.iter().map(|l| l + 1.5).collect();
        let x0: Vec<f64> = lo.iter().zip(&upper).map(|(l, u)| 0.5 * (l + u)).collect();
        let sol = solve_box_qp(&h, &f, &lo, &upper, &x0).unwrap();
        let hx = h.apply(&sol.x);
        for i in 0..n {
            let gi = hx[i] - f[i];
            prop_assert!(sol.x[i] >= lo[i] && sol.x[i] <= upper[i]);
            if sol.x[i] > lo[i] && sol.x[i] < upper[i] {
                prop_assert!(gi.abs() < 1e-9);
            } else if sol.x[i] == lo[i] {
                prop_assert!(gi > -1e-9);
            } else {
                prop_assert!(gi < 1e-9);
            }
        }
    }

    #[test]
    fn hybrid_iterates_stay_feasible((n, g, f, lo) in matrix_and_vectors(8), coupling in -0.5..0.5f64) {
        let layout = BlockLayout::stacked(n, n);
        let a = spd(n, &g, 1.0);
        let c = SparseMatrix::from_triplets(n, n, &(0..n).map(|i| (i, i, 1.0)).collect::<Vec<_>>()).unwrap();
        let model = CoupledQuadraticModel::new(layout, &SymmetricOperator::identity(n).scaled(2.0), &a, &c,
            coupling, &f, &f, &[]).unwrap();
        let lower: Vec<f64> = lo.iter().map(|l| l.min(0.0)).collect();
        let bounds = Bounds::lower_only(lower.clone()).unwrap();
        let z0 = BlockState::new(vec![0.0; n], lower.clone());
        let rep = solve_equilibrium(&model, &z0, &bounds, &HybridParams::default()).unwrap();
        prop_assert!(rep.converged);
        for (v, l) in rep.final_state.second.iter().zip(&lower) {
            prop_assert!(*v >= l - 1e-14);
        }
        let e0 = model.energy(&layout.join(&z0).unwrap());
        let e1 = model.energy(&layout.join(&rep.final_state).unwrap());
        prop_assert!(e1 <= e0 + 1e-12);
    }

    #[test]
    fn cone_minimum_bounds_space_minimum((n, g, _, _) in matrix_and_vectors(10), shift in -1.0..1.0f64) {
        let a = spd(n, &g, 0.0).combine(1.0, &SymmetricOperator::identity(n), shift).unwrap();
        let b = SymmetricOperator::identity(n);
        let pencil = SymmetricPencil::new(a, b).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let space = solve_bifurcation(&pencil, &all, 1, &BifurcationParams::default()).unwrap();
        let params = ConeParams { metric: ConeMetric::Energy { shift: 2.0 - shift }, max_iter: 20000, ..ConeParams::default() };
        let res = solve_cone_eigen(&pencil, &Cone::orthant(n), &params).unwrap();
        prop_assert!(Cone::orthant(n).contains(&res.z_star));
        prop_assert!(res.lambda_star >= space.eigenvalues[0] - 1e-8);
    }

    #[test]
    fn support_is_a_fraction_of_the_interval(values in prop::collection::vec(0.0..1.0f64, 2..60), eps in 1e-9..0.5f64) {
        let n = values.len() - 1;
        let mesh = build_mesh(n).unwrap();
        let field = ScalarField::new(&mesh, values.clone()).unwrap();
        match support_size(&field, eps) {
            Ok(d) => prop_assert!((0.0..=1.0 + 1e-12).contains(&d)),
            Err(_) => prop_assert!(values.iter().all(|&v| v == 0.0)),
        }
    }
}
