use std::f64::consts::PI;

use unilateral_core::fem1d::{build_mesh, ScalarField};
use unilateral_core::harness::{
    closed_form_reference, localized_profile, support_size, sweep_point, Branch, SweepConfig,
};
use unilateral_core::models::{rayleigh_pencil, RayleighQuotientModel};
use unilateral_core::stability::{solve_cone_eigen, ConeParams};

fn cone_solve(a: f64, b: f64, c: f64, n: usize) -> (f64, Vec<f64>, usize) {
    let mesh = build_mesh(n).unwrap();
    let model = RayleighQuotientModel::new(a, b, c).unwrap();
    let rp = rayleigh_pencil(&model, &mesh, &[RayleighQuotientModel::clamped_ends(&mesh)]).unwrap();
    let res = solve_cone_eigen(&rp.pencil, &rp.cone(), &ConeParams::default()).unwrap();
    assert!(res.converged, "{:?}", res.termination);
    (
        res.lambda_star,
        rp.extend(&res.z_star).unwrap().second,
        res.iterations,
    )
}

#[test]
fn localized_cone_minimum() {
    let (lambda, beta, _) = cone_solve(1.0, 1.0, 4.0, 1000);
    let r = closed_form_reference(1.0, 1.0, 4.0).unwrap();
    assert!((lambda - r.r_cone).abs() / r.r_cone < 2e-2);

    // The profile touches one end; compare shapes after normalizing the peak.
    let mesh = build_mesh(1000).unwrap();
    let flip = beta[0] < beta[1000];
    let peak = beta.iter().cloned().fold(0.0, f64::max);
    let err = mesh
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let xi = if flip { 1.0 - x } else { x };
            (beta[i] / peak - localized_profile(r.d_star, xi) / 2.0).abs()
        })
        .fold(0.0, f64::max);
    assert!(err < 1e-4, "profile error {err}");

    // A relative threshold ε shortens the measured support by about 2√ε/π·D.
    let field = ScalarField::new(&mesh, beta).unwrap();
    for eps in [1e-3, 1e-6] {
        let d = support_size(&field, eps).unwrap();
        let bias = 2.0 * eps.sqrt() / PI * r.d_star;
        assert!((r.d_star - d - bias).abs() < 2e-3, "eps={eps} D={d}");
    }
}

#[test]
fn constant_cone_minimum() {
    let (lambda, beta, _) = cone_solve(1.0, 1.0, 2.0, 1000);
    assert!((lambda - 4.0).abs() / 4.0 < 1e-2);
    assert!(beta.iter().all(|&v| v > 0.0));
}

#[test]
fn single_point_sweep() {
    let cfg = SweepConfig::default();
    let r = sweep_point(PI * PI, 16.0, &cfg).unwrap();
    let h = 1.0 / cfg.n_cells as f64;
    assert!(r.converged_space && r.converged_cone);
    assert!((r.r_space_num - PI * PI).abs() / (PI * PI) <= 1e-2);
    assert!((r.r_cone_num - 13.62).abs() / 13.62 <= 2e-2);
    assert!((r.d_num - 0.8513).abs() <= 2.0 * h, "D = {}", r.d_num);
    assert!(r.stable);
}

#[test]
fn space_minimum_converges_quadratically() {
    let cfg = |n| SweepConfig {
        n_cells: n,
        ..SweepConfig::default()
    };
    for (pi2a, bc2) in [(4.0, 16.0), (9.0, 12.0)] {
        let errs: Vec<f64> = [100, 200, 400, 800]
            .iter()
            .map(|&n| {
                let r = sweep_point(pi2a, bc2, &cfg(n)).unwrap();
                (r.r_space_num - r.r_space_ref).abs() / r.r_space_ref
            })
            .collect();
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > 1.8 && rate < 2.2, "errors {errs:?}");
        }
    }
    // Constants are in the discrete space, so that branch is exact.
    for n in [100, 200, 400, 800] {
        let r = sweep_point(16.0, 4.0, &cfg(n)).unwrap();
        assert!((r.r_space_num - 4.0).abs() < 1e-8);
    }
}

#[test]
fn numerical_branch_matches_closed_form() {
    let cfg = SweepConfig {
        n_cells: 400,
        ..SweepConfig::default()
    };
    let h = 1.0 / cfg.n_cells as f64;
    for (pi2a, bc2) in [
        (2.0, 8.0),
        (8.0, 2.0),
        (9.0, 10.0),
        (10.0, 9.0),
        (0.5, 16.0),
        (16.0, 0.5),
    ] {
        let r = sweep_point(pi2a, bc2, &cfg).unwrap();
        let localized = r.d_num < 1.0 - 2.0 * h;
        assert_eq!(
            localized,
            r.branch_ref == Branch::Localized,
            "({pi2a}, {bc2}): D = {}",
            r.d_num
        );
    }
}
