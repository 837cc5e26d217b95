mod common;

use std::sync::Arc;

use common::{brute_force_entry, rel};
use kernel_lsq::assembly::{
    assemble_basis, assemble_matrix, assemble_terms, select_resolution, spread_sample, Difference, OperatorImage,
    TrialBasis, Zero,
};
use kernel_lsq::geometry::{regular_disk_nodes, DiskDomain, NodeSet, PointSet};
use kernel_lsq::kernel::KernelSpec;
use kernel_lsq::linalg::{cholesky, cholesky_solve, norm2};
use kernel_lsq::postproc::DiscreteSolution;
use kernel_lsq::problem::{benchmark_operator, radial_power_solution};
use kernel_lsq::quadrature::QuadratureResolution;
use kernel_lsq::study::trial_space_problem;

fn two_nodes() -> NodeSet {
    NodeSet::new(PointSet::from_points(&[[0.1, -0.2], [-0.35, 0.4]]), &DiskDomain::unit()).unwrap()
}

#[test]
fn two_node_entries_match_refined_brute_force() {
    let d = DiskDomain::unit();
    let op = benchmark_operator();
    let spec = KernelSpec::new(5.0, 10.0, 2).unwrap();
    let basis = TrialBasis::new(spec, two_nodes()).unwrap();
    let w = basis.nodes().h_fill.powi(-3);
    let choice =
        select_resolution(&basis, &op, &d, w, QuadratureResolution::for_spacing(0.25, 1.0), 1e-10, 3).unwrap();
    assert!(choice.converged);
    let (qi, qb) = choice.resolution.rules(&d).unwrap();
    let sys = assemble_basis(Arc::new(basis), &op, &qi, &qb, 3.0).unwrap();
    let (qi4, qb4) = choice.resolution.doubled().doubled().rules(&d).unwrap();
    let pts = two_nodes();
    for i in 0..2 {
        for j in 0..2 {
            let oracle = brute_force_entry(&spec, &op, pts.points().point(i), pts.points().point(j), w, &qi4, &qb4);
            let scale = (sys.matrix.get(i, i) * sys.matrix.get(j, j)).sqrt();
            let err = (sys.matrix.get(i, j) - oracle).abs() / scale;
            assert!(err <= 1e-9, "entry ({i},{j}): {err:.3e}");
        }
    }
}

#[test]
fn trial_function_data_reproduce_matrix_column() {
    let d = DiskDomain::unit();
    let spec = KernelSpec::new(4.0, 10.0, 2).unwrap();
    let nodes = regular_disk_nodes(&d, 0.4).unwrap();
    let (qi, qb) = QuadratureResolution::for_spacing(0.4, 1.0).rules(&d).unwrap();
    let center = nodes.points().point(0).to_vec();
    let sys = assemble_matrix(spec, nodes, &benchmark_operator(), &qi, &qb).unwrap();
    let problem = trial_space_problem(spec, center).unwrap();
    let b = sys.assemble_rhs(&problem);
    for (i, bi) in b.iter().enumerate() {
        let a = sys.matrix.get(i, 0);
        assert!((bi - a).abs() <= 1e-9 * sys.matrix.get(0, 0).max(a.abs()), "row {i}: {bi} vs {a}");
    }
}

#[test]
fn rhs_is_linear_in_data() {
    let d = DiskDomain::unit();
    let spec = KernelSpec::new(4.0, 10.0, 2).unwrap();
    let nodes = regular_disk_nodes(&d, 0.5).unwrap();
    let (qi, qb) = QuadratureResolution::for_spacing(0.5, 1.0).rules(&d).unwrap();
    let sys = assemble_matrix(spec, nodes, &benchmark_operator(), &qi, &qb).unwrap();
    let f1 = |x: &[f64]| x[0] * x[1];
    let g1 = |x: &[f64]| x[0].cos();
    let f2 = |x: &[f64]| 1.0 + x[1];
    let g2 = |x: &[f64]| x[1].powi(3);
    let b1 = sys.assemble_rhs_with(f1, g1);
    let b2 = sys.assemble_rhs_with(f2, g2);
    let b12 = sys.assemble_rhs_with(|x| f1(x) + f2(x), |x| g1(x) + g2(x));
    let scale = b12.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for i in 0..b12.len() {
        assert!((b12[i] - b1[i] - b2[i]).abs() <= 1e-13 * scale);
    }
}

#[test]
fn energy_product_reproduces_system() {
    let d = DiskDomain::unit();
    let spec = KernelSpec::new(5.0, 10.0, 2).unwrap();
    let nodes = regular_disk_nodes(&d, 0.5).unwrap();
    let (qi, qb) = QuadratureResolution::for_spacing(0.5, 1.0).rules(&d).unwrap();
    let op = benchmark_operator();
    let sys = assemble_matrix(spec, nodes, &op, &qi, &qb).unwrap();
    let n = sys.len();
    let unit = |j: usize| {
        let mut c = vec![0.0; n];
        c[j] = 1.0;
        DiscreteSolution::from_system(&sys, c).unwrap()
    };
    for (i, j) in [(0, 0), (0, n - 1), (n / 2, 3)] {
        let q = sys.energy_product(&unit(i), &unit(j));
        assert!(rel(q, sys.matrix.get(i, j)) <= 1e-12 || (q - sys.matrix.get(i, j)).abs() <= 1e-13 * sys.matrix.max_abs());
    }
    assert_eq!(sys.energy_product(&Zero, &unit(1)), 0.0);

    let problem = radial_power_solution(4.0, op).unwrap();
    let b = sys.assemble_rhs(&problem);
    for j in [0, n / 3, n - 1] {
        let q = sys.energy_product(&problem, &unit(j));
        assert!((q - b[j]).abs() <= 1e-12 * norm2(&b), "{q} vs {}", b[j]);
    }
}

#[test]
fn galerkin_orthogonality_and_pythagoras() {
    let d = DiskDomain::unit();
    let spec = KernelSpec::new(5.0, 10.0, 2).unwrap();
    let nodes = regular_disk_nodes(&d, 0.25).unwrap();
    let (qi, qb) = QuadratureResolution::for_spacing(0.25, 1.0).rules(&d).unwrap();
    let problem = radial_power_solution(4.0, benchmark_operator()).unwrap();
    let sys = assemble_matrix(spec, nodes, problem.operator(), &qi, &qb).unwrap();
    let b = sys.assemble_rhs(&problem);
    let s = cholesky_solve(&sys.matrix, &b).unwrap();
    assert!(s.relative_residual <= 1e-10);
    let uh = DiscreteSolution::from_system(&sys, s.x).unwrap();
    let e = sys.energy_norm(&Difference(&problem, &uh));
    let u = sys.energy_norm(&problem);
    let v = sys.energy_norm(&uh);
    assert!(((e * e + v * v) - u * u).abs() <= 1e-6 * u * u);
    assert!(v <= u);
}

#[test]
fn boundary_weight_scales_only_boundary_block() {
    let d = DiskDomain::unit();
    let spec = KernelSpec::new(4.0, 10.0, 2).unwrap();
    let (qi, qb) = QuadratureResolution::for_spacing(0.5, 1.0).rules(&d).unwrap();
    let op = benchmark_operator();
    let coarse = regular_disk_nodes(&d, 0.5).unwrap();
    let terms = assemble_terms(spec, coarse.clone(), &op, &qi, &qb).unwrap();
    let a = assemble_matrix(spec, coarse.clone(), &op, &qi, &qb).unwrap();
    let mut moved = coarse;
    moved.h_fill *= 0.5;
    let a2 = assemble_matrix(spec, moved, &op, &qi, &qb).unwrap();
    assert!((a2.boundary_weight / a.boundary_weight - 8.0).abs() < 1e-12);
    let n = a.len();
    for i in 0..n {
        for j in 0..n {
            let want = terms.interior.get(i, j) + a2.boundary_weight * terms.boundary.get(i, j);
            assert!((a2.matrix.get(i, j) - want).abs() <= 1e-12 * a2.matrix.max_abs());
        }
    }
}

#[test]
fn assembled_matrices_are_positive_definite() {
    let d = DiskDomain::unit();
    for tau in [3.0, 4.0, 5.0] {
        let spec = KernelSpec::for_second_order(tau, 10.0, 2).unwrap();
        let nodes = regular_disk_nodes(&d, 0.25).unwrap();
        let (qi, qb) = QuadratureResolution::for_spacing(0.25, 1.0).rules(&d).unwrap();
        let sys = assemble_matrix(spec, nodes, &benchmark_operator(), &qi, &qb).unwrap();
        assert_eq!(sys.matrix.relative_asymmetry(), 0.0);
        cholesky(&sys.matrix).unwrap();
    }
}

#[test]
fn drift_sample_spreads_over_all_nodes() {
    assert_eq!(spread_sample(5, 24), vec![0, 1, 2, 3, 4]);
    let s = spread_sample(1000, 24);
    assert_eq!(s.len(), 24);
    assert_eq!((s[0], s[23]), (0, 999));
}

#[test]
fn kernels_without_second_derivatives_are_rejected() {
    let d = DiskDomain::unit();
    let spec = KernelSpec::new(1.8, 10.0, 2).unwrap();
    let (qi, qb) = QuadratureResolution::for_spacing(0.5, 1.0).rules(&d).unwrap();
    assert!(assemble_matrix(spec, regular_disk_nodes(&d, 0.5).unwrap(), &benchmark_operator(), &qi, &qb).is_err());
}

#[test]
fn batched_images_agree_with_pointwise() {
    let d = DiskDomain::unit();
    let spec = KernelSpec::new(4.0, 10.0, 2).unwrap();
    let nodes = regular_disk_nodes(&d, 0.5).unwrap();
    let (qi, qb) = QuadratureResolution::for_spacing(0.5, 1.0).rules(&d).unwrap();
    let sys = assemble_matrix(spec, nodes, &benchmark_operator(), &qi, &qb).unwrap();
    let c: Vec<f64> = (0..sys.len()).map(|i| (i as f64).sin()).collect();
    let uh = DiscreteSolution::from_system(&sys, c).unwrap();
    let pts = PointSet::from_points(&[[0.0, 0.0], [0.3, -0.6], [0.99, 0.0]]);
    let batch = uh.images(&mut pts.iter());
    for (x, v) in pts.iter().zip(batch) {
        assert!((uh.image(x) - v).abs() <= 1e-12 * (1.0 + v.abs()));
    }
}
