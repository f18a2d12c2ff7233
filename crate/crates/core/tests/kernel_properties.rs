use std::sync::Arc;

use lqrk_core::linalg::{min_sym_eigenvalue, sup_distance, Mat, Vector};
use lqrk_core::{
    assemble_gram, build_kernel_table, check_reproducing, check_reproducing_part, closed_loop_generator,
    decompose, kernel_apply, kernel_section, project_onto_hk1, propagate, rkhs_inner, solve_riccati,
    ControlPath, KernelPart, KernelTable, ProblemData, RandomProblem, RkhsElement, TimeGrid,
};
use proptest::prelude::*;

fn grid(steps: usize) -> Arc<TimeGrid> {
    Arc::new(TimeGrid::uniform(0.0, 1.0, steps).unwrap())
}

fn table(p: &ProblemData) -> KernelTable {
    let ric = solve_riccati(p).unwrap();
    let fam = propagate(&closed_loop_generator(p, &ric).unwrap()).unwrap();
    build_kernel_table(p, &ric, Arc::new(fam)).unwrap()
}

fn smooth_control(grid: Arc<TimeGrid>, m: usize, phase: f64) -> ControlPath {
    ControlPath::from_fn(grid, |t| {
        Vector::from_fn(m, |i, _| ((i + 1) as f64 * 2.0 * t + phase).sin() + 0.3 * t)
    })
}

#[test]
fn initial_part_is_orthogonal_to_zero_start_elements() {
    let p = RandomProblem::new(4, 2).generate(grid(200), 8).unwrap();
    let kt = table(&p);
    let z = Vector::from_vec(vec![1.0, 0.5, -0.3, 0.8]);
    let zero = Vector::zeros(4);
    for (t, phase) in [(50, 0.0), (120, 1.0), (200, 2.5)] {
        let full = kernel_apply(&kt, t, &z).unwrap();
        let part = project_onto_hk1(&kt, t, &z).unwrap();
        let diff = full.combine(1.0, &part, -1.0).unwrap();
        let w = RkhsElement::from_control(&p, &zero, &smooth_control(p.grid().clone(), 2, phase)).unwrap();
        let scale = diff.norm_squared(&p).unwrap().sqrt() * w.norm_squared(&p).unwrap().sqrt();
        let residual = rkhs_inner(&p, &diff, &w).unwrap().abs() / scale.max(1.0);
        assert!(residual <= 1e-4, "t = {t}: {residual}");
    }
}

#[test]
fn zero_start_reproducing_with_k1() {
    let p = RandomProblem::new(4, 3).generate(grid(200), 12).unwrap();
    let kt = table(&p);
    let e = RkhsElement::from_control(&p, &Vector::zeros(4), &smooth_control(p.grid().clone(), 3, 0.4)).unwrap();
    for t in [1, 70, 133, 200] {
        let z = Vector::from_fn(4, |i, _| (i as f64 - 1.5) * 0.7);
        assert!(check_reproducing_part(&p, &kt, KernelPart::ZeroInitial, &e, t, &z).unwrap() <= 1e-3);
    }
}

#[test]
fn initial_kernel_does_not_reproduce_free_trajectories() {
    // y = 1 is a zero-control element, yet <K0(., 1), y> = 1 / cosh(1)
    let p = ProblemData::scalar(grid(200), 0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
    let kt = table(&p);
    let one = Vector::from_element(1, 1.0);
    let y = RkhsElement::from_control(&p, &one, &ControlPath::zeros(p.grid().clone(), 1)).unwrap();
    let witness = check_reproducing_part(&p, &kt, KernelPart::InitialState, &y, 200, &one).unwrap();
    assert!(witness > 10.0 * 1e-3, "{witness}");
    assert!((witness - (1.0 - 1.0 / 1f64.cosh())).abs() < 1e-3);
    assert!(check_reproducing(&p, &kt, &y, 200, &one).unwrap() < 1e-4);
}

#[test]
fn inner_product_is_symmetric_and_bilinear() {
    let p = RandomProblem::new(3, 2).generate(grid(80), 1).unwrap();
    let y0 = Vector::from_vec(vec![0.2, -1.0, 0.5]);
    let a = RkhsElement::from_control(&p, &y0, &smooth_control(p.grid().clone(), 2, 0.0)).unwrap();
    let b = RkhsElement::from_control(&p, &(-&y0), &smooth_control(p.grid().clone(), 2, 1.3)).unwrap();
    let c = RkhsElement::from_control(&p, &y0, &smooth_control(p.grid().clone(), 2, 2.1)).unwrap();
    let ab = rkhs_inner(&p, &a, &b).unwrap();
    assert!((ab - rkhs_inner(&p, &b, &a).unwrap()).abs() <= 1e-12 * ab.abs().max(1.0));
    let lhs = rkhs_inner(&p, &a.combine(2.0, &c, -0.5).unwrap(), &b).unwrap();
    let rhs = 2.0 * ab - 0.5 * rkhs_inner(&p, &c, &b).unwrap();
    assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
}

#[test]
fn decomposition_reconstructs_sections() {
    let p = RandomProblem::new(3, 1).generate(grid(60), 30).unwrap();
    let kt = table(&p);
    let fa = propagate(&p.a).unwrap();
    let e = kernel_section(&kt, KernelPart::Full, 40, &Vector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
    let (free, rest) = decompose(&p, &fa, &e).unwrap();
    let sum = free.combine(1.0, &rest, 1.0).unwrap();
    assert!(sup_distance(&sum.trajectory.states, &e.trajectory.states) <= 1e-8);
    assert!(free.control.controls.iter().all(|u| u.norm() == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn tables_are_symmetric_and_positive(seed in 0u64..1000, n in 1usize..5, m in 1usize..4,
                                         picks in proptest::collection::vec(0usize..41, 1..10)) {
        let p = RandomProblem::new(n, m).generate(grid(40), seed).unwrap();
        let kt = table(&p);
        for i in (0..41).step_by(5) {
            for j in (0..41).step_by(3) {
                let k = kt.k(i, j);
                prop_assert!((&k - kt.k(j, i).transpose()).norm() <= 1e-8);
                prop_assert!((k - kt.k0(i, j) - kt.k1(i, j)).norm() <= 1e-10);
            }
            prop_assert_eq!(kt.k1(0, i), Mat::zeros(n, n));
        }
        let mut points = picks;
        points.sort_unstable();
        points.dedup();
        let gram = assemble_gram(&kt, &points, KernelPart::Full).unwrap();
        prop_assert!(min_sym_eigenvalue(&gram) >= -1e-8);
    }
}
