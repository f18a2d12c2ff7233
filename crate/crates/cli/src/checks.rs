//! Invariant suite: numbered checks with a measured value, a tolerance and
//! a pass flag.

use std::sync::Arc;

use lqrk_core::linalg::{min_sym_eigenvalue, sup_distance, symmetrize, Mat, Vector};
use lqrk_core::{
    assemble_gram, build_kernel_table, canonical_control, check_k1_identity, check_reproducing,
    closed_loop_generator, compare_with_analytic, decompose, decoupling_residual, kernel_apply,
    project_onto_hk1, propagate_auto, rkhs_inner, solve_interpolation,
    solve_lqr_via_kernel, solve_mayer, solve_riccati, validate_problem, ControlPath, EvolutionFamily,
    KernelPart, KernelTable, MayerOptions, MayerProblem, ProblemData, QuadraticCost, RiccatiSolution,
    RkhsElement, SpectralHeatModel, Tolerances,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::CheckTolerances;
use crate::error::CliError;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct InvariantBlock {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl InvariantBlock {
    /// Passes when `value <= tolerance`; NaN fails.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

pub fn all_pass(blocks: &[InvariantBlock]) -> bool {
    blocks.iter().all(|b| b.pass)
}

/// Everything needed downstream of the Riccati solve.
pub struct Pipeline {
    pub problem: ProblemData,
    pub riccati: RiccatiSolution,
    pub closed_loop: Arc<EvolutionFamily>,
    pub open_loop: EvolutionFamily,
    pub kernel: KernelTable,
}

impl Pipeline {
    pub fn new(problem: ProblemData) -> Result<Self, CliError> {
        let riccati = solve_riccati(&problem)?;
        let closed_loop = Arc::new(propagate_auto(&closed_loop_generator(&problem, &riccati)?)?);
        let open_loop = propagate_auto(&problem.a)?;
        let kernel = build_kernel_table(&problem, &riccati, closed_loop.clone())?;
        Ok(Self {
            problem,
            riccati,
            closed_loop,
            open_loop,
            kernel,
        })
    }
}

/// Smooth random element: `y0` uniform in `[-1, 1]^n` (or zero) and control
/// components `c0 + c1 cos(pi s) + c2 sin(2 pi s) + c3 s`, `s` the relative time.
pub fn random_element(p: &ProblemData, rng: &mut ChaCha8Rng, zero_start: bool) -> Result<RkhsElement, CliError> {
    let n = p.state_dim();
    let m = p.control_dim();
    let y0 = if zero_start {
        Vector::zeros(n)
    } else {
        Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    };
    let coef: Vec<[f64; 4]> = (0..m)
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .collect();
    let grid = p.grid().clone();
    let (t0, len) = (grid.t0(), grid.t_end() - grid.t0());
    let u = ControlPath::from_fn(grid, |t| {
        let s = (t - t0) / len;
        let pi = std::f64::consts::PI;
        Vector::from_fn(m, |i, _| {
            let c = coef[i];
            c[0] + c[1] * (pi * s).cos() + c[2] * (2.0 * pi * s).sin() + c[3] * s
        })
    });
    Ok(RkhsElement::from_control(p, &y0, &u)?)
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

fn random_nodes(rng: &mut ChaCha8Rng, lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let mut picks: Vec<usize> = Vec::new();
    while picks.len() < count.min(hi - lo + 1) {
        let k = rng.random_range(lo..=hi);
        if !picks.contains(&k) {
            picks.push(k);
        }
    }
    picks.sort_unstable();
    picks
}

/// Largest reproducing defect over `samples` random (element, node, z)
/// triples. Nodes are drawn as fractions of the grid so the same samples can
/// be replayed on a refined grid.
pub fn reproducing_defect(pl: &Pipeline, seed: u64, samples: usize) -> Result<f64, CliError> {
    let p = &pl.problem;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = p.grid().steps();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let e = random_element(p, &mut rng, false)?;
        let frac: f64 = rng.random_range(0.0..=1.0);
        let t = ((frac * 8.0).round() as usize * steps) / 8;
        let z = random_vector(&mut rng, p.state_dim());
        worst = worst.max(check_reproducing(p, &pl.kernel, &e, t, &z)?);
    }
    Ok(worst)
}

/// The invariant suite on one problem. `refined` (same problem on a grid
/// with twice the steps) enables the refinement check.
pub fn check_problem(
    pl: &Pipeline,
    refined: Option<&Pipeline>,
    heat: Option<&SpectralHeatModel>,
    seed: u64,
    tol: &CheckTolerances,
) -> Result<Vec<InvariantBlock>, CliError> {
    let p = &pl.problem;
    let n = p.state_dim();
    let grid = p.grid().clone();
    let last = grid.last();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let report = validate_problem(
        p,
        &Tolerances {
            eigenvalue: tol.eigenvalue,
            symmetry: tol.symmetry,
        },
    )?;
    out.push(InvariantBlock::at_most("problem-validation", report.failures.len() as f64, 0.0));

    let p_scale = pl.riccati.p.iter().map(|m| m.norm()).fold(1.0, f64::max);
    out.push(InvariantBlock::at_most(
        "riccati-symmetry",
        pl.riccati.max_asymmetry(),
        tol.riccati_symmetry * p_scale,
    ));
    let min_eig = pl.riccati.p.iter().map(min_sym_eigenvalue).fold(f64::INFINITY, f64::min);
    out.push(InvariantBlock::at_most("riccati-psd", (-min_eig).max(0.0), tol.eigenvalue * p_scale));

    // dense two-point solve: keep the stacked system small
    if 2 * n * grid.len() <= 4000 {
        let mut worst: f64 = 0.0;
        for start in [0, last / 2] {
            let h = random_vector(&mut rng, n);
            worst = worst.max(decoupling_residual(p, &pl.riccati, start, &h)?);
        }
        out.push(InvariantBlock::at_most("decoupling", worst, tol.decoupling));
    }

    let mut semigroup: f64 = 0.0;
    for _ in 0..10 {
        let nodes = random_nodes(&mut rng, 0, last, 3);
        let (j, i, k) = (nodes[0], nodes[1], nodes[2]);
        let fam = &pl.closed_loop;
        let direct = fam.get(k, j);
        let composed = fam.get(k, i) * fam.get(i, j);
        semigroup = semigroup.max((direct - composed).norm() / direct.norm().max(1.0));
    }
    out.push(InvariantBlock::at_most("semigroup-law", semigroup, tol.semigroup));

    let kt = &pl.kernel;
    let stride = (last / 40).max(1);
    let (mut split, mut adjoint, mut k1_start): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in (0..=last).step_by(stride) {
        for j in (0..=last).step_by(stride) {
            let k = kt.k(i, j);
            split = split.max((&k - kt.k0(i, j) - kt.k1(i, j)).norm());
            adjoint = adjoint.max((&k - kt.k(j, i).transpose()).norm());
        }
        k1_start = k1_start.max(kt.k1(0, i).norm());
    }
    for i in 0..=last {
        let k = kt.k(i, i);
        adjoint = adjoint.max((&k - k.transpose()).norm());
    }
    out.push(InvariantBlock::at_most("kernel-split", split, 1e-10));
    out.push(InvariantBlock::at_most("adjoint-symmetry", adjoint, tol.kernel_symmetry));
    out.push(InvariantBlock::at_most("k1-vanishes-at-start", k1_start, 0.0));

    let mut gram_neg: f64 = 0.0;
    for _ in 0..5 {
        let count = rng.random_range(1..=10);
        let points = random_nodes(&mut rng, 0, last, count);
        let g = assemble_gram(kt, &points, KernelPart::Full)?;
        gram_neg = gram_neg.max(-min_sym_eigenvalue(&g));
    }
    out.push(InvariantBlock::at_most("gram-psd", gram_neg.max(0.0), tol.gram));

    let rep_seed = rng.random();
    let coarse = reproducing_defect(pl, rep_seed, 20)?;
    out.push(InvariantBlock::at_most("reproducing", coarse, tol.reproducing));
    if let Some(fine) = refined {
        let fine = reproducing_defect(fine, rep_seed, 20)?;
        out.push(InvariantBlock::at_most("reproducing-refinement", fine / coarse, 1.0));
    }

    let e = random_element(p, &mut rng, false)?;
    let recovered = canonical_control(p, &e.trajectory, None);
    let canonical = match recovered {
        Ok(u) => sup_distance(&u.controls, &e.control.controls) / e.control.controls.iter().map(|c| c.amax()).fold(1.0, f64::max),
        Err(_) => f64::INFINITY,
    };
    out.push(InvariantBlock::at_most("canonical-control", canonical, 1e-3));

    let y0 = random_vector(&mut rng, n);
    let lqr = solve_lqr_via_kernel(p, &pl.riccati, kt, &pl.open_loop, &y0)?;
    out.push(InvariantBlock::at_most("lqr-equivalence", lqr.residual / y0.norm(), tol.lqr_gap));

    let mut ortho: f64 = 0.0;
    for _ in 0..3 {
        let t = rng.random_range(1..=last);
        let z = random_vector(&mut rng, n);
        let full = kernel_apply(kt, t, &z)?;
        let part = project_onto_hk1(kt, t, &z)?;
        let diff = full.combine(1.0, &part, -1.0)?;
        let w = random_element(p, &mut rng, true)?;
        let scale = (diff.norm_squared(p)? * w.norm_squared(p)?).sqrt();
        ortho = ortho.max(rkhs_inner(p, &diff, &w)?.abs() / scale.max(1.0));
    }
    out.push(InvariantBlock::at_most("hk1-orthogonality", ortho, tol.orthogonality));

    let (free, rest) = decompose(p, &pl.open_loop, &e)?;
    let sum = free.combine(1.0, &rest, 1.0)?;
    out.push(InvariantBlock::at_most(
        "decomposition",
        sup_distance(&sum.trajectory.states, &e.trajectory.states),
        tol.decomposition,
    ));

    let points = random_nodes(&mut rng, last / 4, last, 3);
    let targets: Vec<Vector> = points.iter().map(|_| random_vector(&mut rng, n)).collect();
    let zero = Vector::zeros(n);
    let interp = solve_interpolation(p, kt, &pl.open_loop, &zero, &points, &targets, 0.0)?;
    out.push(InvariantBlock::at_most("interpolation-feasibility", interp.residual, tol.feasibility));
    let best = rkhs_inner(p, &interp.element, &interp.element)?;
    let mut deficit = f64::NEG_INFINITY;
    for _ in 0..10 {
        let raw = random_element(p, &mut rng, true)?;
        let values: Vec<Vector> = points.iter().map(|&i| raw.trajectory.at(i).clone()).collect();
        let fit = solve_interpolation(p, kt, &pl.open_loop, &zero, &points, &values, 0.0)?;
        let other = interp.element.combine(1.0, &raw.combine(1.0, &fit.element, -1.0)?, 1.0)?;
        deficit = deficit.max((best - rkhs_inner(p, &other, &other)?) / best.max(1.0));
    }
    out.push(InvariantBlock::at_most("interpolation-minimality", deficit, tol.minimality));

    let target = random_vector(&mut rng, n);
    let weight = Mat::identity(n, n);
    let cost = QuadraticCost::new(weight.clone(), target.clone())?;
    let mayer = solve_mayer(
        &MayerProblem::new(p.clone(), Arc::new(cost)),
        kt,
        &MayerOptions::default(),
    )?;
    out.push(InvariantBlock::at_most("mayer-stationarity", mayer.residual, tol.stationarity));
    let k_tt = kt.k(last, last);
    let lhs = Mat::identity(n, n) + &k_tt * &weight;
    let oracle = lhs
        .lu()
        .solve(&(&k_tt * &weight * &target))
        .ok_or_else(|| lqrk_core::Error::Singular("terminal linear system".into()))?;
    out.push(InvariantBlock::at_most(
        "mayer-linear-oracle",
        (mayer.element.trajectory.at(last) - oracle).norm(),
        tol.stationarity,
    ));

    if let Some(model) = heat {
        let cmp = compare_with_analytic(model, kt);
        out.push(InvariantBlock::at_most("heat-k1-closed-form", cmp.k1_error, tol.heat_k1));
        out.push(InvariantBlock::at_most("heat-k0-closed-form", cmp.k0_error, tol.heat_k0));
        out.push(InvariantBlock::at_most("heat-mode-coupling", cmp.coupling, 0.0));
        let report = check_k1_identity(model, grid.node(last / 2), grid.t_end())?;
        out.push(InvariantBlock::at_most(
            "heat-change-of-variables",
            report.max_change_of_variables_error,
            tol.heat_identity,
        ));
    }
    Ok(out)
}

/// `K0 + K1` stacked Gram and its raw asymmetry, for diagnostics.
pub fn gram_with_defect(kt: &KernelTable, points: &[usize], part: KernelPart) -> Result<(Mat, f64), CliError> {
    let n = kt.dim();
    let mut raw = Mat::zeros(n * points.len(), n * points.len());
    for (a, &i) in points.iter().enumerate() {
        for (b, &j) in points.iter().enumerate() {
            raw.view_mut((a * n, b * n), (n, n)).copy_from(&kt.block(part, i, j));
        }
    }
    let defect = (&raw - raw.transpose()).norm();
    Ok((symmetrize(&raw), defect))
}
