//! Optimal-control problems solved by kernel algebra: terminal-cost (Mayer)
//! problems, the classical regulator recovered through `K1`, and finite-point
//! interpolation.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evolution::EvolutionFamily;
use crate::kernel::{superpose, KernelPart, KernelTable, RkhsElement};
use crate::linalg::{pseudo_inverse, sup_distance, symmetrize, Mat, Vector};
use crate::problem::{same_grid, ProblemData, Trajectory};
use crate::riccati::{optimal_lqr_classical, RiccatiSolution};

/// Differentiable terminal functional `g` on state vectors.
pub trait TerminalCost: Send + Sync {
    fn value(&self, h: &Vector) -> f64;
    fn gradient(&self, h: &Vector) -> Vector;
    /// Second derivative, when available; enables Newton iterations.
    fn hessian(&self, _h: &Vector) -> Option<Mat> {
        None
    }
}

/// `g(h) = 1/2 (h - c)^T Q (h - c)`.
#[derive(Debug, Clone)]
pub struct QuadraticCost {
    pub weight: Mat,
    pub target: Vector,
}

impl QuadraticCost {
    pub fn new(weight: Mat, target: Vector) -> Result<Self> {
        let n = target.len();
        if weight.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "weight is {:?}, target has length {n}",
                weight.shape()
            )));
        }
        Ok(Self {
            weight: symmetrize(&weight),
            target,
        })
    }
}

impl TerminalCost for QuadraticCost {
    fn value(&self, h: &Vector) -> f64 {
        let d = h - &self.target;
        0.5 * d.dot(&(&self.weight * &d))
    }

    fn gradient(&self, h: &Vector) -> Vector {
        &self.weight * (h - &self.target)
    }

    fn hessian(&self, _h: &Vector) -> Option<Mat> {
        Some(self.weight.clone())
    }
}

/// `g(h) = scale * sum_i ln cosh(h_i - c_i)`: smooth, convex, with bounded
/// gradient.
#[derive(Debug, Clone)]
pub struct LogCoshCost {
    pub target: Vector,
    pub scale: f64,
    /// Report the Hessian, so Newton iterations are used.
    pub with_hessian: bool,
}

impl TerminalCost for LogCoshCost {
    fn value(&self, h: &Vector) -> f64 {
        // ln cosh x = |x| + ln(1 + e^{-2|x|}) - ln 2
        self.scale
            * (h - &self.target)
                .iter()
                .map(|x| x.abs() + (-2.0 * x.abs()).exp().ln_1p() - std::f64::consts::LN_2)
                .sum::<f64>()
    }

    fn gradient(&self, h: &Vector) -> Vector {
        (h - &self.target).map(|x| self.scale * x.tanh())
    }

    fn hessian(&self, h: &Vector) -> Option<Mat> {
        self.with_hessian.then(|| {
            Mat::from_diagonal(&(h - &self.target).map(|x| self.scale / x.cosh().powi(2)))
        })
    }
}

/// Running cost plus terminal functional, minimized over initial state and
/// control together.
#[derive(Clone)]
pub struct MayerProblem {
    pub problem: ProblemData,
    pub cost: Arc<dyn TerminalCost>,
}

impl MayerProblem {
    pub fn new(problem: ProblemData, cost: Arc<dyn TerminalCost>) -> Self {
        Self { problem, cost }
    }

    /// Largest relative mismatch between central differences of `g` and the
    /// supplied gradient, over `samples` random points and directions.
    pub fn gradient_check(&self, samples: usize, seed: u64) -> f64 {
        let n = self.problem.state_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let h = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let d = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).normalize();
            let eps = 1e-5;
            let fd = (self.cost.value(&(&h + &d * eps)) - self.cost.value(&(&h - &d * eps))) / (2.0 * eps);
            let exact = self.cost.gradient(&h).dot(&d);
            worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MayerMethod {
    /// Newton when the cost supplies a Hessian, damped Picard otherwise.
    Auto,
    Picard,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MayerOptions {
    pub method: MayerMethod,
    pub damping: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for MayerOptions {
    fn default() -> Self {
        Self {
            method: MayerMethod::Auto,
            damping: 0.5,
            max_iterations: 200,
            tolerance: 1e-10,
        }
    }
}

/// Weighting used by [`eval_objective`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostConvention {
    /// `int <M y, y> + <N u, u> dt`.
    RunningCost,
    /// `g(y(T)) + 1/2 <y(t0), J0 y(t0)> + 1/2 int <M y, y> + <N u, u> dt`.
    HalfWeightedWithTerminal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub value: f64,
    pub convention: CostConvention,
}

#[derive(Debug, Clone)]
pub struct RepresenterSolution {
    /// Node indices of the kernel sections.
    pub points: Vec<usize>,
    pub coeffs: Vec<Vector>,
    pub element: RkhsElement,
    pub objective: f64,
    /// Stationarity defect, constraint violation or gap to the classical
    /// regulator, depending on the solver.
    pub residual: f64,
    pub iterations: usize,
}

/// Cost of an element; see [`CostConvention`] for the two weightings.
pub fn eval_objective(p: &ProblemData, e: &RkhsElement, g: Option<&dyn TerminalCost>) -> Result<Objective> {
    same_grid(p.grid(), e.grid())?;
    let running = p.running_cost(&e.trajectory, &e.control)?;
    Ok(match g {
        None => Objective {
            value: running,
            convention: CostConvention::RunningCost,
        },
        Some(g) => {
            let y = &e.trajectory.states;
            let y0 = &y[0];
            Objective {
                value: g.value(&y[y.len() - 1]) + 0.5 * y0.dot(&(&p.initial_weight * y0)) + 0.5 * running,
                convention: CostConvention::HalfWeightedWithTerminal,
            }
        }
    })
}

/// Minimizes `1/2 ||y||^2 + g(y(T))` over the whole space. The minimizer is
/// `K(., T) z` with `z = -Dg(K(T, T) z)`.
///
/// The reduction to one kernel section assumes the objective grows strictly
/// with the norm for fixed terminal value. This cannot be checked for an
/// arbitrary `g`; for a nonconvex `g` the result is only a stationary point.
pub fn solve_mayer(mp: &MayerProblem, kt: &KernelTable, opts: &MayerOptions) -> Result<RepresenterSolution> {
    let p = &mp.problem;
    same_grid(p.grid(), kt.grid())?;
    let last = p.grid().last();
    let k_tt = kt.k(last, last);
    let n = p.state_dim();
    let g = mp.cost.as_ref();
    let newton = match opts.method {
        MayerMethod::Picard => false,
        MayerMethod::Newton => {
            if g.hessian(&Vector::zeros(n)).is_none() {
                return Err(Error::InvalidArgument("Newton iterations need a Hessian".into()));
            }
            true
        }
        MayerMethod::Auto => g.hessian(&Vector::zeros(n)).is_some(),
    };

    let mut z = Vector::zeros(n);
    let mut iterations = 0;
    let mut step = f64::INFINITY;
    while iterations < opts.max_iterations {
        let h = &k_tt * &z;
        let next = if newton {
            let hess = g.hessian(&h).expect("hessian checked above");
            let jac = Mat::identity(n, n) + hess * &k_tt;
            let f = &z + g.gradient(&h);
            let delta = jac
                .lu()
                .solve(&f)
                .ok_or_else(|| Error::Singular("Newton system of the terminal condition".into()))?;
            &z - delta
        } else {
            &z + (-g.gradient(&h) - &z) * opts.damping
        };
        iterations += 1;
        step = (&next - &z).norm();
        z = next;
        if !step.is_finite() {
            break;
        }
        if step <= opts.tolerance {
            break;
        }
    }
    let residual = (&z + g.gradient(&(&k_tt * &z))).norm();
    if !(step <= opts.tolerance) {
        return Err(Error::NoConvergence { iterations, residual });
    }
    let element = superpose(kt, KernelPart::Full, &[(last, z.clone())])?;
    let residual = (&z + g.gradient(&element.trajectory.states[last])).norm();
    let objective = eval_objective(p, &element, Some(g))?.value;
    Ok(RepresenterSolution {
        points: vec![last],
        coeffs: vec![z],
        element,
        objective,
        residual,
        iterations,
    })
}

fn free_trajectory(p: &ProblemData, open_loop: &EvolutionFamily, y0: &Vector) -> Result<Trajectory> {
    same_grid(p.grid(), open_loop.grid())?;
    if y0.len() != p.state_dim() {
        return Err(Error::Dimension(format!(
            "y0 has length {}, expected {}",
            y0.len(),
            p.state_dim()
        )));
    }
    Trajectory::new(
        p.grid().clone(),
        (0..p.grid().len()).map(|i| open_loop.get(i, 0) * y0).collect(),
    )
}

fn shift(free: &Trajectory, e: RkhsElement) -> Result<RkhsElement> {
    let states = free
        .states
        .iter()
        .zip(&e.trajectory.states)
        .map(|(a, b)| a + b)
        .collect();
    Ok(RkhsElement {
        trajectory: Trajectory::new(free.grid.clone(), states)?,
        control: e.control,
        initial: free.states[0].clone(),
    })
}

/// Regulator with fixed initial state through `K1`:
/// `y = y_free + zeta`, `zeta(s) = -int K1(s, t) M(t) y_free(t) dt`, with
/// `y_free(s) = Phi_A(s, t0) y0`. The residual is the sup-norm gap to
/// [`optimal_lqr_classical`].
pub fn solve_lqr_via_kernel(
    p: &ProblemData,
    ric: &RiccatiSolution,
    kt: &KernelTable,
    open_loop: &EvolutionFamily,
    y0: &Vector,
) -> Result<RepresenterSolution> {
    same_grid(p.grid(), kt.grid())?;
    let free = free_trajectory(p, open_loop, y0)?;
    let weights = p.grid().weights();
    let terms: Vec<(usize, Vector)> = (0..p.grid().len())
        .map(|t| (t, -(p.state_weight.at(t) * free.at(t)) * weights[t]))
        .collect();
    let zeta = superpose(kt, KernelPart::ZeroInitial, &terms)?;
    let element = shift(&free, zeta)?;
    let classical = optimal_lqr_classical(p, ric, y0)?;
    let residual = sup_distance(&element.trajectory.states, &classical.trajectory.states);
    let objective = eval_objective(p, &element, None)?.value;
    let (points, coeffs) = terms.into_iter().unzip();
    Ok(RepresenterSolution {
        points,
        coeffs,
        element,
        objective,
        residual,
        iterations: 0,
    })
}

/// Stacked block Gram matrix `[K_part(t_m, t_n)]`, symmetrized.
pub fn assemble_gram(kt: &KernelTable, points: &[usize], part: KernelPart) -> Result<Mat> {
    let n = kt.dim();
    if let Some(&bad) = points.iter().find(|&&i| i >= kt.grid().len()) {
        return Err(Error::InvalidArgument(format!("node index {bad} is past the grid")));
    }
    let mut g = Mat::zeros(n * points.len(), n * points.len());
    for (a, &i) in points.iter().enumerate() {
        for (b, &j) in points.iter().enumerate().skip(a) {
            let block = kt.block(part, i, j);
            g.view_mut((a * n, b * n), (n, n)).copy_from(&block);
            g.view_mut((b * n, a * n), (n, n)).copy_from(&block.transpose());
        }
    }
    Ok(symmetrize(&g))
}

/// Smallest-norm `zeta` in the zero-initial-state subspace with
/// `y_free(t_n) + zeta(t_n)` hitting the targets: exactly when `ridge = 0`,
/// or penalized by `(1/ridge) sum |y(t_n) - target_n|^2` otherwise.
///
/// Points must be distinct grid node indices.
pub fn solve_interpolation(
    p: &ProblemData,
    kt: &KernelTable,
    open_loop: &EvolutionFamily,
    y0: &Vector,
    points: &[usize],
    targets: &[Vector],
    ridge: f64,
) -> Result<RepresenterSolution> {
    same_grid(p.grid(), kt.grid())?;
    let n = p.state_dim();
    if points.len() != targets.len() || points.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} points and {} targets",
            points.len(),
            targets.len()
        )));
    }
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge must be nonnegative, got {ridge}")));
    }
    let mut sorted = points.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("interpolation points must be distinct".into()));
    }
    if let Some(t) = targets.iter().find(|t| t.len() != n) {
        return Err(Error::Dimension(format!("target has length {}, expected {n}", t.len())));
    }
    let free = free_trajectory(p, open_loop, y0)?;
    let gram = assemble_gram(kt, points, KernelPart::ZeroInitial)?;
    let dim = n * points.len();
    let mut rhs = Vector::zeros(dim);
    for (a, (&i, target)) in points.iter().zip(targets).enumerate() {
        rhs.rows_mut(a * n, n).copy_from(&(target - free.at(i)));
    }

    let z = if ridge > 0.0 {
        let shifted = &gram + Mat::identity(dim, dim) * ridge;
        shifted
            .cholesky()
            .ok_or_else(|| Error::Singular("regularized Gram matrix".into()))?
            .solve(&rhs)
    } else {
        let direct = gram.clone().cholesky().map(|c| c.solve(&rhs));
        let z = match direct {
            Some(z) if (&gram * &z - &rhs).norm() <= 1e-10 * (1.0 + rhs.norm()) => z,
            _ => pseudo_inverse(&gram, 1e-12) * &rhs,
        };
        let violation = (&gram * &z - &rhs).norm();
        if violation > 1e-8 * (1.0 + rhs.norm()) {
            return Err(Error::RankDeficient { violation });
        }
        z
    };

    let coeffs: Vec<Vector> = (0..points.len()).map(|a| z.rows(a * n, n).into_owned()).collect();
    let terms: Vec<(usize, Vector)> = points.iter().copied().zip(coeffs.iter().cloned()).collect();
    let zeta = superpose(kt, KernelPart::ZeroInitial, &terms)?;
    let element = shift(&free, zeta)?;
    let fit = &gram * &z;
    let mut objective = z.dot(&fit);
    if ridge > 0.0 {
        objective += (&fit - &rhs).norm_squared() / ridge;
    }
    let residual = points
        .iter()
        .zip(targets)
        .map(|(&i, t)| (element.trajectory.at(i) - t).norm())
        .fold(0.0, f64::max);
    Ok(RepresenterSolution {
        points: points.to_vec(),
        coeffs,
        element,
        objective,
        residual,
        iterations: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{closed_loop_generator, propagate};
    use crate::grid::TimeGrid;
    use crate::kernel::{build_kernel_table, rkhs_inner};
    use crate::linalg::min_sym_eigenvalue;
    use crate::problem::ControlPath;
    use crate::riccati::solve_riccati;

    fn grid(steps: usize) -> Arc<TimeGrid> {
        Arc::new(TimeGrid::uniform(0.0, 1.0, steps).unwrap())
    }

    fn setup(p: &ProblemData) -> (RiccatiSolution, KernelTable, EvolutionFamily) {
        let ric = solve_riccati(p).unwrap();
        let fam = propagate(&closed_loop_generator(p, &ric).unwrap()).unwrap();
        let kt = build_kernel_table(p, &ric, Arc::new(fam)).unwrap();
        let fa = propagate(&p.a).unwrap();
        (ric, kt, fa)
    }

    fn v(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    fn brownian() -> ProblemData {
        ProblemData::scalar(grid(200), 0.0, 1.0, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn scalar_mayer() {
        let p = brownian();
        let (_, kt, _) = setup(&p);
        let g = QuadraticCost::new(Mat::identity(1, 1), v(3.0)).unwrap();
        let mp = MayerProblem::new(p.clone(), Arc::new(g));
        assert!(mp.gradient_check(10, 1) < 1e-5);
        for method in [MayerMethod::Newton, MayerMethod::Picard] {
            let opts = MayerOptions { method, ..Default::default() };
            let sol = solve_mayer(&mp, &kt, &opts).unwrap();
            assert!((sol.element.trajectory.at(200)[0] - 2.0).abs() < 1e-8);
            assert!((sol.coeffs[0][0] - 1.0).abs() < 1e-8);
            assert!(sol.residual <= 1e-8);
        }
    }

    #[test]
    fn zero_terminal_cost_gives_zero() {
        let p = brownian();
        let (_, kt, _) = setup(&p);
        let g = QuadraticCost::new(Mat::zeros(1, 1), v(3.0)).unwrap();
        let sol = solve_mayer(&MayerProblem::new(p, Arc::new(g)), &kt, &MayerOptions::default()).unwrap();
        assert_eq!(sol.coeffs[0][0], 0.0);
        assert!(sol.element.trajectory.states.iter().all(|y| y[0] == 0.0));
    }

    #[test]
    fn picard_can_fail_to_converge() {
        // fixed-point map slope -K(T,T) Q = -20 is not contractive under damping 0.5
        let p = brownian();
        let (_, kt, _) = setup(&p);
        let g = QuadraticCost::new(Mat::from_element(1, 1, 10.0), v(1.0)).unwrap();
        let opts = MayerOptions {
            method: MayerMethod::Picard,
            ..Default::default()
        };
        let err = solve_mayer(&MayerProblem::new(p, Arc::new(g)), &kt, &opts).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn log_cosh_mayer_is_stationary() {
        let p = crate::random::RandomProblem::new(3, 2).generate(grid(100), 5).unwrap();
        let (_, kt, _) = setup(&p);
        let g = LogCoshCost {
            target: Vector::from_vec(vec![1.0, -2.0, 0.5]),
            scale: 1.0,
            with_hessian: true,
        };
        let mp = MayerProblem::new(p, Arc::new(g));
        assert!(mp.gradient_check(20, 3) < 1e-5);
        let sol = solve_mayer(&mp, &kt, &MayerOptions::default()).unwrap();
        assert!(sol.residual <= 1e-8);
    }

    #[test]
    fn lqr_via_kernel_matches_cosh() {
        let p = ProblemData::scalar(grid(200), 0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let (ric, kt, fa) = setup(&p);
        let sol = solve_lqr_via_kernel(&p, &ric, &kt, &fa, &v(1.0)).unwrap();
        let exact: Vec<Vector> = p.grid().nodes().iter().map(|t| v((1.0 - t).cosh() / 1f64.cosh())).collect();
        assert!(sup_distance(&sol.element.trajectory.states, &exact) < 1e-4);
        assert!(sol.residual < 1e-3);
        let zero = solve_lqr_via_kernel(&p, &ric, &kt, &fa, &v(0.0)).unwrap();
        assert!(zero.element.trajectory.states.iter().all(|y| y[0] == 0.0));
    }

    #[test]
    fn lqr_without_state_cost_is_free_motion() {
        let p = ProblemData::scalar(grid(50), 0.4, 1.0, 0.0, 1.0, 1.0).unwrap();
        let (ric, kt, fa) = setup(&p);
        let sol = solve_lqr_via_kernel(&p, &ric, &kt, &fa, &v(2.0)).unwrap();
        for (i, y) in sol.element.trajectory.states.iter().enumerate() {
            assert_eq!(y, &(fa.get(i, 0) * v(2.0)));
        }
    }

    #[test]
    fn gram_examples() {
        let p = brownian();
        let (_, kt, _) = setup(&p);
        let g = assemble_gram(&kt, &[100, 200], KernelPart::Full).unwrap();
        let expect = Mat::from_row_slice(2, 2, &[1.5, 1.5, 1.5, 2.0]);
        assert!((g - expect).norm() < 1e-12);
        let single = assemble_gram(&kt, &[37], KernelPart::Full).unwrap();
        assert_eq!(single, kt.k(37, 37));
    }

    #[test]
    fn interpolation_examples() {
        let p = ProblemData::scalar(grid(200), 0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let (_, kt, fa) = setup(&p);
        let one = solve_interpolation(&p, &kt, &fa, &v(0.0), &[200], &[v(1.0)], 0.0).unwrap();
        assert!((one.coeffs[0][0] - 1.0).abs() < 1e-12);
        assert!(one.element.control.controls.iter().all(|u| (u[0] - 1.0).abs() < 1e-12));

        let two = solve_interpolation(&p, &kt, &fa, &v(0.0), &[100, 200], &[v(0.5), v(0.0)], 0.0).unwrap();
        assert!((two.coeffs[0][0] - 2.0).abs() < 1e-8);
        assert!((two.coeffs[1][0] + 1.0).abs() < 1e-8);
        for (i, &s) in p.grid().nodes().iter().enumerate() {
            let exact = 2.0 * s.min(0.5) - s;
            assert!((two.element.trajectory.at(i)[0] - exact).abs() < 1e-12);
        }
        assert!(two.residual <= 1e-8);

        let trivial = solve_interpolation(&p, &kt, &fa, &v(1.0), &[50, 150], &[v(1.0), v(1.0)], 0.0).unwrap();
        assert!(trivial.coeffs.iter().all(|z| z[0] == 0.0));
    }

    #[test]
    fn infeasible_hard_constraint_is_rank_deficient() {
        let p = brownian();
        let (_, kt, fa) = setup(&p);
        let err = solve_interpolation(&p, &kt, &fa, &v(0.0), &[0, 100], &[v(1.0), v(0.0)], 0.0).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
        // a ridge turns it into a least-squares fit
        let soft = solve_interpolation(&p, &kt, &fa, &v(0.0), &[0, 100], &[v(1.0), v(0.0)], 0.1).unwrap();
        assert!(soft.residual > 0.5);
    }

    #[test]
    fn interpolant_has_minimal_norm() {
        let p = crate::random::RandomProblem::new(2, 2).generate(grid(100), 9).unwrap();
        let (_, kt, fa) = setup(&p);
        let points = [30, 70, 100];
        let targets = [
            Vector::from_vec(vec![0.5, -0.2]),
            Vector::from_vec(vec![0.1, 0.3]),
            Vector::from_vec(vec![-0.4, 0.0]),
        ];
        let y0 = Vector::zeros(2);
        let sol = solve_interpolation(&p, &kt, &fa, &y0, &points, &targets, 0.0).unwrap();
        let best = rkhs_inner(&p, &sol.element, &sol.element).unwrap();
        assert!((best - sol.objective).abs() <= 1e-4 * best, "{best} {}", sol.objective);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let c: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u = ControlPath::from_fn(p.grid().clone(), |t| {
                Vector::from_vec(vec![c[0] + c[1] * t, c[2] * (5.0 * t).sin() + c[3] * t * t])
            });
            let raw = RkhsElement::from_control(&p, &y0, &u).unwrap();
            let values: Vec<Vector> = points.iter().map(|&i| raw.trajectory.at(i).clone()).collect();
            let fit = solve_interpolation(&p, &kt, &fa, &y0, &points, &values, 0.0).unwrap();
            let null = raw.combine(1.0, &fit.element, -1.0).unwrap();
            let other = sol.element.combine(1.0, &null, 1.0).unwrap();
            let norm = rkhs_inner(&p, &other, &other).unwrap();
            assert!(norm - best >= -1e-8, "{norm} < {best}");
        }
    }

    #[test]
    fn gram_is_psd_on_random_problem() {
        let p = crate::random::RandomProblem::new(3, 2).generate(grid(60), 2).unwrap();
        let (_, kt, _) = setup(&p);
        let g = assemble_gram(&kt, &[0, 7, 15, 30, 44, 60], KernelPart::Full).unwrap();
        assert!(min_sym_eigenvalue(&g) >= -1e-8);
    }

    #[test]
    fn objective_conventions() {
        let p = brownian();
        let zero = RkhsElement::zero(p.grid().clone(), 1, 1);
        assert_eq!(eval_objective(&p, &zero, None).unwrap().value, 0.0);
        let u = ControlPath::from_fn(p.grid().clone(), |_| v(1.0));
        let e = RkhsElement::from_control(&p, &v(0.0), &u).unwrap();
        let obj = eval_objective(&p, &e, None).unwrap();
        assert!((obj.value - 1.0).abs() < 1e-12);
        assert_eq!(obj.convention, CostConvention::RunningCost);
        let g = QuadraticCost::new(Mat::identity(1, 1), v(0.0)).unwrap();
        let obj = eval_objective(&p, &e, Some(&g)).unwrap();
        // g(1) = 1/2 plus half of the unit running cost
        assert!((obj.value - 1.0).abs() < 1e-12);
        assert_eq!(obj.convention, CostConvention::HalfWeightedWithTerminal);
    }

    #[test]
    fn classical_cost_matches_objective() {
        let p = crate::random::RandomProblem::new(3, 2).generate(grid(80), 4).unwrap();
        let ric = solve_riccati(&p).unwrap();
        let lqr = optimal_lqr_classical(&p, &ric, &Vector::from_vec(vec![1.0, 0.0, -1.0])).unwrap();
        let e = RkhsElement {
            initial: lqr.trajectory.states[0].clone(),
            trajectory: lqr.trajectory.clone(),
            control: lqr.control.clone(),
        };
        assert!((eval_objective(&p, &e, None).unwrap().value - lqr.cost).abs() <= 1e-10);
    }
}
