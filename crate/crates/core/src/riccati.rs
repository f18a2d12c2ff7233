//! Backward Riccati and Lyapunov solves, the forward-backward two-point
//! boundary-value oracle, and the classical optimal closed loop.

use std::sync::Arc;

use faer::linalg::solvers::Solve;

use crate::error::{Error, Result};
use crate::evolution::closed_loop_generator;
use crate::grid::TimeGrid;
use crate::linalg::{condition_number, is_finite, symmetrize, Mat, Vector};
use crate::problem::{same_grid, ControlPath, ProblemData, Trajectory};

/// Reciprocal condition number below which `J0 + P(t0)` counts as singular.
pub const INVERTIBILITY_RCOND: f64 = 1e-12;

/// Solution of `-dP/dt + P A + A^T P + P B N^{-1} B^T P = M`, `P(T) = 0`.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    grid: Arc<TimeGrid>,
    /// `P(t_i)` for every node.
    pub p: Vec<Mat>,
    /// Condition number of `J0 + P(t0)`.
    pub initial_condition_number: f64,
}

impl RiccatiSolution {
    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn at(&self, i: usize) -> &Mat {
        &self.p[i]
    }

    /// Largest `||P - P^T||_F` over the nodes.
    pub fn max_asymmetry(&self) -> f64 {
        self.p
            .iter()
            .map(crate::linalg::asymmetry)
            .fold(0.0, f64::max)
    }
}

/// Solution of `-dpi/dt + A^T pi + pi A = M`, `pi(T) = 0`.
#[derive(Debug, Clone)]
pub struct PiSolution {
    grid: Arc<TimeGrid>,
    pub pi: Vec<Mat>,
}

impl PiSolution {
    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn at(&self, i: usize) -> &Mat {
        &self.pi[i]
    }
}

/// Forward state `xi` and backward adjoint `eta` on `[t_start, T]`.
#[derive(Debug, Clone)]
pub struct FbSolution {
    grid: Arc<TimeGrid>,
    /// Index of the first node.
    pub start: usize,
    pub xi: Vec<Vector>,
    pub eta: Vec<Vector>,
}

impl FbSolution {
    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    /// `xi(t_i)` for `i >= start`.
    pub fn xi_at(&self, i: usize) -> &Vector {
        &self.xi[i - self.start]
    }

    /// `eta(t_i)` for `i >= start`.
    pub fn eta_at(&self, i: usize) -> &Vector {
        &self.eta[i - self.start]
    }
}

/// Optimal closed-loop trajectory, feedback control and its cost.
#[derive(Debug, Clone)]
pub struct ClassicalLqr {
    pub trajectory: Trajectory,
    pub control: ControlPath,
    /// Trapezoidal quadrature of `int <M y, y> + <N u, u> dt`.
    pub cost: f64,
}

/// RK4 backward from the zero terminal value; `rhs(k, theta, X)` returns
/// `dX/dt` at fraction `theta` of interval `k`. Every step is symmetrized.
fn integrate_backward(
    grid: &TimeGrid,
    dim: usize,
    rhs: impl Fn(usize, f64, &Mat) -> Result<Mat>,
) -> Result<Vec<Mat>> {
    let n = grid.len();
    let mut out = vec![Mat::zeros(dim, dim); n];
    for k in (0..grid.steps()).rev() {
        let h = -grid.step(k);
        let x = &out[k + 1];
        let k1 = rhs(k, 1.0, x)?;
        let k2 = rhs(k, 0.5, &(x + &k1 * (0.5 * h)))?;
        let k3 = rhs(k, 0.5, &(x + &k2 * (0.5 * h)))?;
        let k4 = rhs(k, 0.0, &(x + &k3 * h))?;
        let next = symmetrize(&(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)));
        if !is_finite(&next) {
            return Err(Error::Divergence { t: grid.node(k) });
        }
        out[k] = next;
    }
    Ok(out)
}

/// Integrates the differential Riccati equation backward with RK4 and checks
/// that `J0 + P(t0)` is invertible.
pub fn solve_riccati(p: &ProblemData) -> Result<RiccatiSolution> {
    let grid = p.grid().clone();
    let sol = integrate_backward(&grid, p.state_dim(), |k, theta, x| {
        let a = p.a.eval_in(k, theta);
        let s = p.coupling_in(k, theta)?;
        let m = p.state_weight.eval_in(k, theta);
        Ok(x * &a + a.transpose() * x + x * s * x - m)
    })?;
    let cond = condition_number(&(&p.initial_weight + &sol[0]));
    if !(1.0 / cond >= INVERTIBILITY_RCOND) {
        return Err(Error::NotInvertible { cond });
    }
    Ok(RiccatiSolution {
        grid,
        p: sol,
        initial_condition_number: cond,
    })
}

/// Integrates the linear equation `-dpi/dt + A^T pi + pi A = M` backward
/// from `pi(T) = 0`.
pub fn solve_lyapunov_pi(p: &ProblemData) -> Result<PiSolution> {
    let grid = p.grid().clone();
    let pi = integrate_backward(&grid, p.state_dim(), |k, theta, x| {
        let a = p.a.eval_in(k, theta);
        Ok(x * &a + a.transpose() * x - p.state_weight.eval_in(k, theta))
    })?;
    Ok(PiSolution { grid, pi })
}

/// Solves the coupled two-point problem
///
/// ```text
/// dxi/ds  + A xi + B N^{-1} B^T eta = 0,   xi(t)  = h,
/// -deta/ds + A^T eta - M xi          = 0,   eta(T) = 0,
/// ```
///
/// on `[t_start, T]` with the implicit midpoint rule, as one dense linear
/// system. Starting at `t0` with `h = y0` gives the optimal pair `(y, p)`.
pub fn solve_fbs(p: &ProblemData, start: usize, h: &Vector) -> Result<FbSolution> {
    let grid = p.grid().clone();
    let n = p.state_dim();
    if start >= grid.len() {
        return Err(Error::InvalidArgument(format!("start node {start} is past the grid")));
    }
    if h.len() != n {
        return Err(Error::Dimension(format!("h has length {}, expected {n}", h.len())));
    }
    let nodes = grid.len() - start;
    let size = 2 * n * nodes;
    let mut a = faer::Mat::<f64>::zeros(size, size);
    let mut rhs = faer::Mat::<f64>::zeros(size, 1);
    let xi = |l: usize| 2 * n * l;
    let eta = |l: usize| 2 * n * l + n;

    for r in 0..n {
        a[(r, xi(0) + r)] = 1.0;
        rhs[(r, 0)] = h[r];
    }
    for l in 0..nodes - 1 {
        let k = start + l;
        let dt = grid.step(k);
        let am = p.a.eval_in(k, 0.5) * (0.5 * dt);
        let sm = p.coupling_in(k, 0.5)? * (0.5 * dt);
        let mm = p.state_weight.eval_in(k, 0.5) * (0.5 * dt);
        let row_x = n + 2 * n * l;
        let row_e = row_x + n;
        for r in 0..n {
            for c in 0..n {
                let id = if r == c { 1.0 } else { 0.0 };
                // state rows, scaled by dt
                a[(row_x + r, xi(l) + c)] = -id + am[(r, c)];
                a[(row_x + r, xi(l + 1) + c)] = id + am[(r, c)];
                a[(row_x + r, eta(l) + c)] = sm[(r, c)];
                a[(row_x + r, eta(l + 1) + c)] = sm[(r, c)];
                // adjoint rows, scaled by dt
                a[(row_e + r, eta(l) + c)] = id + am[(c, r)];
                a[(row_e + r, eta(l + 1) + c)] = -id + am[(c, r)];
                a[(row_e + r, xi(l) + c)] = -mm[(r, c)];
                a[(row_e + r, xi(l + 1) + c)] = -mm[(r, c)];
            }
        }
    }
    let last = size - n;
    for r in 0..n {
        a[(last + r, eta(nodes - 1) + r)] = 1.0;
    }

    let lu = a.partial_piv_lu();
    let x = lu.solve(&rhs);
    let residual = (&a * &x - &rhs).norm_l2();
    let scale = 1.0 + rhs.norm_l2() + a.norm_l2() * x.norm_l2();
    if !residual.is_finite() || residual > 1e-8 * scale {
        return Err(Error::Singular(format!(
            "two-point system residual {residual:e}"
        )));
    }
    let take = |off: usize| Vector::from_iterator(n, (0..n).map(|r| x[(off + r, 0)]));
    Ok(FbSolution {
        grid,
        start,
        xi: (0..nodes).map(|l| take(xi(l))).collect(),
        eta: (0..nodes).map(|l| take(eta(l))).collect(),
    })
}

/// `||eta(t) - P(t) h|| / max(1, ||h||)` with `eta` from [`solve_fbs`].
pub fn decoupling_residual(
    p: &ProblemData,
    ric: &RiccatiSolution,
    start: usize,
    h: &Vector,
) -> Result<f64> {
    same_grid(p.grid(), ric.grid())?;
    let fb = solve_fbs(p, start, h)?;
    Ok((fb.eta_at(start) - ric.at(start) * h).norm() / h.norm().max(1.0))
}

/// Optimal state from the closed loop `dy/dt + (A + B N^{-1} B^T P) y = 0`,
/// feedback `u = -N^{-1} B^T P y`, and the quadrature of the running cost.
pub fn optimal_lqr_classical(
    p: &ProblemData,
    ric: &RiccatiSolution,
    y0: &Vector,
) -> Result<ClassicalLqr> {
    same_grid(p.grid(), ric.grid())?;
    let grid = p.grid().clone();
    if y0.len() != p.state_dim() {
        return Err(Error::Dimension(format!(
            "y0 has length {}, expected {}",
            y0.len(),
            p.state_dim()
        )));
    }
    let gen = closed_loop_generator(p, ric)?;
    let mut states = Vec::with_capacity(grid.len());
    states.push(y0.clone());
    for k in 0..grid.steps() {
        let h = grid.step(k);
        let y = states.last().unwrap();
        let f = |theta: f64, v: &Vector| -(gen.eval_in(k, theta) * v);
        let k1 = f(0.0, y);
        let k2 = f(0.5, &(y + &k1 * (0.5 * h)));
        let k3 = f(0.5, &(y + &k2 * (0.5 * h)));
        let k4 = f(1.0, &(y + &k3 * h));
        let next = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { t: grid.node(k + 1) });
        }
        states.push(next);
    }
    let controls = states
        .iter()
        .enumerate()
        .map(|(i, y)| Ok(-(p.gain(i)? * (ric.at(i) * y))))
        .collect::<Result<Vec<_>>>()?;
    let trajectory = Trajectory::new(grid.clone(), states)?;
    let control = ControlPath::new(grid, controls)?;
    let cost = p.running_cost(&trajectory, &control)?;
    Ok(ClassicalLqr {
        trajectory,
        control,
        cost,
    })
}
