//! The linear-quadratic problem container, its validation, and sampled
//! trajectories and controls.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{asymmetry, min_sym_eigenvalue, spd_solve, Mat, Vector};
use crate::path::OperatorPath;

/// Numerical tolerances of the symmetry and definiteness checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute slack on eigenvalue bounds.
    pub eigenvalue: f64,
    /// Absolute bound on `||X - X^T||_F`.
    pub symmetry: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eigenvalue: 1e-10,
            symmetry: 1e-10,
        }
    }
}

/// Dynamics `dy/dt + A(t) y = B(t) u` with running cost
/// `<M y, y> + <N u, u>` and initial weight `J0`.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub a: OperatorPath,
    pub b: OperatorPath,
    pub state_weight: OperatorPath,
    pub control_weight: OperatorPath,
    pub initial_weight: Mat,
    /// Lower bound on the spectrum of the control weight.
    pub nu: f64,
    grid: Arc<TimeGrid>,
}

impl ProblemData {
    /// Assembles a problem, checking shapes and that every path lives on the
    /// same grid. Definiteness is checked by [`validate_problem`].
    pub fn new(
        a: OperatorPath,
        b: OperatorPath,
        state_weight: OperatorPath,
        control_weight: OperatorPath,
        initial_weight: Mat,
        nu: f64,
    ) -> Result<Self> {
        let grid = a.grid().clone();
        for p in [&b, &state_weight, &control_weight] {
            if !Arc::ptr_eq(p.grid(), &grid) && **p.grid() != *grid {
                return Err(Error::GridMismatch);
            }
        }
        let n = a.rows();
        let m = b.cols();
        let shape_err = |what: &str, got: (usize, usize), want: (usize, usize)| {
            Error::Dimension(format!("{what} has shape {got:?}, expected {want:?}"))
        };
        if a.cols() != n {
            return Err(shape_err("A", (a.rows(), a.cols()), (n, n)));
        }
        if b.rows() != n {
            return Err(shape_err("B", (b.rows(), b.cols()), (n, m)));
        }
        if (state_weight.rows(), state_weight.cols()) != (n, n) {
            return Err(shape_err(
                "M",
                (state_weight.rows(), state_weight.cols()),
                (n, n),
            ));
        }
        if (control_weight.rows(), control_weight.cols()) != (m, m) {
            return Err(shape_err(
                "N",
                (control_weight.rows(), control_weight.cols()),
                (m, m),
            ));
        }
        if initial_weight.shape() != (n, n) {
            return Err(shape_err("J0", initial_weight.shape(), (n, n)));
        }
        if !(nu > 0.0) {
            return Err(Error::InvalidArgument(format!("nu must be positive, got {nu}")));
        }
        Ok(Self {
            a,
            b,
            state_weight,
            control_weight,
            initial_weight,
            nu,
            grid,
        })
    }

    /// Time-invariant scalar problem `dy/dt + a y = b u`, cost
    /// `m y^2 + n u^2`, initial weight `j0`, with `nu = n`.
    pub fn scalar(grid: Arc<TimeGrid>, a: f64, b: f64, m: f64, n: f64, j0: f64) -> Result<Self> {
        let c = |x: f64| OperatorPath::constant(grid.clone(), Mat::from_element(1, 1, x));
        Self::new(c(a), c(b), c(m), c(n), Mat::from_element(1, 1, j0), n.max(f64::MIN_POSITIVE))
    }

    /// Time-invariant problem from constant matrices.
    pub fn constant(
        grid: Arc<TimeGrid>,
        a: Mat,
        b: Mat,
        m: Mat,
        n: Mat,
        j0: Mat,
        nu: f64,
    ) -> Result<Self> {
        let c = |x: Mat| OperatorPath::constant(grid.clone(), x);
        Self::new(c(a), c(b), c(m), c(n), j0, nu)
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    /// State dimension `n`.
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    /// Control dimension `m`.
    pub fn control_dim(&self) -> usize {
        self.b.cols()
    }

    /// `N^{-1} B^T` at node `i`.
    pub fn gain(&self, i: usize) -> Result<Mat> {
        spd_solve(self.control_weight.at(i), &self.b.at(i).transpose())
            .map_err(|_| Error::InvalidProblem(format!("N is not positive definite at node {i}")))
    }

    /// `B N^{-1} B^T` at node `i`.
    pub fn coupling(&self, i: usize) -> Result<Mat> {
        Ok(self.b.at(i) * self.gain(i)?)
    }

    /// `B N^{-1} B^T` at fraction `theta` of interval `k`, from the
    /// interpolated `B` and `N`.
    pub fn coupling_in(&self, k: usize, theta: f64) -> Result<Mat> {
        let b = self.b.eval_in(k, theta);
        let n = self.control_weight.eval_in(k, theta);
        let g = spd_solve(&n, &b.transpose()).map_err(|_| {
            Error::InvalidProblem(format!("N is not positive definite in interval {k}"))
        })?;
        Ok(&b * g)
    }

    /// `N^{-1} B^T` at every node.
    pub fn gains(&self) -> Result<Vec<Mat>> {
        (0..self.grid.len()).map(|i| self.gain(i)).collect()
    }

    /// Integrates `dy/dt + A y = B u` from `y(t0) = y0` with RK4, with `A`,
    /// `B` and `u` linearly interpolated inside each interval.
    pub fn simulate(&self, y0: &Vector, u: &ControlPath) -> Result<Trajectory> {
        same_grid(&self.grid, &u.grid)?;
        if y0.len() != self.state_dim() {
            return Err(Error::Dimension(format!(
                "initial state has length {}, expected {}",
                y0.len(),
                self.state_dim()
            )));
        }
        if u.controls.iter().any(|c| c.len() != self.control_dim()) {
            return Err(Error::Dimension("control has the wrong length".into()));
        }
        let f = |k: usize, theta: f64, y: &Vector| -> Vector {
            self.b.eval_in(k, theta) * u.eval_in(k, theta) - self.a.eval_in(k, theta) * y
        };
        let mut states = Vec::with_capacity(self.grid.len());
        states.push(y0.clone());
        for k in 0..self.grid.steps() {
            let h = self.grid.step(k);
            let y = states.last().unwrap();
            let k1 = f(k, 0.0, y);
            let k2 = f(k, 0.5, &(y + &k1 * (0.5 * h)));
            let k3 = f(k, 0.5, &(y + &k2 * (0.5 * h)));
            let k4 = f(k, 1.0, &(y + &k3 * h));
            let next = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if next.iter().any(|x| !x.is_finite()) {
                return Err(Error::Divergence {
                    t: self.grid.node(k + 1),
                });
            }
            states.push(next);
        }
        Trajectory::new(self.grid.clone(), states)
    }

    /// Trapezoidal quadrature of `<M y, y> + <N u, u>`.
    pub fn running_cost(&self, y: &Trajectory, u: &ControlPath) -> Result<f64> {
        same_grid(&self.grid, &y.grid)?;
        same_grid(&self.grid, &u.grid)?;
        let vals: Vec<f64> = (0..self.grid.len())
            .map(|i| y.states[i].dot(&(self.state_weight.at(i) * &y.states[i])))
            .collect();
        let control = u.integrate_with(u, |i, a, b| a.dot(&(self.control_weight.at(i) * b)))?;
        Ok(self.grid.integrate(&vals) + control)
    }

    /// Same problem with the state weight replaced.
    pub fn with_state_weight(&self, state_weight: OperatorPath) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.b.clone(),
            state_weight,
            self.control_weight.clone(),
            self.initial_weight.clone(),
            self.nu,
        )
    }

    /// Same problem with the initial weight replaced.
    pub fn with_initial_weight(&self, initial_weight: Mat) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.b.clone(),
            self.state_weight.clone(),
            self.control_weight.clone(),
            initial_weight,
            self.nu,
        )
    }
}

/// Per-node eigenvalue checks of the cost weights.
#[derive(Debug, Clone)]
pub struct NodeCheck {
    pub t: f64,
    pub state_weight_min_eig: f64,
    pub state_weight_asymmetry: f64,
    pub control_weight_min_eig: f64,
    pub control_weight_asymmetry: f64,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub nodes: Vec<NodeCheck>,
    pub initial_weight_min_eig: f64,
    pub initial_weight_asymmetry: f64,
    /// Smallest eigenvalue of `(A + A^T)/2` over all nodes. Informational
    /// only: every bounded matrix path is coercive up to a shift.
    pub coercivity_min: f64,
    pub failures: Vec<String>,
}

impl ValidationReport {
    /// Runs every check without failing.
    pub fn collect(p: &ProblemData, tol: &Tolerances) -> Self {
        let grid = p.grid();
        let mut failures = Vec::new();
        let mut coercivity_min = f64::INFINITY;
        let nodes = (0..grid.len())
            .map(|i| {
                let m = p.state_weight.at(i);
                let n = p.control_weight.at(i);
                let chk = NodeCheck {
                    t: grid.node(i),
                    state_weight_min_eig: min_sym_eigenvalue(m),
                    state_weight_asymmetry: asymmetry(m),
                    control_weight_min_eig: min_sym_eigenvalue(n),
                    control_weight_asymmetry: asymmetry(n),
                };
                coercivity_min = coercivity_min.min(min_sym_eigenvalue(p.a.at(i)));
                if chk.state_weight_asymmetry > tol.symmetry {
                    failures.push(format!("M is not symmetric at t = {}", chk.t));
                }
                if chk.state_weight_min_eig < -tol.eigenvalue {
                    failures.push(format!(
                        "M is indefinite at t = {} (min eigenvalue {:e})",
                        chk.t, chk.state_weight_min_eig
                    ));
                }
                if chk.control_weight_asymmetry > tol.symmetry {
                    failures.push(format!("N is not symmetric at t = {}", chk.t));
                }
                if chk.control_weight_min_eig < p.nu - tol.eigenvalue {
                    failures.push(format!(
                        "N falls below nu = {} at t = {} (min eigenvalue {:e})",
                        p.nu, chk.t, chk.control_weight_min_eig
                    ));
                }
                chk
            })
            .collect();
        let j0 = &p.initial_weight;
        let initial_weight_min_eig = min_sym_eigenvalue(j0);
        let initial_weight_asymmetry = asymmetry(j0);
        if initial_weight_asymmetry > tol.symmetry {
            failures.push("J0 is not symmetric".into());
        }
        if initial_weight_min_eig < -tol.eigenvalue {
            failures.push(format!(
                "J0 is indefinite (min eigenvalue {initial_weight_min_eig:e})"
            ));
        }
        Self {
            nodes,
            initial_weight_min_eig,
            initial_weight_asymmetry,
            coercivity_min,
            failures,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks the standing assumptions on the cost weights; any failure is a
/// hard error.
pub fn validate_problem(p: &ProblemData, tol: &Tolerances) -> Result<ValidationReport> {
    let report = ValidationReport::collect(p, tol);
    if report.passed() {
        Ok(report)
    } else {
        Err(Error::InvalidProblem(report.failures.join("; ")))
    }
}

/// A state trajectory sampled at the grid nodes.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Arc<TimeGrid>,
    pub states: Vec<Vector>,
}

impl Trajectory {
    pub fn new(grid: Arc<TimeGrid>, states: Vec<Vector>) -> Result<Self> {
        if states.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} states for {} nodes",
                states.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, states })
    }

    pub fn zeros(grid: Arc<TimeGrid>, dim: usize) -> Self {
        let states = vec![Vector::zeros(dim); grid.len()];
        Self { grid, states }
    }

    pub fn from_fn(grid: Arc<TimeGrid>, f: impl Fn(f64) -> Vector) -> Self {
        let states = grid.nodes().iter().map(|&t| f(t)).collect();
        Self { grid, states }
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn at(&self, i: usize) -> &Vector {
        &self.states[i]
    }

    pub fn sup_norm(&self) -> f64 {
        crate::linalg::sup_norm(&self.states)
    }
}

/// A control sampled at the grid nodes.
///
/// Controls may jump at interior nodes. There `jumps` holds the left and
/// right limits and `controls` the blend weighted by the adjacent step
/// lengths, which is what the trapezoidal rule sees for linear functionals.
#[derive(Debug, Clone)]
pub struct ControlPath {
    pub grid: Arc<TimeGrid>,
    pub controls: Vec<Vector>,
    pub jumps: BTreeMap<usize, (Vector, Vector)>,
}

impl ControlPath {
    pub fn new(grid: Arc<TimeGrid>, controls: Vec<Vector>) -> Result<Self> {
        if controls.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} controls for {} nodes",
                controls.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            controls,
            jumps: BTreeMap::new(),
        })
    }

    pub fn zeros(grid: Arc<TimeGrid>, dim: usize) -> Self {
        let controls = vec![Vector::zeros(dim); grid.len()];
        Self {
            grid,
            controls,
            jumps: BTreeMap::new(),
        }
    }

    pub fn from_fn(grid: Arc<TimeGrid>, f: impl Fn(f64) -> Vector) -> Self {
        let controls = grid.nodes().iter().map(|&t| f(t)).collect();
        Self {
            grid,
            controls,
            jumps: BTreeMap::new(),
        }
    }

    pub fn at(&self, i: usize) -> &Vector {
        &self.controls[i]
    }

    pub fn left(&self, i: usize) -> &Vector {
        self.jumps.get(&i).map_or(&self.controls[i], |(l, _)| l)
    }

    pub fn right(&self, i: usize) -> &Vector {
        self.jumps.get(&i).map_or(&self.controls[i], |(_, r)| r)
    }

    /// Fraction of the trapezoidal weight of node `i` carried by the left
    /// limit.
    pub fn left_share(grid: &TimeGrid, i: usize) -> f64 {
        let left = if i > 0 { grid.step(i - 1) } else { 0.0 };
        let right = if i < grid.last() { grid.step(i) } else { 0.0 };
        left / (left + right)
    }

    /// Records a jump at interior node `i` and updates the nodal blend.
    pub fn set_jump(&mut self, i: usize, left: Vector, right: Vector) -> Result<()> {
        if i == 0 || i >= self.grid.last() {
            return Err(Error::InvalidArgument(format!("jumps are only allowed at interior nodes, got {i}")));
        }
        let w = Self::left_share(&self.grid, i);
        self.controls[i] = &left * w + &right * (1.0 - w);
        self.jumps.insert(i, (left, right));
        Ok(())
    }

    /// Applies a node-dependent linear map to every value and limit.
    pub fn map(&self, f: impl Fn(usize, &Vector) -> Vector) -> Self {
        Self {
            grid: self.grid.clone(),
            controls: self.controls.iter().enumerate().map(|(i, v)| f(i, v)).collect(),
            jumps: self
                .jumps
                .iter()
                .map(|(&i, (l, r))| (i, (f(i, l), f(i, r))))
                .collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        let controls = self
            .controls
            .iter()
            .zip(&other.controls)
            .map(|(u, v)| u * a + v * b)
            .collect();
        let nodes: BTreeSet<usize> = self.jumps.keys().chain(other.jumps.keys()).copied().collect();
        let jumps = nodes
            .into_iter()
            .map(|i| {
                (
                    i,
                    (
                        self.left(i) * a + other.left(i) * b,
                        self.right(i) * a + other.right(i) * b,
                    ),
                )
            })
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            controls,
            jumps,
        })
    }

    /// Trapezoidal quadrature of `f(i, u(t), v(t))` that integrates each side
    /// of a jump with the step length on that side.
    pub fn integrate_with(&self, other: &Self, f: impl Fn(usize, &Vector, &Vector) -> f64) -> Result<f64> {
        same_grid(&self.grid, &other.grid)?;
        let g = &self.grid;
        let mut acc = 0.0;
        for k in 0..g.steps() {
            let h = g.step(k);
            acc += 0.5 * h * (f(k, self.right(k), other.right(k)) + f(k + 1, self.left(k + 1), other.left(k + 1)));
        }
        Ok(acc)
    }

    /// Linear interpolation at fraction `theta` of interval `k`, from the
    /// right limit at its start to the left limit at its end.
    pub fn eval_in(&self, k: usize, theta: f64) -> Vector {
        self.right(k) * (1.0 - theta) + self.left(k + 1) * theta
    }
}

pub(crate) fn same_grid(a: &Arc<TimeGrid>, b: &Arc<TimeGrid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<TimeGrid> {
        Arc::new(TimeGrid::uniform(0.0, 1.0, 10).unwrap())
    }

    #[test]
    fn scalar_constants_pass() {
        let mut p = ProblemData::scalar(grid(), 0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        p.nu = 0.5;
        let r = validate_problem(&p, &Tolerances::default()).unwrap();
        assert!(r.passed());
        assert_eq!(r.nodes.len(), 11);
        assert_eq!(r.coercivity_min, 0.0);
    }

    #[test]
    fn zero_control_weight_fails() {
        let g = grid();
        let c = |x: f64| OperatorPath::constant(g.clone(), Mat::from_element(1, 1, x));
        let p = ProblemData::new(c(0.0), c(1.0), c(1.0), c(0.0), Mat::identity(1, 1), 0.5).unwrap();
        let err = validate_problem(&p, &Tolerances::default()).unwrap_err();
        assert!(err.to_string().contains("nu"));
    }

    #[test]
    fn negative_state_weight_fails() {
        let g = grid();
        let p = ProblemData::constant(
            g,
            Mat::zeros(2, 2),
            Mat::identity(2, 2),
            -Mat::identity(2, 2),
            Mat::identity(2, 2),
            Mat::identity(2, 2),
            1.0,
        )
        .unwrap();
        assert!(validate_problem(&p, &Tolerances::default()).is_err());
        let r = ValidationReport::collect(&p, &Tolerances::default());
        assert!(r.failures.iter().all(|f| f.contains("M is indefinite")));
    }

    #[test]
    fn asymmetric_initial_weight_fails() {
        let p = ProblemData::constant(
            grid(),
            Mat::zeros(2, 2),
            Mat::identity(2, 2),
            Mat::identity(2, 2),
            Mat::identity(2, 2),
            Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
            1.0,
        )
        .unwrap();
        assert!(validate_problem(&p, &Tolerances::default()).is_err());
    }

    #[test]
    fn validation_is_deterministic() {
        let p = ProblemData::scalar(grid(), -0.3, 2.0, 0.7, 1.5, 0.1).unwrap();
        let a = ValidationReport::collect(&p, &Tolerances::default());
        let b = ValidationReport::collect(&p, &Tolerances::default());
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let g = grid();
        let r = ProblemData::constant(
            g,
            Mat::zeros(2, 2),
            Mat::identity(3, 1),
            Mat::identity(2, 2),
            Mat::identity(1, 1),
            Mat::identity(2, 2),
            1.0,
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn step_control_integrates_exactly() {
        // u = 1 on [0, 0.5), -2 on (0.5, 1]
        let g = grid();
        let mut u = ControlPath::from_fn(g.clone(), |t| Vector::from_element(1, if t < 0.5 { 1.0 } else { -2.0 }));
        u.set_jump(5, Vector::from_element(1, 1.0), Vector::from_element(1, -2.0)).unwrap();
        assert!((u.at(5)[0] + 0.5).abs() < 1e-15);
        let energy = u.integrate_with(&u, |_, a, b| a.dot(b)).unwrap();
        assert!((energy - 2.5).abs() < 1e-14);
        let p = ProblemData::scalar(g, 0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let y = p.simulate(&Vector::zeros(1), &u).unwrap();
        assert!((y.at(5)[0] - 0.5).abs() < 1e-14);
        assert!((y.at(10)[0] + 0.5).abs() < 1e-14);
        assert!((p.running_cost(&y, &u).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn jumps_only_at_interior_nodes() {
        let mut u = ControlPath::zeros(grid(), 1);
        let v = Vector::from_element(1, 1.0);
        assert!(u.set_jump(0, v.clone(), v.clone()).is_err());
        assert!(u.set_jump(10, v.clone(), v).is_err());
    }

    #[test]
    fn combine_merges_jumps() {
        let g = grid();
        let mut a = ControlPath::zeros(g.clone(), 1);
        a.set_jump(3, Vector::from_element(1, 1.0), Vector::from_element(1, 0.0)).unwrap();
        let mut b = ControlPath::zeros(g, 1);
        b.set_jump(7, Vector::from_element(1, 0.0), Vector::from_element(1, 4.0)).unwrap();
        let c = a.combine(2.0, &b, 0.5).unwrap();
        assert_eq!((c.left(3)[0], c.right(3)[0]), (2.0, 0.0));
        assert_eq!((c.left(7)[0], c.right(7)[0]), (0.0, 2.0));
        assert_eq!(c.eval_in(7, 0.0)[0], 2.0);
        assert_eq!(c.eval_in(6, 1.0)[0], 0.0);
    }
}
