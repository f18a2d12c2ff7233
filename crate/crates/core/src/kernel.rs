//! The reproducing kernel of the Hilbert space of controlled trajectories.
//!
//! With `Phi` the closed-loop evolution family and `W = (J0 + P(t0))^{-1}`,
//!
//! ```text
//! K0(s, t) = Phi(s, t0) W Phi(t, t0)^T
//! K1(s, t) = int_{t0}^{min(s, t)} Phi(s, r) B N^{-1} B^T (r) Phi(t, r)^T dr
//! K        = K0 + K1
//! ```
//!
//! Blocks are tabulated at node pairs only. `K1` uses the trapezoidal weights
//! of the grid truncated at `min(s, t)`; since the discrete family is a
//! product of step maps, `K1(s, t) = Phi(s, t) K1(t, t)` for `s >= t` and only
//! the diagonal sums are formed explicitly.
//!
//! The space is normed by
//! `||y||^2 = <y(t0), J0 y(t0)> + int <M y, y> + <N u, u>`, with `u` the
//! minimal-`N`-norm control generating `y`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::{EvolutionFamily, Propagation};
use crate::grid::TimeGrid;
use crate::linalg::{condition_number, pseudo_inverse, Mat, Vector};
use crate::problem::{same_grid, ControlPath, ProblemData, Trajectory};
use crate::riccati::{PiSolution, RiccatiSolution, INVERTIBILITY_RCOND};

/// Which part of the kernel to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelPart {
    /// `K = K0 + K1`.
    Full,
    /// `K0`, driven by the initial state.
    InitialState,
    /// `K1`, trajectories started from zero.
    ZeroInitial,
}

/// An element of the trajectory space: a trajectory together with its
/// canonical (minimal-norm) control.
#[derive(Debug, Clone)]
pub struct RkhsElement {
    pub trajectory: Trajectory,
    pub control: ControlPath,
    pub initial: Vector,
}

impl RkhsElement {
    pub fn zero(grid: Arc<TimeGrid>, state_dim: usize, control_dim: usize) -> Self {
        Self {
            trajectory: Trajectory::zeros(grid.clone(), state_dim),
            control: ControlPath::zeros(grid, control_dim),
            initial: Vector::zeros(state_dim),
        }
    }

    /// Trajectory generated from `y0` by `u`; the stored control is the
    /// minimal-norm control with the same `B u`.
    pub fn from_control(p: &ProblemData, y0: &Vector, u: &ControlPath) -> Result<Self> {
        let trajectory = p.simulate(y0, u)?;
        same_grid(p.grid(), &u.grid)?;
        let projectors = (0..p.grid().len())
            .map(|i| minimal_norm_projector(p, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            trajectory,
            control: u.map(|i, v| &projectors[i] * v),
            initial: y0.clone(),
        })
    }

    /// Element of a sampled trajectory, with the control recovered by
    /// [`canonical_control`].
    pub fn from_trajectory(p: &ProblemData, y: Trajectory, tolerance: Option<f64>) -> Result<Self> {
        let control = canonical_control(p, &y, tolerance)?;
        let initial = y.states[0].clone();
        Ok(Self {
            trajectory: y,
            control,
            initial,
        })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.trajectory.grid
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        same_grid(self.grid(), other.grid())?;
        let zip = |x: &[Vector], y: &[Vector]| -> Vec<Vector> {
            x.iter().zip(y).map(|(u, v)| u * a + v * b).collect()
        };
        Ok(Self {
            trajectory: Trajectory::new(
                self.grid().clone(),
                zip(&self.trajectory.states, &other.trajectory.states),
            )?,
            control: self.control.combine(a, &other.control, b)?,
            initial: &self.initial * a + &other.initial * b,
        })
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            trajectory: Trajectory {
                grid: self.grid().clone(),
                states: self.trajectory.states.iter().map(|v| v * a).collect(),
            },
            control: self.control.map(|_, v| v * a),
            initial: &self.initial * a,
        }
    }

    pub fn norm_squared(&self, p: &ProblemData) -> Result<f64> {
        rkhs_inner(p, self, self)
    }
}

/// Tabulated kernel blocks `K0(t_i, t_j)`, `K1(t_i, t_j)` plus the data
/// needed to recover the controls of kernel sections.
#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: Arc<TimeGrid>,
    dim: usize,
    k0: Vec<Mat>,
    k1: Vec<Mat>,
    offsets: Vec<usize>,
    /// `(J0 + P(t0))^{-1}`.
    pub initial_inverse: Mat,
    closed_loop: Arc<EvolutionFamily>,
    riccati: Vec<Mat>,
    gains: Vec<Mat>,
    exact_quadrature: bool,
}

impl KernelTable {
    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn closed_loop(&self) -> &Arc<EvolutionFamily> {
        &self.closed_loop
    }

    /// True when `K1` was integrated in closed form (constant diagonal
    /// closed loop with constant `B N^{-1} B^T`).
    pub fn exact_quadrature(&self) -> bool {
        self.exact_quadrature
    }

    fn stored(&self, part: KernelPart, i: usize, j: usize) -> &Mat {
        debug_assert!(i >= j);
        let idx = self.offsets[j] + (i - j);
        match part {
            KernelPart::InitialState => &self.k0[idx],
            KernelPart::ZeroInitial => &self.k1[idx],
            KernelPart::Full => unreachable!("full blocks are not stored"),
        }
    }

    /// Block `(i, j)` of the requested part.
    pub fn block(&self, part: KernelPart, i: usize, j: usize) -> Mat {
        match part {
            KernelPart::Full => {
                self.block(KernelPart::InitialState, i, j) + self.block(KernelPart::ZeroInitial, i, j)
            }
            _ if i >= j => self.stored(part, i, j).clone(),
            _ => self.stored(part, j, i).transpose(),
        }
    }

    pub fn k(&self, i: usize, j: usize) -> Mat {
        self.block(KernelPart::Full, i, j)
    }

    pub fn k0(&self, i: usize, j: usize) -> Mat {
        self.block(KernelPart::InitialState, i, j)
    }

    pub fn k1(&self, i: usize, j: usize) -> Mat {
        self.block(KernelPart::ZeroInitial, i, j)
    }

    /// `block(part, i, j) * z` without materializing the block.
    pub fn apply(&self, part: KernelPart, i: usize, j: usize, z: &Vector) -> Vector {
        match part {
            KernelPart::Full => {
                self.apply(KernelPart::InitialState, i, j, z) + self.apply(KernelPart::ZeroInitial, i, j, z)
            }
            _ if i >= j => self.stored(part, i, j) * z,
            _ => self.stored(part, j, i).tr_mul(z),
        }
    }

    /// Off-node value by bilinear interpolation of the tabulated blocks.
    /// Approximate: the kernel is only piecewise smooth across `s = t`.
    pub fn eval(&self, part: KernelPart, s: f64, t: f64) -> Result<Mat> {
        let (i, a) = self.grid.locate(s)?;
        let (j, b) = self.grid.locate(t)?;
        Ok(self.block(part, i, j) * ((1.0 - a) * (1.0 - b))
            + self.block(part, i + 1, j) * (a * (1.0 - b))
            + self.block(part, i, j + 1) * ((1.0 - a) * b)
            + self.block(part, i + 1, j + 1) * (a * b))
    }
}

/// Tabulates `K0` and `K1` on all node pairs.
pub fn build_kernel_table(
    p: &ProblemData,
    ric: &RiccatiSolution,
    closed_loop: Arc<EvolutionFamily>,
) -> Result<KernelTable> {
    let grid = p.grid().clone();
    same_grid(&grid, ric.grid())?;
    same_grid(&grid, closed_loop.grid())?;
    let n = p.state_dim();
    if closed_loop.dim() != n {
        return Err(Error::Dimension(format!(
            "evolution family has dimension {}, expected {n}",
            closed_loop.dim()
        )));
    }
    let initial = &p.initial_weight + ric.at(0);
    let cond = condition_number(&initial);
    if !(1.0 / cond >= INVERTIBILITY_RCOND) {
        return Err(Error::NotInvertible { cond });
    }
    let initial_inverse = crate::linalg::symmetrize(
        &initial
            .clone()
            .try_inverse()
            .ok_or(Error::NotInvertible { cond })?,
    );
    let gains = p.gains()?;
    let couplings: Vec<Mat> = (0..grid.len()).map(|i| p.b.at(i) * &gains[i]).collect();
    let nodes = grid.len();

    let mut offsets = Vec::with_capacity(nodes);
    let mut acc = 0;
    for j in 0..nodes {
        offsets.push(acc);
        acc += nodes - j;
    }

    // K0 columns
    let fam = &closed_loop;
    let k0: Vec<Mat> = (0..nodes)
        .into_par_iter()
        .flat_map_iter(|j| {
            let right = &initial_inverse * fam.get(j, 0).transpose();
            (j..nodes).map(move |i| fam.get(i, 0) * &right)
        })
        .collect();

    let exact_rates = match fam.propagation() {
        Propagation::ExactDiagonal { rates } if couplings.iter().all(|s| s == &couplings[0]) => {
            Some(rates.clone())
        }
        _ => None,
    };

    let k1: Vec<Mat> = if let Some(rates) = &exact_rates {
        let s = &couplings[0];
        let t0 = grid.t0();
        (0..nodes)
            .into_par_iter()
            .flat_map_iter(|j| {
                let grid = &grid;
                (j..nodes).map(move |i| {
                    let (ti, tj) = (grid.node(i), grid.node(j));
                    Mat::from_fn(n, n, |r, c| {
                        let (ar, ac) = (rates[r], rates[c]);
                        s[(r, c)] * (-ar * (ti - tj)).exp() * exp_integral(ar + ac, tj - t0)
                    })
                })
            })
            .collect()
    } else {
        let diag: Vec<Mat> = (0..nodes)
            .into_par_iter()
            .map(|j| {
                let w = grid.truncated_weights(j);
                let mut acc = Mat::zeros(n, n);
                for (k, wk) in w.iter().enumerate() {
                    if *wk == 0.0 {
                        continue;
                    }
                    let phi = fam.get(j, k);
                    acc += phi * &couplings[k] * phi.transpose() * *wk;
                }
                crate::linalg::symmetrize(&acc)
            })
            .collect();
        (0..nodes)
            .into_par_iter()
            .flat_map_iter(|j| {
                let d = &diag[j];
                (j..nodes).map(move |i| fam.get(i, j) * d)
            })
            .collect()
    };

    Ok(KernelTable {
        grid,
        dim: n,
        k0,
        k1,
        offsets,
        initial_inverse,
        closed_loop,
        riccati: ric.p.clone(),
        gains,
        exact_quadrature: exact_rates.is_some(),
    })
}

/// `int_0^len exp(-c x) dx`, accurate for small `c`.
fn exp_integral(c: f64, len: f64) -> f64 {
    if c == 0.0 {
        len
    } else {
        -(-c * len).exp_m1() / c
    }
}

/// Linear combination `sum_n K_part(., t_n) z_n` with its control.
pub fn superpose(kt: &KernelTable, part: KernelPart, terms: &[(usize, Vector)]) -> Result<RkhsElement> {
    let grid = kt.grid.clone();
    let nodes = grid.len();
    let n = kt.dim;
    for (t, z) in terms {
        if *t >= nodes {
            return Err(Error::InvalidArgument(format!("node index {t} is past the grid")));
        }
        if z.len() != n {
            return Err(Error::Dimension(format!("z has length {}, expected {n}", z.len())));
        }
    }
    let states: Vec<Vector> = (0..nodes)
        .into_par_iter()
        .map(|i| {
            terms
                .iter()
                .fold(Vector::zeros(n), |acc, (t, z)| acc + kt.apply(part, i, *t, z))
        })
        .collect();
    // one-sided limits of the control; they differ only at term nodes
    let sides: Vec<(Vector, Option<Vector>)> = (0..nodes)
        .into_par_iter()
        .map(|i| {
            // adjoint flow sum_n 1_{s < t_n} Phi(t_n, s)^T z_n
            let mut later = Vector::zeros(n);
            let mut here = None::<Vector>;
            if part != KernelPart::InitialState {
                for (t, z) in terms {
                    if i < *t {
                        later += kt.closed_loop.get(*t, i).tr_mul(z);
                    } else if i == *t {
                        *here.get_or_insert_with(|| Vector::zeros(n)) += z;
                    }
                }
            }
            let feedback = &kt.riccati[i] * &states[i];
            let right = &kt.gains[i] * (&later - &feedback);
            let left = here.map(|z| &kt.gains[i] * (later + z - feedback));
            (right, left)
        })
        .collect();
    let mut control = ControlPath::zeros(grid.clone(), kt.gains[0].nrows());
    for (i, (right, left)) in sides.into_iter().enumerate() {
        match left {
            None => control.controls[i] = right,
            Some(_) if i == 0 => control.controls[i] = right,
            Some(left) if i == control.grid.last() => control.controls[i] = left,
            Some(left) => control.set_jump(i, left, right)?,
        }
    }
    let initial = states[0].clone();
    Ok(RkhsElement {
        trajectory: Trajectory::new(grid, states)?,
        control,
        initial,
    })
}

/// Section `s -> K_part(s, t) z` with its control.
pub fn kernel_section(kt: &KernelTable, part: KernelPart, t: usize, z: &Vector) -> Result<RkhsElement> {
    superpose(kt, part, &[(t, z.clone())])
}

/// `s -> K(s, t) z`.
pub fn kernel_apply(kt: &KernelTable, t: usize, z: &Vector) -> Result<RkhsElement> {
    kernel_section(kt, KernelPart::Full, t, z)
}

/// Control of the section `K(., t) z`:
/// `u(s) = N^{-1} B^T [1_{s<t} Phi(t, s)^T z - P(s) K(s, t) z]`.
///
/// At `s = t` the nodal value blends the one-sided limits with the
/// trapezoidal weights of the neighbouring intervals.
pub fn control_kernel(kt: &KernelTable, t: usize, z: &Vector) -> Result<ControlPath> {
    Ok(kernel_apply(kt, t, z)?.control)
}

/// `N^{-1} B^T (B N^{-1} B^T)^+ B` at node `i`: maps any control to the
/// minimal-norm control with the same effect on the state.
fn minimal_norm_projector(p: &ProblemData, i: usize) -> Result<Mat> {
    let g = p.gain(i)?;
    let b = p.b.at(i);
    Ok(&g * pseudo_inverse(&(b * &g), 1e-12) * b)
}

/// Minimal-`N`-norm control generating `y`, from fourth-order five-point
/// finite differences of `y` (centred, shifted one-sided at the ends).
///
/// Fails with [`Error::NotAdmissible`] when `dy/dt + A y` leaves the range of
/// `B` by more than `tolerance`. The default `(1e-6 + 10 h^2)(1 + sup |dy/dt + A y|)`
/// leaves room for the differencing error on a grid of largest step `h`.
pub fn canonical_control(p: &ProblemData, y: &Trajectory, tolerance: Option<f64>) -> Result<ControlPath> {
    same_grid(p.grid(), &y.grid)?;
    let grid = p.grid();
    let ydot = finite_difference(grid, &y.states);
    let drift: Vec<Vector> = (0..grid.len()).map(|i| &ydot[i] + p.a.at(i) * &y.states[i]).collect();
    let h = (0..grid.steps()).map(|k| grid.step(k)).fold(0.0, f64::max);
    let scale = drift.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let tol = tolerance.unwrap_or((1e-6 + 10.0 * h * h) * (1.0 + scale));
    let mut worst: f64 = 0.0;
    let controls = (0..grid.len())
        .map(|i| {
            let v = &drift[i];
            let g = p.gain(i)?;
            let b = p.b.at(i);
            let u = &g * (pseudo_inverse(&(b * &g), 1e-12) * v);
            worst = worst.max((b * &u - v).norm());
            Ok(u)
        })
        .collect::<Result<Vec<_>>>()?;
    if worst > tol {
        return Err(Error::NotAdmissible {
            residual: worst,
            tolerance: tol,
        });
    }
    ControlPath::new(grid.clone(), controls)
}

fn finite_difference(grid: &TimeGrid, y: &[Vector]) -> Vec<Vector> {
    let t = grid.nodes();
    let width = t.len().min(5);
    (0..t.len())
        .map(|i| {
            // window of `width` nodes, centred where possible
            let start = i.saturating_sub(width / 2).min(t.len() - width);
            let nodes = &t[start..start + width];
            lagrange_derivative_weights(nodes, t[i])
                .iter()
                .enumerate()
                .fold(Vector::zeros(y[i].len()), |acc, (k, c)| acc + &y[start + k] * *c)
        })
        .collect()
}

/// Weights of the derivative at `x` of the interpolating polynomial through
/// `nodes`.
fn lagrange_derivative_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|k| {
            let denom: f64 = (0..nodes.len()).filter(|&l| l != k).map(|l| nodes[k] - nodes[l]).product();
            let numer: f64 = (0..nodes.len())
                .filter(|&m| m != k)
                .map(|m| {
                    (0..nodes.len())
                        .filter(|&l| l != k && l != m)
                        .map(|l| x - nodes[l])
                        .product::<f64>()
                })
                .sum();
            numer / denom
        })
        .collect()
}

/// Inner product
/// `<y1(t0), J0 y2(t0)> + int <M y1, y2> + <N u1, u2> dt` by trapezoidal
/// quadrature.
pub fn rkhs_inner(p: &ProblemData, e1: &RkhsElement, e2: &RkhsElement) -> Result<f64> {
    same_grid(p.grid(), e1.grid())?;
    same_grid(p.grid(), e2.grid())?;
    let grid = p.grid();
    let y1 = &e1.trajectory.states;
    let y2 = &e2.trajectory.states;
    let vals: Vec<f64> = (0..grid.len())
        .map(|i| y1[i].dot(&(p.state_weight.at(i) * &y2[i])))
        .collect();
    let control = e1
        .control
        .integrate_with(&e2.control, |i, a, b| a.dot(&(p.control_weight.at(i) * b)))?;
    Ok(y1[0].dot(&(&p.initial_weight * &y2[0])) + grid.integrate(&vals) + control)
}

/// Relative reproducing-property defect
/// `|<y(t), z> - <y, K(., t) z>| / max(1, |z| sup|y|)`.
pub fn check_reproducing(p: &ProblemData, kt: &KernelTable, e: &RkhsElement, t: usize, z: &Vector) -> Result<f64> {
    check_reproducing_part(p, kt, KernelPart::Full, e, t, z)
}

/// [`check_reproducing`] against a chosen kernel part.
pub fn check_reproducing_part(
    p: &ProblemData,
    kt: &KernelTable,
    part: KernelPart,
    e: &RkhsElement,
    t: usize,
    z: &Vector,
) -> Result<f64> {
    let section = kernel_section(kt, part, t, z)?;
    let lhs = e.trajectory.states[t].dot(z);
    let rhs = rkhs_inner(p, e, &section)?;
    Ok((lhs - rhs).abs() / (z.norm() * e.trajectory.sup_norm()).max(1.0))
}

/// Projection of `K(., t) z` onto the zero-initial-state subspace, i.e. the
/// section `K1(., t) z`.
pub fn project_onto_hk1(kt: &KernelTable, t: usize, z: &Vector) -> Result<RkhsElement> {
    kernel_section(kt, KernelPart::ZeroInitial, t, z)
}

/// Projection of `K(., t) z` onto the uncontrolled trajectories:
/// `s -> Phi_A(s, t0) (J0 + pi(t0))^{-1} Phi_A(t, t0)^T z` with zero control.
pub fn project_onto_hk0(
    p: &ProblemData,
    pi: &PiSolution,
    open_loop: &EvolutionFamily,
    t: usize,
    z: &Vector,
) -> Result<RkhsElement> {
    let grid = p.grid();
    same_grid(grid, pi.grid())?;
    same_grid(grid, open_loop.grid())?;
    let m = &p.initial_weight + pi.at(0);
    let cond = condition_number(&m);
    if !(1.0 / cond >= INVERTIBILITY_RCOND) {
        return Err(Error::NotInvertible { cond });
    }
    let rhs = open_loop.block(t, 0)?.tr_mul(z);
    let zeta0 = m
        .lu()
        .solve(&rhs)
        .ok_or(Error::NotInvertible { cond })?;
    let states = (0..grid.len()).map(|i| open_loop.get(i, 0) * &zeta0).collect();
    Ok(RkhsElement {
        trajectory: Trajectory::new(grid.clone(), states)?,
        control: ControlPath::zeros(grid.clone(), p.control_dim()),
        initial: zeta0,
    })
}

/// Splits `e` into the uncontrolled trajectory from `e(t0)` and the
/// zero-initial-state remainder carrying the whole control.
pub fn decompose(p: &ProblemData, open_loop: &EvolutionFamily, e: &RkhsElement) -> Result<(RkhsElement, RkhsElement)> {
    let grid = p.grid();
    same_grid(grid, e.grid())?;
    same_grid(grid, open_loop.grid())?;
    let y0 = &e.trajectory.states[0];
    let free_states: Vec<Vector> = (0..grid.len()).map(|i| open_loop.get(i, 0) * y0).collect();
    let rest: Vec<Vector> = e
        .trajectory
        .states
        .iter()
        .zip(&free_states)
        .map(|(y, f)| y - f)
        .collect();
    let free = RkhsElement {
        trajectory: Trajectory::new(grid.clone(), free_states)?,
        control: ControlPath::zeros(grid.clone(), p.control_dim()),
        initial: y0.clone(),
    };
    let remainder = RkhsElement {
        trajectory: Trajectory::new(grid.clone(), rest)?,
        control: e.control.clone(),
        initial: Vector::zeros(p.state_dim()),
    };
    Ok((free, remainder))
}
