//! Linear-quadratic optimal control of time-varying linear systems through
//! operator-valued reproducing kernels.
//!
//! The crate discretizes a control problem `dy/dt + A(t) y = B(t) u` with a
//! quadratic cost on a [`TimeGrid`], solves the differential Riccati equation,
//! builds the closed-loop evolution family and tabulates the kernel
//! `K(s, t) = K0(s, t) + K1(s, t)` of the Hilbert space of controlled
//! trajectories. Optimal-control problems (terminal costs, the classical
//! regulator, finitely many interpolation constraints) are then solved with
//! kernel algebra and cross-checked against the classical closed loop.
//!
//! Module map:
//!
//! * [`grid`], [`path`], [`problem`]: time grids, sampled operator paths and
//!   the problem container.
//! * [`evolution`]: transition-operator tables.
//! * [`riccati`]: Riccati and Lyapunov solves, the two-point boundary-value
//!   oracle and the classical closed loop.
//! * [`kernel`]: kernel tables, controls, the inner product and projections.
//! * [`solvers`]: terminal-cost, regulator and interpolation problems.
//! * [`heat`]: spectral heat equation with closed-form kernels.
//! * [`random`]: seeded random problem generator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod grid;
pub mod heat;
pub mod kernel;
pub mod linalg;
pub mod path;
pub mod problem;
pub mod random;
pub mod riccati;
pub mod solvers;

pub use error::{Error, Result};
pub use evolution::{
    closed_loop_generator, propagate, propagate_auto, EvolutionFamily, Propagation,
};
pub use grid::TimeGrid;
pub use kernel::{
    build_kernel_table, canonical_control, check_reproducing, check_reproducing_part,
    control_kernel, decompose, kernel_apply, kernel_section, project_onto_hk0, project_onto_hk1,
    rkhs_inner, superpose, KernelPart, KernelTable, RkhsElement,
};
pub use path::OperatorPath;
pub use problem::{validate_problem, ControlPath, ProblemData, Tolerances, Trajectory, ValidationReport};
pub use riccati::{
    decoupling_residual, optimal_lqr_classical, solve_fbs, solve_lyapunov_pi, solve_riccati,
    ClassicalLqr, FbSolution, PiSolution, RiccatiSolution,
};
pub use solvers::{
    assemble_gram, eval_objective, solve_interpolation, solve_lqr_via_kernel, solve_mayer,
    CostConvention, LogCoshCost, MayerMethod, MayerOptions, MayerProblem, Objective,
    QuadraticCost, RepresenterSolution, TerminalCost,
};
pub use heat::{
    analytic_heat_kernel, check_k1_identity, compare_with_analytic, discretize_heat,
    heat_kernel_table, heat_semigroup_defect, mode_kernel_analytic, HeatComparison,
    K1IdentityReport, ModeIdentity, SpectralHeatModel,
};
pub use random::RandomProblem;
