//! Evolution families: tables of transition operators `Phi(t_i, t_j)`,
//! `i >= j`, solving `d/dt Phi(t, s) + G(t) Phi(t, s) = 0`, `Phi(s, s) = I`.
//!
//! The RK4 step over each grid interval is a linear map, so it is formed once
//! per interval (RK4 applied to the identity) and every block is a product
//! of step maps. Consequently the discrete family satisfies the semigroup law
//! `Phi(k, j) = Phi(k, i) Phi(i, j)` up to rounding.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{is_finite, Mat};
use crate::path::OperatorPath;
use crate::problem::{same_grid, ProblemData};
use crate::riccati::RiccatiSolution;

/// How a family was computed.
#[derive(Debug, Clone, PartialEq)]
pub enum Propagation {
    /// Classical fourth-order Runge-Kutta with the generator interpolated at
    /// the stage times.
    Rk4,
    /// Constant diagonal generator `diag(rates)`; blocks are exact
    /// exponentials.
    ExactDiagonal { rates: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct EvolutionFamily {
    grid: Arc<TimeGrid>,
    dim: usize,
    /// Column-major by base node: column `j` holds `Phi(t_j, t_j), Phi(t_{j+1}, t_j), ...`.
    blocks: Vec<Mat>,
    offsets: Vec<usize>,
    propagation: Propagation,
}

impl EvolutionFamily {
    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn propagation(&self) -> &Propagation {
        &self.propagation
    }

    /// Number of stored blocks, `nodes (nodes + 1) / 2`.
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// `Phi(t_i, t_j)`; panics when `j > i`.
    pub fn get(&self, i: usize, j: usize) -> &Mat {
        assert!(j <= i, "transition Phi(t_{i}, t_{j}) is only defined for i >= j");
        &self.blocks[self.offsets[j] + (i - j)]
    }

    /// `Phi(t_i, t_j)`, or an error when `j > i`.
    pub fn block(&self, i: usize, j: usize) -> Result<&Mat> {
        if j > i || i >= self.grid.len() {
            return Err(Error::InvalidArgument(format!(
                "transition block ({i}, {j}) requires j <= i < {}",
                self.grid.len()
            )));
        }
        Ok(self.get(i, j))
    }

    /// `Phi(t, s)^T` for node indices `s <= t`: the backward adjoint flow
    /// started from the identity at `t`.
    pub fn adjoint_block(&self, t: usize, s: usize) -> Result<Mat> {
        if s > t {
            return Err(Error::InvalidArgument(format!(
                "adjoint block needs s <= t, got s = {s}, t = {t}"
            )));
        }
        Ok(self.block(t, s)?.transpose())
    }
}

/// Generator of the optimal closed loop, `A + B N^{-1} B^T P`, at every node.
pub fn closed_loop_generator(p: &ProblemData, ric: &RiccatiSolution) -> Result<OperatorPath> {
    same_grid(p.grid(), ric.grid())?;
    let values = (0..p.grid().len())
        .map(|i| Ok(p.a.at(i) + p.coupling(i)? * &ric.p[i]))
        .collect::<Result<Vec<_>>>()?;
    OperatorPath::new(p.grid().clone(), values)
}

/// RK4 evolution family of `gen`.
pub fn propagate(gen: &OperatorPath) -> Result<EvolutionFamily> {
    if gen.rows() != gen.cols() {
        return Err(Error::Dimension(format!(
            "generator must be square, got {}x{}",
            gen.rows(),
            gen.cols()
        )));
    }
    let grid = gen.grid().clone();
    let steps: Vec<Mat> = (0..grid.steps())
        .into_par_iter()
        .map(|k| rk4_step_matrix(gen, &grid, k))
        .collect();
    if let Some(k) = steps.iter().position(|r| !is_finite(r)) {
        return Err(Error::Divergence { t: grid.node(k) });
    }
    let dim = gen.rows();
    let n = grid.len();
    let columns: Vec<Vec<Mat>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut col = Vec::with_capacity(n - j);
            col.push(Mat::identity(dim, dim));
            for step in &steps[j..n - 1] {
                let next = step * col.last().unwrap();
                col.push(next);
            }
            col
        })
        .collect();
    let family = assemble(grid, dim, columns, Propagation::Rk4);
    if let Some(pos) = family.blocks.iter().position(|b| !is_finite(b)) {
        let j = family.offsets.partition_point(|&o| o <= pos) - 1;
        let i = j + pos - family.offsets[j];
        return Err(Error::Divergence {
            t: family.grid.node(i),
        });
    }
    Ok(family)
}

/// Uses exact exponentials when `gen` is constant and diagonal, RK4
/// otherwise.
pub fn propagate_auto(gen: &OperatorPath) -> Result<EvolutionFamily> {
    let g = gen.at(0);
    let diagonal = g.is_square()
        && g.iter()
            .enumerate()
            .all(|(idx, &x)| x == 0.0 || idx % g.nrows() == idx / g.nrows());
    if !(diagonal && gen.is_constant()) {
        return propagate(gen);
    }
    let rates: Vec<f64> = g.diagonal().iter().copied().collect();
    let grid = gen.grid().clone();
    let dim = rates.len();
    let n = grid.len();
    let columns: Vec<Vec<Mat>> = (0..n)
        .into_par_iter()
        .map(|j| {
            (j..n)
                .map(|i| {
                    let dt = grid.node(i) - grid.node(j);
                    Mat::from_diagonal(&nalgebra::DVector::from_iterator(
                        dim,
                        rates.iter().map(|a| (-a * dt).exp()),
                    ))
                })
                .collect()
        })
        .collect();
    Ok(assemble(grid, dim, columns, Propagation::ExactDiagonal { rates }))
}

fn assemble(grid: Arc<TimeGrid>, dim: usize, columns: Vec<Vec<Mat>>, propagation: Propagation) -> EvolutionFamily {
    let mut offsets = Vec::with_capacity(columns.len());
    let mut acc = 0;
    for c in &columns {
        offsets.push(acc);
        acc += c.len();
    }
    let blocks = columns.into_iter().flatten().collect();
    EvolutionFamily {
        grid,
        dim,
        blocks,
        offsets,
        propagation,
    }
}

/// One RK4 step of `dX/dt = -G(t) X` over interval `k`, applied to `X = I`.
fn rk4_step_matrix(gen: &OperatorPath, grid: &TimeGrid, k: usize) -> Mat {
    let h = grid.step(k);
    let g0 = gen.eval_in(k, 0.0);
    let gm = gen.eval_in(k, 0.5);
    let g1 = gen.eval_in(k, 1.0);
    let dim = g0.nrows();
    let id = Mat::identity(dim, dim);
    let k1 = -&g0;
    let k2 = -&gm * (&id + &k1 * (0.5 * h));
    let k3 = -&gm * (&id + &k2 * (0.5 * h));
    let k4 = -&g1 * (&id + &k3 * h);
    id + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}
