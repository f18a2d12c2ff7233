//! Seeded random problem generator.
//!
//! Distributions, all drawn from a `ChaCha8Rng` seeded with the given seed in
//! the order listed:
//!
//! * `A(t) = Q diag(d + e sin(2 pi s)) Q^T` with `s = (t - t0)/(T - t0)`,
//!   `Q` the orthogonal factor of a standard-normal `n x n` matrix,
//!   `d_i ~ U[-0.5, 1.5]` and `e_i ~ U[-0.5, 0.5]` (zero when time-invariant).
//! * `B` constant, entries `U[-1, 1]`.
//! * `M(t) = (1 + 0.5 cos(2 pi s)) C^T C`, `C` entries `U[-1, 1]` (constant
//!   factor 1 when time-invariant).
//! * `N = I + D^T D`, `D` entries `U[-0.5, 0.5]`, so `nu = 1`.
//! * `J0 = I`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::grid::TimeGrid;
use crate::linalg::Mat;
use crate::path::OperatorPath;
use crate::problem::ProblemData;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomProblem {
    pub state_dim: usize,
    pub control_dim: usize,
    pub time_varying: bool,
}

impl RandomProblem {
    pub fn new(state_dim: usize, control_dim: usize) -> Self {
        Self {
            state_dim,
            control_dim,
            time_varying: true,
        }
    }

    pub fn generate(&self, grid: Arc<TimeGrid>, seed: u64) -> Result<ProblemData> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.state_dim;
        let m = self.control_dim;
        let gauss = Mat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = gauss.qr().q();
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..1.5)).collect();
        let e: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let b = uniform(&mut rng, n, m, 1.0);
        let c = uniform(&mut rng, n, n, 1.0);
        let dm = uniform(&mut rng, m, m, 0.5);

        let (t0, t_end) = (grid.t0(), grid.t_end());
        let phase = |t: f64| 2.0 * PI * (t - t0) / (t_end - t0);
        let tv = self.time_varying;
        let a = OperatorPath::from_fn(grid.clone(), |t| {
            let s = if tv { phase(t).sin() } else { 0.0 };
            let diag = DVector::from_iterator(n, (0..n).map(|i| d[i] + e[i] * s));
            &q * Mat::from_diagonal(&diag) * q.transpose()
        })?;
        let ctc = c.transpose() * &c;
        let state_weight = OperatorPath::from_fn(grid.clone(), |t| {
            let f = if tv { 1.0 + 0.5 * phase(t).cos() } else { 1.0 };
            &ctc * f
        })?;
        let n_mat = Mat::identity(m, m) + dm.transpose() * &dm;
        ProblemData::new(
            a,
            OperatorPath::constant(grid.clone(), b),
            state_weight,
            OperatorPath::constant(grid, n_mat),
            Mat::identity(n, n),
            1.0,
        )
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize, half_width: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-half_width..half_width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{validate_problem, Tolerances};

    #[test]
    fn generated_problems_validate() {
        let g = Arc::new(TimeGrid::uniform(0.0, 1.0, 20).unwrap());
        for seed in 0..5 {
            let p = RandomProblem::new(4, 2).generate(g.clone(), seed).unwrap();
            validate_problem(&p, &Tolerances::default()).unwrap();
            assert_eq!(p.state_dim(), 4);
            assert_eq!(p.control_dim(), 2);
        }
    }

    #[test]
    fn same_seed_same_problem() {
        let g = Arc::new(TimeGrid::uniform(0.0, 1.0, 10).unwrap());
        let a = RandomProblem::new(3, 3).generate(g.clone(), 42).unwrap();
        let b = RandomProblem::new(3, 3).generate(g.clone(), 42).unwrap();
        let c = RandomProblem::new(3, 3).generate(g, 43).unwrap();
        assert_eq!(a.a.values(), b.a.values());
        assert_ne!(a.b.values(), c.b.values());
    }
}
