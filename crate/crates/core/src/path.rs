//! Time-varying matrices sampled at grid nodes.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{lerp, Mat};

/// A matrix-valued function of time, stored at the grid nodes and linearly
/// interpolated in between.
#[derive(Debug, Clone)]
pub struct OperatorPath {
    grid: Arc<TimeGrid>,
    rows: usize,
    cols: usize,
    values: Vec<Mat>,
}

impl OperatorPath {
    pub fn new(grid: Arc<TimeGrid>, values: Vec<Mat>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "operator path has {} samples for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        let (rows, cols) = values[0].shape();
        if let Some((i, m)) = values.iter().enumerate().find(|(_, m)| m.shape() != (rows, cols)) {
            return Err(Error::Dimension(format!(
                "sample {i} has shape {:?}, expected {:?}",
                m.shape(),
                (rows, cols)
            )));
        }
        if values.iter().any(|m| m.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidArgument(
                "operator path contains non-finite entries".into(),
            ));
        }
        Ok(Self {
            grid,
            rows,
            cols,
            values,
        })
    }

    /// The same matrix at every node.
    pub fn constant(grid: Arc<TimeGrid>, value: Mat) -> Self {
        let (rows, cols) = value.shape();
        let values = vec![value; grid.len()];
        Self {
            grid,
            rows,
            cols,
            values,
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<TimeGrid>, f: impl Fn(f64) -> Mat) -> Result<Self> {
        let values = grid.nodes().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    /// Stored sample at node `i`.
    pub fn at(&self, i: usize) -> &Mat {
        &self.values[i]
    }

    /// Value at an arbitrary time in `[t0, t_end]`.
    pub fn eval(&self, t: f64) -> Result<Mat> {
        let (k, theta) = self.grid.locate(t)?;
        Ok(self.eval_in(k, theta))
    }

    /// Value at fraction `theta` of interval `k`.
    pub fn eval_in(&self, k: usize, theta: f64) -> Mat {
        lerp(&self.values[k], &self.values[k + 1], theta)
    }

    /// True when every sample equals the first one exactly.
    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|m| m == &self.values[0])
    }

    pub fn map(&self, f: impl Fn(&Mat) -> Mat) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<TimeGrid> {
        Arc::new(TimeGrid::uniform(0.0, 1.0, 4).unwrap())
    }

    #[test]
    fn constant_path_everywhere() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let p = OperatorPath::constant(grid(), m.clone());
        for t in [0.0, 0.1, 0.5, 0.99, 1.0] {
            assert_eq!(p.eval(t).unwrap(), m);
        }
        assert!(p.is_constant());
    }

    #[test]
    fn linear_interpolation() {
        let p = OperatorPath::from_fn(grid(), |t| Mat::from_element(1, 1, t)).unwrap();
        assert!((p.eval(0.5).unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((p.eval(0.3).unwrap()[(0, 0)] - 0.3).abs() < 1e-15);
        assert!(p.eval(-0.1).is_err());
        assert!(p.eval(1.1).is_err());
    }

    #[test]
    fn exact_at_nodes() {
        let p = OperatorPath::from_fn(grid(), |t| Mat::from_element(1, 2, (3.0 * t).sin())).unwrap();
        for (i, &t) in p.grid().clone().nodes().iter().enumerate() {
            assert_eq!(&p.eval(t).unwrap(), p.at(i));
        }
    }

    #[test]
    fn shape_checks() {
        let mut values = vec![Mat::zeros(2, 2); 5];
        values[3] = Mat::zeros(2, 3);
        assert!(OperatorPath::new(grid(), values).is_err());
        assert!(OperatorPath::new(grid(), vec![Mat::zeros(1, 1); 4]).is_err());
    }
}
