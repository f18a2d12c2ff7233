//! Time grids with trapezoidal quadrature weights.

use crate::error::{Error, Result};

/// Ordered time nodes on `[t0, t_end]` with trapezoidal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TimeGrid {
    /// `steps + 1` equispaced nodes on `[t0, t_end]`.
    pub fn uniform(t0: f64, t_end: f64, steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t_end.is_finite()) || t_end <= t0 {
            return Err(Error::InvalidArgument(format!(
                "grid interval [{t0}, {t_end}] must be finite with t_end > t0"
            )));
        }
        if steps < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 steps, got {steps}"
            )));
        }
        let h = (t_end - t0) / steps as f64;
        let mut nodes: Vec<f64> = (0..=steps).map(|i| t0 + i as f64 * h).collect();
        nodes[steps] = t_end;
        Self::from_nodes(nodes)
    }

    /// Grid from explicit nodes; weights follow the trapezoidal rule.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 3 nodes, got {}",
                nodes.len()
            )));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("grid nodes must be finite".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "grid nodes must be strictly increasing".into(),
            ));
        }
        let weights = trapezoid_weights(&nodes);
        Ok(Self { nodes, weights })
    }

    pub fn t0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of intervals.
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Index of the last node.
    pub fn last(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Length of interval `k`, i.e. `t_{k+1} - t_k`.
    pub fn step(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    /// Index of the node equal to `t`, up to a relative tolerance of 1e-9 of
    /// the local spacing.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let idx = self.nodes.partition_point(|&x| x < t);
        let candidates = [idx.checked_sub(1), Some(idx)];
        candidates
            .into_iter()
            .flatten()
            .filter(|&i| i < self.nodes.len())
            .find(|&i| {
                let spacing = if i + 1 < self.nodes.len() {
                    self.step(i)
                } else {
                    self.step(i - 1)
                };
                (self.nodes[i] - t).abs() <= 1e-9 * spacing
            })
    }

    /// Like [`index_of`](Self::index_of) but an error when `t` is not a node.
    pub fn require_node(&self, t: f64) -> Result<usize> {
        self.index_of(t).ok_or_else(|| {
            Error::InvalidArgument(format!("time {t} is not a node of the grid"))
        })
    }

    /// Interval index `k` and fraction `theta` in `[0, 1]` such that
    /// `t = (1 - theta) t_k + theta t_{k+1}`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (t0, t_end) = (self.t0(), self.t_end());
        if !(t >= t0 && t <= t_end) {
            return Err(Error::OutOfRange { t, t0, t_end });
        }
        let k = self
            .nodes
            .partition_point(|&x| x <= t)
            .saturating_sub(1)
            .min(self.steps() - 1);
        let theta = ((t - self.nodes[k]) / self.step(k)).clamp(0.0, 1.0);
        Ok((k, theta))
    }

    /// Trapezoidal weights of the sub-grid `[t0, t_j]` (all zero for `j = 0`).
    pub fn truncated_weights(&self, j: usize) -> Vec<f64> {
        if j == 0 {
            return vec![0.0];
        }
        trapezoid_weights(&self.nodes[..=j])
    }

    /// Trapezoidal integral of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len(), "one value per node expected");
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for k in 0..n - 1 {
        let h = nodes[k + 1] - nodes[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_unit_interval() {
        let g = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.weights(), &[0.125, 0.25, 0.25, 0.25, 0.125]);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(TimeGrid::uniform(0.0, 1.0, 1).is_err());
        assert!(TimeGrid::uniform(1.0, 1.0, 4).is_err());
        assert!(TimeGrid::uniform(2.0, 1.0, 4).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
    }

    #[test]
    fn weights_sum_to_length() {
        let g = TimeGrid::uniform(0.0, 2.0, 8).unwrap();
        let s: f64 = g.weights().iter().sum();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn node_lookup_and_location() {
        let g = TimeGrid::uniform(0.0, 1.0, 10).unwrap();
        assert_eq!(g.index_of(0.3), Some(3));
        assert_eq!(g.index_of(1.0), Some(10));
        assert_eq!(g.index_of(0.35), None);
        let (k, theta) = g.locate(0.35).unwrap();
        assert_eq!(k, 3);
        assert!((theta - 0.5).abs() < 1e-12);
        assert_eq!(g.locate(1.0).unwrap(), (9, 1.0));
        assert!(g.locate(-0.1).is_err());
    }

    #[test]
    fn truncated_weights_cover_prefix() {
        let g = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(g.truncated_weights(0), vec![0.0]);
        assert_eq!(g.truncated_weights(2), vec![0.125, 0.25, 0.125]);
    }

    proptest! {
        #[test]
        fn trapezoid_error_bound_for_quadratics(
            a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0,
            t0 in -2.0f64..2.0, len in 0.1f64..3.0, steps in 2usize..60,
        ) {
            let g = TimeGrid::uniform(t0, t0 + len, steps).unwrap();
            let vals: Vec<f64> = g.nodes().iter().map(|t| a * t * t + b * t + c).collect();
            let t1 = t0 + len;
            let exact = a * (t1.powi(3) - t0.powi(3)) / 3.0
                + b * (t1 * t1 - t0 * t0) / 2.0
                + c * len;
            let bound = len.powi(3) * (2.0 * a).abs() / (12.0 * (steps * steps) as f64);
            prop_assert!((g.integrate(&vals) - exact).abs() <= bound + 1e-10);
        }

        #[test]
        fn weights_positive_and_consistent(t0 in -3.0f64..3.0, len in 0.01f64..10.0, steps in 2usize..300) {
            let g = TimeGrid::uniform(t0, t0 + len, steps).unwrap();
            prop_assert!(g.weights().iter().all(|&w| w > 0.0));
            let s: f64 = g.weights().iter().sum();
            prop_assert!((s - len).abs() <= 1e-12 * len);
        }
    }
}
