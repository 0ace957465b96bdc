//! Time discretization of the interval `[0, T]`.
//!
//! Grids are graded towards the origin, `t_k = T (k/N)^gamma`, because the
//! paths of interest behave like `sqrt(t)` near `t = 0` and a uniform grid
//! wastes resolution where nothing happens. `gamma = 1` recovers the uniform
//! grid.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Strictly increasing nodes `0 = t_0 < t_1 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    /// Graded grid `t_k = T (k/N)^gamma` with `gamma >= 1`.
    pub fn graded(horizon: f64, steps: usize, gamma: f64) -> Result<Arc<Self>> {
        if !(horizon > 0.0) {
            return Err(Error::invalid("T", format!("horizon must be > 0, got {horizon}")));
        }
        if steps < 2 {
            return Err(Error::invalid("N", format!("need at least 2 steps, got {steps}")));
        }
        if !(gamma >= 1.0) {
            return Err(Error::invalid("gamma", format!("grading exponent must be >= 1, got {gamma}")));
        }
        let n = steps as f64;
        let mut nodes: Vec<f64> = (0..=steps)
            .map(|k| horizon * (k as f64 / n).powf(gamma))
            .collect();
        // powf roundoff must not break the endpoint contract.
        nodes[steps] = horizon;
        Ok(Arc::new(TimeGrid { nodes }))
    }

    pub fn uniform(horizon: f64, steps: usize) -> Result<Arc<Self>> {
        Self::graded(horizon, steps, 1.0)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Arc<Self>> {
        if nodes.len() < 3 {
            return Err(Error::invalid("nodes", "need at least 3 nodes (N >= 2)"));
        }
        if nodes[0] != 0.0 {
            return Err(Error::invalid("nodes", "first node must be 0"));
        }
        if !nodes.windows(2).all(|w| w[1] > w[0] && w[1].is_finite()) {
            return Err(Error::invalid("nodes", "nodes must be finite and strictly increasing"));
        }
        Ok(Arc::new(TimeGrid { nodes }))
    }

    /// Final time `T`.
    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Number of intervals `N`.
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    /// Width of interval `k`, i.e. `t_{k+1} - t_k`.
    pub fn dt(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    /// Midpoint of interval `k`.
    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.nodes[k] + self.nodes[k + 1])
    }

    pub fn max_dt(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Bit-exact grid identity; used as the compatibility check between
    /// paths, noise and controls.
    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.nodes == other.nodes
    }
}

/// One-step discretization slack for continuum pathwise bounds: a single
/// Euler increment can overshoot by `O(sqrt(dt))`.
pub fn delta_grid(grid: &TimeGrid) -> f64 {
    4.0 * grid.max_dt().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_endpoints() {
        let g = TimeGrid::graded(2.0, 100, 2.0).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.horizon(), 2.0);
        assert_eq!(g.steps(), 100);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn uniform_dt_constant() {
        let g = TimeGrid::uniform(1.0, 10).unwrap();
        for k in 0..10 {
            assert!((g.dt(k) - 0.1).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(TimeGrid::graded(0.0, 10, 2.0).is_err());
        assert!(TimeGrid::graded(1.0, 1, 2.0).is_err());
        assert!(TimeGrid::graded(1.0, 10, 0.5).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TimeGrid::from_nodes(vec![0.1, 0.5, 1.0]).is_err());
    }
}
