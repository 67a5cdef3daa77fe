#[allow(unused_imports)]
use nalgebra::ComplexField;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform interior grid of an interval with Dirichlet endpoints removed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    left: f64,
    right: f64,
}

impl Grid {
    /// `n` interior points of the unit interval.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, 0.0, 1.0)
    }

    pub fn new(n: usize, left: f64, right: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!("grid needs n >= 2, got {n}")));
        }
        if !(left.is_finite() && right.is_finite() && right > left) {
            return Err(Error::Parameter(format!(
                "invalid interval [{left}, {right}]"
            )));
        }
        Ok(Self { n, left, right })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        (self.right - self.left) / (self.n as f64 + 1.0)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.left, self.right)
    }

    /// Interior node `i` in `0..n`.
    pub fn point(&self, i: usize) -> f64 {
        self.left + (i as f64 + 1.0) * self.h()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Position normalised to the unit interval.
    pub fn unit_coordinate(&self, x: f64) -> f64 {
        (x - self.left) / (self.right - self.left)
    }
}

/// Strictly increasing sequence of times starting at the origin of the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Grid(format!(
                "uniform grid needs steps >= 1 and horizon > 0 (got {steps}, {horizon})"
            )));
        }
        let dt = horizon / steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        times[steps] = horizon;
        Ok(Self { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Grid("a time grid needs at least two points".into()));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::Grid("times must be finite and non-negative".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("times must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.steps()]
    }

    /// Width of step `k`, i.e. `t_{k+1} − t_k`.
    pub fn dt(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    /// Common step width when the grid is uniform to within 1e-9 relative.
    pub fn uniform_dt(&self) -> Option<f64> {
        let dt = (self.end() - self.start()) / self.steps() as f64;
        let uniform = (0..self.steps()).all(|k| (self.dt(k) - dt).abs() <= 1e-9 * dt);
        uniform.then_some(dt)
    }

    /// Every `factor`-th time; `factor` must divide the step count.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.steps().is_multiple_of(factor) {
            return Err(Error::Grid(format!(
                "factor {factor} does not divide {} steps",
                self.steps()
            )));
        }
        Ok(Self {
            times: self.times.iter().step_by(factor).copied().collect(),
        })
    }

    /// Integer `f` with `other` equal to this grid coarsened by `f`.
    pub fn refinement_factor_over(&self, other: &TimeGrid) -> Option<usize> {
        if other.steps() == 0 || !self.steps().is_multiple_of(other.steps()) {
            return None;
        }
        let f = self.steps() / other.steps();
        let matches = other
            .times
            .iter()
            .enumerate()
            .all(|(k, &t)| (self.times[k * f] - t).abs() <= 1e-12 * (1.0 + t.abs()));
        matches.then_some(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_grid_geometry() {
        let g = Grid::unit(3).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.points(), alloc::vec![0.25, 0.5, 0.75]);
        assert!(Grid::unit(1).is_err());
    }

    #[test]
    fn time_grid_validation() {
        assert!(TimeGrid::from_times(alloc::vec![0.0, 0.5, 0.4]).is_err());
        assert!(TimeGrid::from_times(alloc::vec![0.0]).is_err());
        let g = TimeGrid::uniform(1.0, 8).unwrap();
        assert_eq!(g.end(), 1.0);
        assert_eq!(g.uniform_dt(), Some(0.125));
        let c = g.coarsen(4).unwrap();
        assert_eq!(c.times(), &[0.0, 0.5, 1.0]);
        assert_eq!(g.refinement_factor_over(&c), Some(4));
        assert!(g.coarsen(3).is_err());
    }
}
