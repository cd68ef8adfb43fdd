//! Period grid and periodic grid functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform discretization of one habitat period `[0, L)` together with the
/// size of the truncated simulation domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Period length.
    pub length: f64,
    /// Points per period.
    pub n: usize,
    /// Number of periods in the truncated simulation domain (even).
    pub sim_periods: usize,
}

impl Grid {
    pub fn new(length: f64, n: usize, sim_periods: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Range(format!("period length must be positive, got {length}")));
        }
        if n < 16 {
            return Err(Error::Range(format!("grid needs at least 16 points per period, got {n}")));
        }
        if sim_periods < 2 || sim_periods % 2 != 0 {
            return Err(Error::Range(format!(
                "sim_periods must be an even integer >= 2, got {sim_periods}"
            )));
        }
        Ok(Grid { length, n, sim_periods })
    }

    /// Grid spacing `h = L / n`.
    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Coordinate of the i-th period node, `x_i = i h`.
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Number of points in the truncated simulation domain.
    pub fn sim_len(&self) -> usize {
        self.sim_periods * self.n
    }

    /// Left end of the simulation domain, `-(sim_periods/2) L`.
    pub fn sim_left(&self) -> f64 {
        -(self.sim_periods as f64 / 2.0) * self.length
    }

    /// Coordinate of the j-th simulation node.
    pub fn sim_node(&self, j: usize) -> f64 {
        self.sim_left() + j as f64 * self.spacing()
    }
}

/// Real-valued function on one period, sampled at the grid nodes.
/// Evaluation at arbitrary `x` wraps modulo `L` and interpolates linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicField {
    pub length: f64,
    pub values: Vec<f64>,
}

impl PeriodicField {
    pub fn new(length: f64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Range("periodic field needs at least one sample".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("periodic field contains non-finite value {v}")));
        }
        Ok(PeriodicField { length, values })
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        PeriodicField { length: grid.length, values: vec![value; grid.n] }
    }

    /// Sample an arbitrary function at the grid nodes.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n).map(|i| f(grid.node(i))).collect();
        PeriodicField { length: grid.length, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.values.len() as f64
    }

    /// Periodic evaluation with linear interpolation between nodes.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let h = self.spacing();
        let t = x.rem_euclid(self.length) / h;
        let i = (t.floor() as usize).min(n - 1);
        let frac = t - i as f64;
        let a = self.values[i];
        let b = self.values[(i + 1) % n];
        a + frac * (b - a)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise map into a new field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        PeriodicField { length: self.length, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.values.len(), other.values.len(), "field length mismatch");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        PeriodicField { length: self.length, values }
    }
}
