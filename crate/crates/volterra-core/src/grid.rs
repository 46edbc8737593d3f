//! Uniform time grid.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform grid t_i = i * dt, i = 0..=n_steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if dt <= 0.0 || n_steps == 0 {
            return Err(Error::InvalidParams(format!(
                "grid needs dt > 0 and n_steps > 0 (dt = {dt}, n_steps = {n_steps})"
            )));
        }
        Ok(TimeGrid { dt, n_steps })
    }

    /// Grid covering [0, horizon] with the given dt (horizon rounded to a
    /// whole number of cells).
    pub fn with_horizon(dt: f64, horizon: f64) -> Result<Self> {
        let n = (horizon / dt).round() as usize;
        if n == 0 || ((n as f64) * dt - horizon).abs() > 1e-9 * horizon {
            return Err(Error::InvalidParams(format!(
                "horizon {horizon} is not a whole number of dt = {dt} cells"
            )));
        }
        Self::new(dt, n)
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.dt * i as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|i| self.node(i))
    }

    /// Index of a grid node, or GridMismatch.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let i = (t / self.dt).round();
        if i < 0.0 || i > self.n_steps as f64 || (i * self.dt - t).abs() > 1e-9 * self.dt.max(t) {
            return Err(Error::GridMismatch(t));
        }
        Ok(i as usize)
    }
}
