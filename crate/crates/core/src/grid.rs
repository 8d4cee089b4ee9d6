use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing time points starting at 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::precondition("time grid needs at least two points"));
        }
        if times[0] != 0.0 {
            return Err(Error::precondition("time grid must start at 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::precondition("time grid must be strictly increasing and finite"));
        }
        Ok(Self { times })
    }

    /// `n` equal steps on [0, t_end].
    pub fn uniform(t_end: f64, n: usize) -> Result<Self> {
        if !(t_end > 0.0) || n == 0 {
            return Err(Error::precondition("uniform grid needs t_end > 0 and n ≥ 1"));
        }
        let dt = t_end / n as f64;
        let mut times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        times[n] = t_end;
        Ok(Self { times })
    }

    /// Uniform grid with step close to `dt` ending exactly at `t_end`.
    pub fn with_step(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::precondition("step must be positive"));
        }
        let n = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
        Self::uniform(t_end, n)
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

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn dt(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    pub fn is_uniform(&self) -> bool {
        let h = self.dt(0);
        (1..self.steps()).all(|i| (self.dt(i) - h).abs() <= 1e-9 * h.max(1.0))
    }

    /// Index of the last grid point ≤ t.
    pub fn locate(&self, t: f64) -> usize {
        match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            k => k - 1,
        }
    }

    /// Extend with steps of the last spacing until `t_end + extra` is covered.
    pub fn extended(&self, extra: f64) -> TimeGrid {
        let h = self.dt(self.steps() - 1);
        let target = self.t_end() + extra;
        let mut times = self.times.clone();
        let mut k = 1usize;
        let base = self.t_end();
        while *times.last().unwrap() < target - 1e-12 * target.max(1.0) {
            times.push(base + k as f64 * h);
            k += 1;
        }
        TimeGrid { times }
    }
}
