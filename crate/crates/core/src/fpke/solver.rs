use std::io::Write;

use serde::{Deserialize, Serialize};

use super::operator::{FracLaplacian, Grid1D};
use crate::error::{Error, Result};
use crate::mkv::{InitialLaw, LawSummary, MkvDrift};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub values: Vec<f64>,
    pub time: f64,
}

impl DensityField {
    pub fn mass(&self, dx: f64) -> f64 {
        self.values.iter().sum::<f64>() * dx
    }

    pub fn write_csv<W: Write>(&self, grid: &Grid1D, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,u")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", grid.x(i), v)?;
        }
        Ok(())
    }

    /// `n` points at the quantiles (k + ½)/n of the normalised grid CDF,
    /// interpolating linearly inside cells.
    pub fn quantile_points(&self, grid: &Grid1D, n: usize) -> Vec<f64> {
        let mass = self.mass(grid.dx);
        let mut out = Vec::with_capacity(n);
        let mut cdf = 0.0;
        let mut i = 0;
        for k in 0..n {
            let q = (k as f64 + 0.5) / n as f64 * mass;
            while i < grid.n && cdf + self.values[i] * grid.dx < q {
                cdf += self.values[i] * grid.dx;
                i += 1;
            }
            if i == grid.n {
                out.push(grid.l);
                continue;
            }
            let cell = self.values[i] * grid.dx;
            let frac = if cell > 0.0 { (q - cdf) / cell } else { 0.5 };
            out.push(-grid.l + (i as f64 + frac) * grid.dx);
        }
        out
    }

    /// Mean and θ-moment of the normalised density, served to the drift.
    pub fn summary(&self, grid: &Grid1D, theta: f64) -> LawSummary {
        let mass = self.mass(grid.dx);
        let (mut m, mut mt) = (0.0, 0.0);
        for (i, v) in self.values.iter().enumerate() {
            let x = grid.x(i);
            m += x * v;
            mt += x.abs().powf(theta) * v;
        }
        LawSummary {
            mean: vec![m * grid.dx / mass],
            theta_moment: mt * grid.dx / mass,
        }
    }
}

/// Cell averages of a Gaussian density.
pub fn gaussian_density(grid: &Grid1D, mean: f64, std: f64) -> DensityField {
    let cdf = |x: f64| 0.5 * libm::erfc(-(x - mean) / (std * std::f64::consts::SQRT_2));
    let values = (0..grid.n)
        .map(|i| {
            let x = grid.x(i);
            (cdf(x + 0.5 * grid.dx) - cdf(x - 0.5 * grid.dx)) / grid.dx
        })
        .collect();
    DensityField { values, time: 0.0 }
}

/// Grid density of a one-dimensional initial law; point masses become
/// Gaussians of width 3 dx.
pub fn initial_density(grid: &Grid1D, law: &InitialLaw) -> Result<DensityField> {
    law.validate()?;
    if law.dim() != 1 {
        return Err(Error::precondition("the grid solver is one-dimensional"));
    }
    Ok(match law {
        InitialLaw::PointMass { x } => gaussian_density(grid, x[0], 3.0 * grid.dx),
        InitialLaw::Gaussian { mean, std } => gaussian_density(grid, mean[0], *std),
        InitialLaw::UniformBox { lo, hi } => {
            let (a, b) = (lo[0], hi[0]);
            let values = (0..grid.n)
                .map(|i| {
                    let (l, r) = (grid.x(i) - 0.5 * grid.dx, grid.x(i) + 0.5 * grid.dx);
                    (r.min(b) - l.max(a)).max(0.0) / (b - a) / grid.dx
                })
                .collect();
            DensityField { values, time: 0.0 }
        }
        InitialLaw::Samples { points, .. } => {
            let mut values = vec![0.0; grid.n];
            let w = 1.0 / (points.len() as f64 * grid.dx);
            for &p in points {
                let i = ((p + grid.l) / grid.dx).floor();
                if i >= 0.0 && (i as usize) < grid.n {
                    values[i as usize] += w;
                }
            }
            DensityField { values, time: 0.0 }
        }
    })
}

/// Per-step bookkeeping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    /// mass that jumped past ±L
    pub jump_leak: f64,
    /// mass that the drift carried past ±L
    pub drift_leak: f64,
    /// negative mass removed by clipping
    pub clipped: f64,
}

/// Explicit Euler solver for `∂u = -(−Δ/2)^α u - ∂_x(b(t, x, u) u)`.
#[derive(Clone, Debug)]
pub struct FpkeSolver<'a> {
    pub op: FracLaplacian,
    pub drift: Option<&'a MkvDrift>,
    /// switch the jump part off to test transport alone
    pub jumps: bool,
}

impl<'a> FpkeSolver<'a> {
    pub fn new(grid: &Grid1D, drift: Option<&'a MkvDrift>) -> Result<Self> {
        if let Some(d) = drift {
            if d.dim != 1 {
                return Err(Error::precondition("the grid solver is one-dimensional"));
            }
        }
        Ok(Self {
            op: FracLaplacian::new(grid)?,
            drift,
            jumps: true,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.op.grid
    }

    fn cell_drift(&self, u: &DensityField) -> Vec<f64> {
        let g = self.grid();
        let Some(drift) = self.drift else {
            return vec![0.0; g.n];
        };
        let law = u.summary(g, drift.theta);
        let mut out = [0.0];
        (0..g.n)
            .map(|i| {
                drift.eval(u.time, &[g.x(i)], &law, &mut out);
                out[0]
            })
            .collect()
    }

    /// Largest stable step for the current state.
    pub fn cap(&self, u: &DensityField) -> f64 {
        let g = self.grid();
        let bmax = self.cell_drift(u).iter().fold(0.0f64, |m, b| m.max(b.abs()));
        let jump = if self.jumps { g.jump_cap() } else { f64::INFINITY };
        let transport = if bmax > 0.0 { 0.5 * g.dx / bmax } else { f64::INFINITY };
        jump.min(transport)
    }

    /// One step of size `dt`; fails when `dt` exceeds the stability cap.
    pub fn step(&self, u: &DensityField, dt: f64) -> Result<(DensityField, StepStats)> {
        let g = self.grid();
        if dt == 0.0 {
            return Ok((u.clone(), StepStats::default()));
        }
        let cap = self.cap(u);
        if dt > cap * (1.0 + 1e-12) {
            return Err(Error::precondition(format!("time step {dt} exceeds the stability cap {cap}")));
        }
        let n = g.n;
        let mut stats = StepStats::default();
        let mut next = u.values.clone();
        if self.jumps {
            let lu = self.op.apply(&u.values);
            let total: f64 = lu.iter().sum::<f64>() * g.dx;
            stats.jump_leak = -total * dt;
            for (v, l) in next.iter_mut().zip(&lu) {
                *v += dt * l;
            }
        }
        if self.drift.is_some() {
            // donor cell: each cell ships mass at its own velocity
            let b = self.cell_drift(u);
            let mut flux = vec![0.0; n + 1];
            for i in 0..n {
                let f = b[i] * u.values[i];
                if b[i] > 0.0 {
                    flux[i + 1] += f;
                } else {
                    flux[i] += f;
                }
            }
            stats.drift_leak = dt * (flux[n] - flux[0]);
            for i in 0..n {
                next[i] -= dt / g.dx * (flux[i + 1] - flux[i]);
            }
        }
        let neg: f64 = next.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
        if neg > 0.0 {
            let pos: f64 = next.iter().filter(|v| **v > 0.0).sum();
            let scale = if pos > 0.0 { (pos - neg) / pos } else { 0.0 };
            for v in next.iter_mut() {
                *v = if *v > 0.0 { *v * scale } else { 0.0 };
            }
            stats.clipped = neg * g.dx;
        }
        Ok((
            DensityField {
                values: next,
                time: u.time + dt,
            },
            stats,
        ))
    }

    /// Evolve to `t_end` with steps of at most `grid.dt`, shortened to the
    /// stability cap when the drift demands it, recording the field at
    /// each time in `checkpoints`.
    pub fn solve(&self, u0: &DensityField, t_end: f64, checkpoints: &[f64]) -> Result<FpkeRun> {
        let g = self.grid();
        let mut u = u0.clone();
        let mass0 = u.mass(g.dx);
        let mut run = FpkeRun {
            snapshots: vec![],
            jump_leak: 0.0,
            drift_leak: 0.0,
            max_clipped: 0.0,
            steps: 0,
            initial_mass: mass0,
        };
        let mut marks: Vec<f64> = checkpoints.iter().copied().filter(|&t| t >= u.time && t <= t_end).collect();
        marks.push(t_end);
        marks.sort_by(f64::total_cmp);
        marks.dedup();
        for &target in &marks {
            while u.time < target - 1e-12 {
                let dt = g.dt.min(self.cap(&u)).min(target - u.time);
                let (next, s) = self.step(&u, dt)?;
                run.jump_leak += s.jump_leak;
                run.drift_leak += s.drift_leak;
                run.max_clipped = run.max_clipped.max(s.clipped);
                run.steps += 1;
                u = next;
            }
            u.time = target;
            run.snapshots.push(u.clone());
        }
        Ok(run)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpkeRun {
    /// fields at the requested checkpoints, ending with T
    pub snapshots: Vec<DensityField>,
    pub jump_leak: f64,
    pub drift_leak: f64,
    pub max_clipped: f64,
    pub steps: usize,
    pub initial_mass: f64,
}

impl FpkeRun {
    pub fn terminal(&self) -> &DensityField {
        self.snapshots.last().unwrap()
    }

    pub fn total_leak(&self) -> f64 {
        self.jump_leak + self.drift_leak
    }
}
