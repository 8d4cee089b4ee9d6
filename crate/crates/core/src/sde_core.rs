//! Euler stepping for `dX = b(t, X) dt + σ(t) dZ`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::levy_noise::{sample_with, LevyNoise, NoiseIncrements};
use crate::rng::{Domain, Streams};

/// States with |X| beyond this are treated as divergence.
pub const OVERFLOW_GUARD: f64 = 1e12;

type VecField = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A distribution-free drift with its one-sided Lipschitz modulus κ(t):
/// `2⟨b(t,x) - b(t,y), x - y⟩ ≤ κ(t)|x - y|²`.
#[derive(Clone)]
pub struct DriftField {
    pub dim: usize,
    b: Arc<VecField>,
    kappa: Arc<ScalarFn>,
    b0_bound: Arc<ScalarFn>,
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftField").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl DriftField {
    pub fn new(
        dim: usize,
        b: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        kappa: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b0_bound: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            b: Arc::new(b),
            kappa: Arc::new(kappa),
            b0_bound: Arc::new(b0_bound),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, |_, _, out| out.fill(0.0), |_| 0.0, |_| 0.0)
    }

    /// `b(x) = -βx`
    pub fn ou(dim: usize, beta: f64) -> Self {
        Self::new(
            dim,
            move |_, x, out| {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = -beta * v;
                }
            },
            move |_| -2.0 * beta,
            |_| 0.0,
        )
    }

    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.b)(t, x, out)
    }

    pub fn kappa(&self, t: f64) -> f64 {
        (self.kappa)(t)
    }

    pub fn b0_bound(&self, t: f64) -> f64 {
        (self.b0_bound)(t)
    }

    /// Spot-check the one-sided Lipschitz condition on `n` random triples
    /// from `[0, t_max] × [-r, r]^d × [-r, r]^d`. Returns the worst excess.
    pub fn check_monotonicity<R: Rng + ?Sized>(&self, n: usize, t_max: f64, r: f64, rng: &mut R) -> Result<f64> {
        let d = self.dim;
        let (mut x, mut y, mut bx, mut by) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..n {
            let t = t_max * rng.random::<f64>();
            for k in 0..d {
                x[k] = r * (2.0 * rng.random::<f64>() - 1.0);
                y[k] = r * (2.0 * rng.random::<f64>() - 1.0);
            }
            self.eval(t, &x, &mut bx);
            self.eval(t, &y, &mut by);
            let mut lhs = 0.0;
            let mut dist2 = 0.0;
            for k in 0..d {
                lhs += 2.0 * (bx[k] - by[k]) * (x[k] - y[k]);
                dist2 += (x[k] - y[k]).powi(2);
            }
            let excess = lhs - self.kappa(t) * dist2;
            worst = worst.max(excess);
            if excess > 1e-9 {
                return Err(Error::Assumption {
                    assumption: "one_sided_lipschitz",
                    detail: format!("2<b(x)-b(y),x-y> exceeds κ|x-y|² by {excess:e} at t={t}, x={x:?}, y={y:?}"),
                });
            }
            self.eval(t, &vec![0.0; d], &mut bx);
            let b0 = bx.iter().map(|v| v * v).sum::<f64>().sqrt();
            if b0 > self.b0_bound(t) + 1e-9 {
                return Err(Error::Assumption {
                    assumption: "drift_at_origin",
                    detail: format!("|b(t,0)| = {b0} exceeds bound {} at t={t}", self.b0_bound(t)),
                });
            }
        }
        Ok(worst)
    }
}

/// Fills a row-major d×d matrix with σ(t).
pub type SigmaFn = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// The diffusion coefficient σ(t).
#[derive(Clone)]
pub enum Sigma {
    Scalar(f64),
    /// row-major d×d
    Matrix(Vec<f64>),
    TimeVarying(SigmaFn),
}

impl fmt::Debug for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma::Scalar(s) => write!(f, "Scalar({s})"),
            Sigma::Matrix(m) => write!(f, "Matrix({m:?})"),
            Sigma::TimeVarying(_) => f.write_str("TimeVarying(..)"),
        }
    }
}

impl Sigma {
    pub fn identity() -> Self {
        Sigma::Scalar(1.0)
    }

    /// σ(t) as a row-major d×d matrix.
    pub fn matrix(&self, t: f64, d: usize) -> Vec<f64> {
        match self {
            Sigma::Scalar(s) => {
                let mut m = vec![0.0; d * d];
                for i in 0..d {
                    m[i * d + i] = *s;
                }
                m
            }
            Sigma::Matrix(m) => m.clone(),
            Sigma::TimeVarying(f) => {
                let mut m = vec![0.0; d * d];
                f(t, &mut m);
                m
            }
        }
    }

    /// out += σ(t) dz
    #[inline]
    pub fn apply_add(&self, t: f64, dz: &[f64], out: &mut [f64]) {
        match self {
            Sigma::Scalar(s) => {
                for (o, z) in out.iter_mut().zip(dz) {
                    *o += s * z;
                }
            }
            _ => {
                let d = dz.len();
                let m = self.matrix(t, d);
                for i in 0..d {
                    let mut acc = 0.0;
                    for j in 0..d {
                        acc += m[i * d + j] * dz[j];
                    }
                    out[i] += acc;
                }
            }
        }
    }

    /// out = σ(t)^{-1} v
    pub fn solve(&self, t: f64, v: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Sigma::Scalar(s) => {
                if *s == 0.0 {
                    return Err(Error::domain("σ is singular"));
                }
                for (o, x) in out.iter_mut().zip(v) {
                    *o = x / s;
                }
                Ok(())
            }
            _ => {
                let d = v.len();
                let m = DMatrix::from_row_slice(d, d, &self.matrix(t, d));
                let lu = m.lu();
                let sol = lu
                    .solve(&nalgebra::DVector::from_column_slice(v))
                    .ok_or_else(|| Error::domain(format!("σ({t}) is singular")))?;
                out.copy_from_slice(sol.as_slice());
                Ok(())
            }
        }
    }

    /// ‖σ(t)^{-1}‖ (operator norm).
    pub fn inverse_norm(&self, t: f64, d: usize) -> Result<f64> {
        match self {
            Sigma::Scalar(s) if *s != 0.0 => Ok(1.0 / s.abs()),
            Sigma::Scalar(_) => Err(Error::domain("σ is singular")),
            _ => {
                let m = DMatrix::from_row_slice(d, d, &self.matrix(t, d));
                let sv = m.singular_values();
                let smin = sv.min();
                if smin <= 0.0 {
                    return Err(Error::domain(format!("σ({t}) is singular")));
                }
                Ok(1.0 / smin)
            }
        }
    }
}

/// One Euler step `x ← x + b dt + σ(t) dz`, with `b` already evaluated.
/// Shared by every solver so that particle and single-path runs agree
/// bit for bit.
#[inline]
pub fn euler_update(x: &mut [f64], b: &[f64], dt: f64, sigma: &Sigma, t: f64, dz: &[f64]) {
    for (xi, bi) in x.iter_mut().zip(b) {
        *xi += bi * dt;
    }
    sigma.apply_add(t, dz, x);
}

#[inline]
pub fn check_finite(x: &[f64], step: usize, time: f64) -> Result<()> {
    let bad = x.iter().any(|v| !v.is_finite() || v.abs() > OVERFLOW_GUARD);
    if bad {
        return Err(Error::Divergence {
            step,
            time,
            detail: format!("state {x:?} left the finite range"),
        });
    }
    Ok(())
}

/// A single solution path, row-major (len × d).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub grid: TimeGrid,
    pub dim: usize,
    pub states: Vec<f64>,
}

impl Path {
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.grid.steps())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|k| format!("x_{k}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for (i, t) in self.grid.times().iter().enumerate() {
            let row: Vec<String> = self.state(i).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{t},{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn euler_solve(drift: &DriftField, sigma: &Sigma, noise: &NoiseIncrements, x0: &[f64]) -> Result<Path> {
    let d = x0.len();
    if noise.dim != d || drift.dim != d {
        return Err(Error::precondition("dimension mismatch between drift, noise and x0"));
    }
    let grid = &noise.grid;
    let times = grid.times();
    let mut states = Vec::with_capacity(grid.len() * d);
    states.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut b = vec![0.0; d];
    for i in 0..grid.steps() {
        drift.eval(times[i], &x, &mut b);
        euler_update(&mut x, &b, grid.dt(i), sigma, times[i], noise.step(i));
        check_finite(&x, i + 1, times[i + 1])?;
        states.extend_from_slice(&x);
    }
    Ok(Path {
        grid: grid.clone(),
        dim: d,
        states,
    })
}

/// Many independent paths; path `i` draws its noise from stream
/// `(Particle, i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub dim: usize,
    pub n_paths: usize,
    /// paths × len × d
    pub states: Vec<f64>,
    pub seed: u64,
}

impl PathBundle {
    pub fn path(&self, p: usize) -> &[f64] {
        let len = self.grid.len() * self.dim;
        &self.states[p * len..(p + 1) * len]
    }

    pub fn terminal(&self) -> Vec<f64> {
        let d = self.dim;
        let last = self.grid.steps();
        (0..self.n_paths)
            .flat_map(|p| self.path(p)[last * d..(last + 1) * d].to_vec())
            .collect()
    }
}

pub fn simulate_bundle(
    drift: &DriftField,
    sigma: &Sigma,
    noise: &LevyNoise,
    x0: &[f64],
    grid: &TimeGrid,
    streams: &Streams,
    n_paths: usize,
) -> Result<PathBundle> {
    let paths: Vec<Path> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = streams.stream(Domain::Particle, p as u64);
            let inc = sample_with(noise, grid, &mut rng)?;
            euler_solve(drift, sigma, &inc, x0)
        })
        .collect::<Result<_>>()?;
    let mut states = Vec::with_capacity(n_paths * grid.len() * x0.len());
    for p in &paths {
        states.extend_from_slice(&p.states);
    }
    Ok(PathBundle {
        grid: grid.clone(),
        dim: x0.len(),
        n_paths,
        states,
        seed: streams.master_seed(),
    })
}

/// Monte Carlo estimate of `E sup_{s ≤ T} |X_s|^θ` (max over grid points).
pub fn sup_moment(bundle: &PathBundle, theta: f64) -> f64 {
    if bundle.n_paths == 0 {
        return 0.0;
    }
    let d = bundle.dim;
    let total: f64 = (0..bundle.n_paths)
        .map(|p| {
            bundle
                .path(p)
                .chunks(d)
                .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt().powf(theta))
                .fold(0.0, f64::max)
        })
        .sum();
    total / bundle.n_paths as f64
}
