//! Lévy triplets and driving-noise increments.
//!
//! A [`LevyTriplet`] is plain data; [`LevyNoise`] is its compiled form
//! (matrix square roots, jump tables). Increments are produced by a
//! [`NoiseStream`], which owns two child generators: one for the
//! subordinator / jump part and one for the Gaussian part. Batch sampling
//! ([`sample_increments`]) and step-by-step particle propagation both go
//! through it, so they see the same numbers for the same seed.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::quad;
use crate::rng::{split_pair, StreamRng};
use crate::subordinator::{BernsteinSpec, IncrementSampler, SamplerConfig, SubordinatorPath};

/// A Lévy measure on ℝ^d \ {0} usable for Lévy–Itô simulation.
pub trait JumpMeasure: Send + Sync {
    fn dim(&self) -> usize;
    fn density(&self, x: &[f64]) -> f64;
    /// ν({|x| ≥ δ})
    fn mass_above(&self, delta: f64) -> f64;
    /// Draw from ν restricted to {|x| ≥ δ}, normalised.
    fn sample_above(&self, delta: f64, rng: &mut dyn rand::RngCore, out: &mut [f64]) -> Result<()>;
    /// ∫_{|x|<δ} x xᵀ ν(dx), row-major d×d.
    fn small_jump_covariance(&self, delta: f64) -> Vec<f64>;
    /// ∫_{δ≤|x|<1} x ν(dx).
    fn compensator(&self, delta: f64) -> Vec<f64>;
    /// ∫ (1 ∧ |x|²) ν(dx)
    fn integrability(&self) -> f64;
}

/// Isotropic `c |x|^{-d-β} e^{-λ|x|}` with β ∈ (0, 2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotropicPowerJumps {
    pub dim: usize,
    pub c: f64,
    pub beta: f64,
    #[serde(default)]
    pub tempering: f64,
}

fn sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / quad::gamma(d as f64 / 2.0)
}

impl IsotropicPowerJumps {
    pub fn new(dim: usize, c: f64, beta: f64, tempering: f64) -> Result<Self> {
        if dim == 0 || !(c > 0.0) || !(beta > 0.0 && beta < 2.0) || !(tempering >= 0.0) {
            return Err(Error::domain(format!(
                "isotropic jumps need d ≥ 1, c > 0, β ∈ (0,2), λ ≥ 0 (got d={dim}, c={c}, β={beta}, λ={tempering})"
            )));
        }
        Ok(Self { dim, c, beta, tempering })
    }

    /// Density of the radius |x| on (0, ∞).
    fn radial(&self, r: f64) -> f64 {
        self.c * sphere_area(self.dim) * r.powf(-1.0 - self.beta) * (-self.tempering * r).exp()
    }

    /// ∫_a^b r^k · radial(r) dr
    fn radial_moment(&self, k: f64, a: f64, b: f64) -> f64 {
        if self.tempering == 0.0 {
            let e = k - self.beta;
            let s = self.c * sphere_area(self.dim);
            return if e.abs() < 1e-12 {
                s * (b / a).ln()
            } else if b.is_infinite() {
                -s * a.powf(e) / e
            } else {
                s * (b.powf(e) - a.powf(e)) / e
            };
        }
        let f = |r: f64| r.powf(k) * self.radial(r);
        if b.is_infinite() {
            quad::integrate_to_inf(f, a, 1e-13).value
        } else if a == 0.0 {
            quad::integrate_from_zero(f, b, 1e-14).value
        } else {
            quad::integrate(f, a, b, 1e-14).value
        }
    }
}

impl JumpMeasure for IsotropicPowerJumps {
    fn dim(&self) -> usize {
        self.dim
    }

    fn density(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return 0.0;
        }
        self.c * r.powf(-(self.dim as f64) - self.beta) * (-self.tempering * r).exp()
    }

    fn mass_above(&self, delta: f64) -> f64 {
        self.radial_moment(0.0, delta, f64::INFINITY)
    }

    fn sample_above(&self, delta: f64, rng: &mut dyn rand::RngCore, out: &mut [f64]) -> Result<()> {
        // Pareto radius, thinned by the tempering factor
        let mut tries = 0usize;
        let r = loop {
            let u: f64 = 1.0 - rng.random::<f64>();
            let r = delta * u.powf(-1.0 / self.beta);
            if self.tempering == 0.0 || rng.random::<f64>() < (-self.tempering * (r - delta)).exp() {
                break r;
            }
            tries += 1;
            if tries > 1_000_000 {
                return Err(Error::Sampler("tempered jump radius rejection cap".into()));
            }
        };
        let mut norm = 0.0;
        while norm == 0.0 {
            for o in out.iter_mut() {
                *o = StandardNormal.sample(rng);
            }
            norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        }
        for o in out.iter_mut() {
            *o *= r / norm;
        }
        Ok(())
    }

    fn small_jump_covariance(&self, delta: f64) -> Vec<f64> {
        let d = self.dim;
        let v = self.radial_moment(2.0, 0.0, delta) / d as f64;
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            m[i * d + i] = v;
        }
        m
    }

    fn compensator(&self, _delta: f64) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    fn integrability(&self) -> f64 {
        self.radial_moment(2.0, 0.0, 1.0) + self.radial_moment(0.0, 1.0, f64::INFINITY)
    }
}

/// Jump measures that can be named in a configuration file.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum JumpMeasureSpec {
    IsotropicPower(IsotropicPowerJumps),
    #[serde(skip)]
    Custom(Arc<dyn JumpMeasure>),
}

impl fmt::Debug for JumpMeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpMeasureSpec::IsotropicPower(j) => f.debug_tuple("IsotropicPower").field(j).finish(),
            JumpMeasureSpec::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl PartialEq for JumpMeasureSpec {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (JumpMeasureSpec::IsotropicPower(a), JumpMeasureSpec::IsotropicPower(b)) => a == b,
            (JumpMeasureSpec::Custom(a), JumpMeasureSpec::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl JumpMeasureSpec {
    fn measure(&self) -> Arc<dyn JumpMeasure> {
        match self {
            JumpMeasureSpec::IsotropicPower(j) => Arc::new(j.clone()),
            JumpMeasureSpec::Custom(m) => m.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JumpSpec {
    None,
    /// `W_{S_t}` for an independent subordinator S.
    SubordinateGaussian {
        subordinator: BernsteinSpec,
    },
    /// Lévy–Itô with jumps ≥ cutoff simulated exactly and smaller jumps
    /// replaced by a Gaussian with the same covariance.
    CompoundWithDensity {
        measure: JumpMeasureSpec,
        cutoff: f64,
    },
}

/// `(l, Q, ν_Z)`; `q` is row-major d×d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevyTriplet {
    pub l: Vec<f64>,
    pub q: Vec<f64>,
    pub jumps: JumpSpec,
}

impl LevyTriplet {
    pub fn zero(d: usize) -> Self {
        Self {
            l: vec![0.0; d],
            q: vec![0.0; d * d],
            jumps: JumpSpec::None,
        }
    }

    pub fn brownian(d: usize) -> Self {
        let mut q = vec![0.0; d * d];
        for i in 0..d {
            q[i * d + i] = 1.0;
        }
        Self {
            l: vec![0.0; d],
            q,
            jumps: JumpSpec::None,
        }
    }

    pub fn subordinate(d: usize, spec: BernsteinSpec) -> Self {
        Self {
            l: vec![0.0; d],
            q: vec![0.0; d * d],
            jumps: JumpSpec::SubordinateGaussian { subordinator: spec },
        }
    }

    pub fn dim(&self) -> usize {
        self.l.len()
    }

    /// ψ(u) with `E e^{i⟨u, Z_t⟩} = e^{-t ψ(u)}`.
    pub fn char_exponent(&self, u: &[f64]) -> Result<Complex64> {
        let d = self.dim();
        if u.len() != d {
            return Err(Error::domain("frequency has wrong dimension"));
        }
        let mut quad_form = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad_form += u[i] * self.q[i * d + j] * u[j];
            }
        }
        let lu: f64 = self.l.iter().zip(u).map(|(a, b)| a * b).sum();
        let mut psi = Complex64::new(0.5 * quad_form, -lu);
        let k = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        match &self.jumps {
            JumpSpec::None => {}
            JumpSpec::SubordinateGaussian { subordinator } => {
                if k > 0.0 {
                    psi += subordinator.laplace_exponent(0.5 * k * k)?;
                }
            }
            JumpSpec::CompoundWithDensity { measure, .. } => {
                let JumpMeasureSpec::IsotropicPower(j) = measure else {
                    return Err(Error::precondition("characteristic exponent needs a named jump measure"));
                };
                // ∫ (1 - cos⟨u,x⟩) ν(dx), radial form with the sphere average of cos
                let avg = |r: f64| -> f64 {
                    let z = k * r;
                    match j.dim {
                        1 => z.cos(),
                        2 => libm::j0(z),
                        3 => {
                            if z < 1e-8 {
                                1.0
                            } else {
                                z.sin() / z
                            }
                        }
                        _ => f64::NAN,
                    }
                };
                if j.dim > 3 {
                    return Err(Error::precondition("characteristic exponent implemented for d ≤ 3"));
                }
                if k > 0.0 {
                    let f = |r: f64| (1.0 - avg(r)) * j.radial(r);
                    let split = 1.0 / k;
                    let head = quad::integrate_from_zero(f, split, 1e-12).value;
                    // oscillatory tail: integrate period by period
                    let mut tail = 0.0;
                    let mut a = split;
                    let period = 2.0 * std::f64::consts::PI / k;
                    for _ in 0..20_000 {
                        let piece = quad::integrate(f, a, a + period, 1e-14).value;
                        tail += piece;
                        a += period;
                        if piece.abs() < 1e-15 * (head + tail).abs().max(1e-300) {
                            break;
                        }
                    }
                    let rest = j.radial_moment(0.0, a, f64::INFINITY);
                    psi += head + tail + rest;
                }
            }
        }
        Ok(psi)
    }
}

/// Realised increments of Z on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseIncrements {
    pub grid: TimeGrid,
    pub dim: usize,
    /// row-major (steps × d)
    pub dz: Vec<f64>,
    /// jumps with |x| ≥ 1 (for subordinate noise: intervals with |ΔZ| ≥ 1)
    pub large_jumps: Vec<(f64, Vec<f64>)>,
    /// the subordinator path behind a subordinate Brownian motion
    pub subordinator: Option<SubordinatorPath>,
}

impl NoiseIncrements {
    pub fn step(&self, i: usize) -> &[f64] {
        &self.dz[i * self.dim..(i + 1) * self.dim]
    }

    /// Z at the grid points, row-major (len × d).
    pub fn cumulative(&self) -> Vec<f64> {
        let d = self.dim;
        let mut z = vec![0.0; self.grid.len() * d];
        for i in 0..self.grid.steps() {
            for k in 0..d {
                z[(i + 1) * d + k] = z[i * d + k] + self.dz[i * d + k];
            }
        }
        z
    }

    /// CSV `t,dZ_1..dZ_d`, one row per interval, t its left end.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|k| format!("dZ_{k}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for i in 0..self.grid.steps() {
            let row: Vec<String> = self.step(i).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{}", self.grid.times()[i], row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone)]
enum CompiledJumps {
    None,
    Subordinate(IncrementSampler),
    Compound {
        measure: Arc<dyn JumpMeasure>,
        cutoff: f64,
        rate: f64,
        small_sqrt: Option<Vec<f64>>,
        compensator: Vec<f64>,
    },
}

/// A compiled triplet, ready to generate increments.
#[derive(Clone)]
pub struct LevyNoise {
    dim: usize,
    l: Vec<f64>,
    sqrt_q: Option<Vec<f64>>,
    jumps: CompiledJumps,
}

impl fmt::Debug for LevyNoise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevyNoise").field("dim", &self.dim).finish_non_exhaustive()
    }
}

/// Symmetric PSD square root (eigenvalues ≥ -1e-12 are clamped to 0).
pub fn psd_sqrt(m: &[f64], d: usize) -> Result<Vec<f64>> {
    let a = DMatrix::from_row_slice(d, d, m);
    if (&a - a.transpose()).abs().max() > 1e-12 * (1.0 + a.abs().max()) {
        return Err(Error::domain("covariance matrix is not symmetric"));
    }
    let eig = SymmetricEigen::new(a);
    if eig.eigenvalues.iter().any(|&l| l < -1e-12) {
        return Err(Error::domain(format!(
            "covariance matrix has negative eigenvalue {}",
            eig.eigenvalues.min()
        )));
    }
    let s = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    let r = &eig.eigenvectors * s * eig.eigenvectors.transpose();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = r[(i, j)];
        }
    }
    Ok(out)
}

impl LevyNoise {
    pub fn new(triplet: &LevyTriplet) -> Result<Self> {
        Self::with_config(triplet, &SamplerConfig::default())
    }

    pub fn with_config(triplet: &LevyTriplet, config: &SamplerConfig) -> Result<Self> {
        let d = triplet.dim();
        if d == 0 || triplet.q.len() != d * d {
            return Err(Error::domain("triplet dimensions are inconsistent"));
        }
        let sqrt_q = if triplet.q.iter().all(|&v| v == 0.0) {
            None
        } else {
            Some(psd_sqrt(&triplet.q, d)?)
        };
        let jumps = match &triplet.jumps {
            JumpSpec::None => CompiledJumps::None,
            JumpSpec::SubordinateGaussian { subordinator } => CompiledJumps::Subordinate(IncrementSampler::new(subordinator, config)?),
            JumpSpec::CompoundWithDensity { measure, cutoff } => {
                let measure = measure.measure();
                if measure.dim() != d {
                    return Err(Error::domain("jump measure dimension differs from triplet"));
                }
                if !(*cutoff > 0.0 && *cutoff <= 1.0) {
                    return Err(Error::domain("small-jump cutoff must lie in (0,1]"));
                }
                let integ = measure.integrability();
                if !integ.is_finite() {
                    return Err(Error::Assumption {
                        assumption: "levy_integrability",
                        detail: format!("∫(1∧|x|²)ν(dx) = {integ}"),
                    });
                }
                let cov = measure.small_jump_covariance(*cutoff);
                let small_sqrt = if cov.iter().all(|&v| v == 0.0) {
                    None
                } else {
                    Some(psd_sqrt(&cov, d)?)
                };
                CompiledJumps::Compound {
                    rate: measure.mass_above(*cutoff),
                    compensator: measure.compensator(*cutoff),
                    cutoff: *cutoff,
                    small_sqrt,
                    measure,
                }
            }
        };
        Ok(Self {
            dim: d,
            l: triplet.l.clone(),
            sqrt_q,
            jumps,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_subordinate(&self) -> bool {
        matches!(self.jumps, CompiledJumps::Subordinate(_))
    }

    /// A per-path generator; `rng` is consumed only to seed two children.
    pub fn stream(&self, rng: &mut StreamRng) -> NoiseStream<'_> {
        let (jump_rng, gauss_rng) = split_pair(rng);
        NoiseStream {
            noise: self,
            jump_rng,
            gauss_rng,
            scratch: vec![0.0; self.dim],
        }
    }
}

pub struct NoiseStream<'a> {
    noise: &'a LevyNoise,
    jump_rng: StreamRng,
    gauss_rng: StreamRng,
    scratch: Vec<f64>,
}

impl NoiseStream<'_> {
    /// Write Z_{t+dt} - Z_t into `out`. Returns the subordinator increment
    /// for subordinate noise, `dt` otherwise.
    pub fn next_increment(&mut self, t: f64, dt: f64, out: &mut [f64], mut large: Option<&mut Vec<(f64, Vec<f64>)>>) -> Result<f64> {
        let n = self.noise;
        let d = n.dim;
        for (o, l) in out.iter_mut().zip(&n.l) {
            *o = l * dt;
        }
        if let Some(s) = &n.sqrt_q {
            add_gaussian(s, d, dt, &mut self.gauss_rng, &mut self.scratch, out);
        }
        match &n.jumps {
            CompiledJumps::None => Ok(dt),
            CompiledJumps::Subordinate(sampler) => {
                let ds = sampler.sample(dt, &mut self.jump_rng)?;
                let sd = ds.sqrt();
                let mut norm2 = 0.0;
                for o in out.iter_mut() {
                    let g: f64 = StandardNormal.sample(&mut self.gauss_rng);
                    *o += sd * g;
                    norm2 += (sd * g) * (sd * g);
                }
                if norm2 >= 1.0 {
                    if let Some(log) = large.as_deref_mut() {
                        log.push((t + dt, out.to_vec()));
                    }
                }
                Ok(ds)
            }
            CompiledJumps::Compound {
                measure,
                cutoff,
                rate,
                small_sqrt,
                compensator,
            } => {
                for (o, c) in out.iter_mut().zip(compensator) {
                    *o -= c * dt;
                }
                if let Some(s) = small_sqrt {
                    add_gaussian(s, d, dt, &mut self.gauss_rng, &mut self.scratch, out);
                }
                let count = if rate * dt > 0.0 {
                    let p = Poisson::new(rate * dt).map_err(|e| Error::Sampler(format!("poisson: {e}")))?;
                    let k: f64 = p.sample(&mut self.jump_rng);
                    k as u64
                } else {
                    0
                };
                let mut jump = vec![0.0; d];
                for _ in 0..count {
                    measure.sample_above(*cutoff, &mut self.jump_rng, &mut jump)?;
                    for (o, j) in out.iter_mut().zip(&jump) {
                        *o += j;
                    }
                    if jump.iter().map(|v| v * v).sum::<f64>() >= 1.0 {
                        if let Some(log) = large.as_deref_mut() {
                            log.push((t + dt, jump.clone()));
                        }
                    }
                }
                Ok(dt)
            }
        }
    }
}

fn add_gaussian<R: Rng>(sqrt: &[f64], d: usize, dt: f64, rng: &mut R, scratch: &mut [f64], out: &mut [f64]) {
    let sd = dt.sqrt();
    for s in scratch.iter_mut() {
        *s = StandardNormal.sample(rng);
    }
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..d {
            acc += sqrt[i * d + j] * scratch[j];
        }
        out[i] += sd * acc;
    }
}

/// Increments of Z on a uniform grid.
pub fn sample_increments(triplet: &LevyTriplet, grid: &TimeGrid, rng: &mut StreamRng) -> Result<NoiseIncrements> {
    if let JumpSpec::SubordinateGaussian { subordinator } = &triplet.jumps {
        if triplet.l.iter().chain(&triplet.q).all(|&v| v == 0.0) {
            return subordinate_bm_increments(subordinator, triplet.dim(), grid, rng);
        }
    }
    if !grid.is_uniform() {
        return Err(Error::precondition("sample_increments needs a uniform grid"));
    }
    let noise = LevyNoise::new(triplet)?;
    sample_with(&noise, grid, rng)
}

/// Increments of `W_{S_t}` in ℝ^d together with the underlying path of S
/// (extended past the grid by the default window).
pub fn subordinate_bm_increments(spec: &BernsteinSpec, d: usize, grid: &TimeGrid, rng: &mut StreamRng) -> Result<NoiseIncrements> {
    let noise = LevyNoise::new(&LevyTriplet::subordinate(d, spec.clone()))?;
    sample_with(&noise, grid, rng)
}

/// Drive a compiled noise over a grid.
pub fn sample_with(noise: &LevyNoise, grid: &TimeGrid, rng: &mut StreamRng) -> Result<NoiseIncrements> {
    let d = noise.dim;
    let mut stream = noise.stream(rng);
    let mut dz = vec![0.0; grid.steps() * d];
    let mut large = Vec::new();
    let mut ell = Vec::with_capacity(grid.len());
    ell.push(0.0);
    let times = grid.times();
    for i in 0..grid.steps() {
        let ds = stream.next_increment(times[i], grid.dt(i), &mut dz[i * d..(i + 1) * d], Some(&mut large))?;
        ell.push(ell[i] + ds);
    }
    let subordinator = match &noise.jumps {
        CompiledJumps::Subordinate(sampler) => {
            // continue S past the horizon from the same jump stream
            let full = grid.extended(SamplerConfig::default().extension);
            let mut values = ell;
            let ft = full.times();
            for i in grid.steps()..full.steps() {
                let v = values[i] + sampler.sample(ft[i + 1] - ft[i], &mut stream.jump_rng)?;
                values.push(v);
            }
            Some(SubordinatorPath {
                times: ft.to_vec(),
                values,
                epsilon: None,
                horizon: grid.steps(),
            })
        }
        _ => None,
    };
    Ok(NoiseIncrements {
        grid: grid.clone(),
        dim: d,
        dz,
        large_jumps: large,
        subordinator,
    })
}
