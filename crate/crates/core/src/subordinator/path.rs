use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bernstein::BernsteinSpec;
use super::sampler::{IncrementSampler, SamplerConfig};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rng::{Domain, Streams};

/// A subordinator sample path (or its regularisation) on a time grid, read
/// as a càdlàg step function: `ℓ_s = values[i]` for `s ∈ [t_i, t_{i+1})`.
///
/// Sampled paths run past the requested horizon so that the look-ahead
/// window of [`regularize`] is available; `horizon` is the index of the
/// requested final time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub epsilon: Option<f64>,
    pub horizon: usize,
}

impl SubordinatorPath {
    /// A raw path given by its values; the horizon is the last point.
    pub fn from_values(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::precondition("times and values must have equal length ≥ 2"));
        }
        TimeGrid::new(times.clone())?;
        if values.windows(2).any(|w| w[1] < w[0]) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition("subordinator values must be finite and nondecreasing"));
        }
        let horizon = times.len() - 1;
        Ok(Self {
            times,
            values,
            epsilon: None,
            horizon,
        })
    }

    /// Move the horizon to the last grid point ≤ `t`.
    pub fn with_horizon(mut self, t: f64) -> Self {
        self.horizon = match self.times.partition_point(|&s| s <= t * (1.0 + 1e-12) + 1e-15) {
            0 => 0,
            k => k - 1,
        };
        self
    }

    pub fn horizon_time(&self) -> f64 {
        self.times[self.horizon]
    }

    /// Times up to and including the horizon.
    pub fn horizon_times(&self) -> &[f64] {
        &self.times[..=self.horizon]
    }

    pub fn horizon_values(&self) -> &[f64] {
        &self.values[..=self.horizon]
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let k = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            k => k - 1,
        };
        self.values[k]
    }

    /// ℓ_{t_{i+1}} - ℓ_{t_i} for the intervals up to the horizon.
    pub fn increments(&self) -> Vec<f64> {
        self.values[..=self.horizon].windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Two-column CSV `t,value` up to the horizon.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,value")?;
        for (t, v) in self.horizon_times().iter().zip(self.horizon_values()) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }

    /// ∫_{t_0}^{x} ℓ_s ds for the step interpolation, given prefix sums.
    fn integral_to(&self, prefix: &[f64], x: f64) -> f64 {
        let k = match self.times.partition_point(|&s| s <= x) {
            0 => 0,
            k => (k - 1).min(self.times.len() - 1),
        };
        prefix[k] + self.values[k] * (x - self.times[k])
    }
}

/// Sample one path on `grid` extended by `config.extension`.
pub fn sample_path<R: Rng + ?Sized>(spec: &BernsteinSpec, grid: &TimeGrid, rng: &mut R) -> Result<SubordinatorPath> {
    let config = SamplerConfig::default();
    let sampler = IncrementSampler::new(spec, &config)?;
    sample_path_with(&sampler, grid, config.extension, rng)
}

pub fn sample_path_with<R: Rng + ?Sized>(
    sampler: &IncrementSampler,
    grid: &TimeGrid,
    extension: f64,
    rng: &mut R,
) -> Result<SubordinatorPath> {
    let horizon = grid.steps();
    let full = if extension > 0.0 { grid.extended(extension) } else { grid.clone() };
    let times = full.times().to_vec();
    let mut values = Vec::with_capacity(times.len());
    let mut s = 0.0;
    values.push(0.0);
    for w in times.windows(2) {
        s += sampler.sample(w[1] - w[0], rng)?;
        values.push(s);
    }
    Ok(SubordinatorPath {
        times,
        values,
        epsilon: None,
        horizon,
    })
}

/// `n` independent paths, path `i` drawn from stream `(SubordinatorPath, i)`.
pub fn sample_paths(
    spec: &BernsteinSpec,
    grid: &TimeGrid,
    config: &SamplerConfig,
    streams: &Streams,
    n: usize,
) -> Result<Vec<SubordinatorPath>> {
    let sampler = IncrementSampler::new(spec, config)?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(Domain::SubordinatorPath, i as u64);
            sample_path_with(&sampler, grid, config.extension, &mut rng)
        })
        .collect()
}

/// `ℓ^ε_t = (1/ε) ∫_t^{t+ε} ℓ_s ds + ε t` on the grid points up to the
/// horizon, integrating the step interpolation exactly.
pub fn regularize(path: &SubordinatorPath, eps: f64) -> Result<SubordinatorPath> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("epsilon must lie in (0,1), got {eps}")));
    }
    let last = *path.times.last().unwrap();
    let horizon_t = path.horizon_time();
    if horizon_t + eps > last * (1.0 + 1e-12) + 1e-14 {
        return Err(Error::precondition(format!(
            "path ends at {last} but regularisation needs data up to {}",
            horizon_t + eps
        )));
    }
    let mut prefix = Vec::with_capacity(path.times.len());
    prefix.push(0.0);
    for i in 0..path.times.len() - 1 {
        let p = prefix[i] + path.values[i] * (path.times[i + 1] - path.times[i]);
        prefix.push(p);
    }
    let times = path.horizon_times().to_vec();
    let values = times
        .iter()
        .map(|&t| {
            let hi = (t + eps).min(last);
            (path.integral_to(&prefix, hi) - path.integral_to(&prefix, t)) / eps + eps * t
        })
        .collect();
    let horizon = times.len() - 1;
    Ok(SubordinatorPath {
        times,
        values,
        epsilon: Some(eps),
        horizon,
    })
}

/// γ^ε_s: the time at which a strictly increasing path reaches level `s`,
/// interpolating linearly between grid points.
pub fn inverse_time(path: &SubordinatorPath, s: f64) -> Result<f64> {
    let v = path.horizon_values();
    let t = path.horizon_times();
    let (lo, hi) = (v[0], v[v.len() - 1]);
    if !(s >= lo && s <= hi) {
        return Err(Error::domain(format!("level {s} outside path range [{lo}, {hi}]")));
    }
    let k = v.partition_point(|&x| x <= s);
    if k == 0 {
        return Ok(t[0]);
    }
    let i = k - 1;
    if v[i] == s || i + 1 == v.len() {
        return Ok(t[i]);
    }
    let f = (s - v[i]) / (v[i + 1] - v[i]);
    Ok(t[i] + f * (t[i + 1] - t[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> TimeGrid {
        TimeGrid::uniform(1.0, 100).unwrap()
    }

    #[test]
    fn pure_drift_path_is_the_grid() {
        let mut rng = Streams::new(0).stream(Domain::Auxiliary, 0);
        let p = sample_path(&BernsteinSpec::PureDrift { drift: 1.0 }, &grid(), &mut rng).unwrap();
        for (t, v) in p.times.iter().zip(&p.values) {
            assert_relative_eq!(t, v, epsilon = 1e-12);
        }
        assert_eq!(p.horizon_time(), 1.0);
        assert!(p.times.last().unwrap() >= &2.0);
    }

    #[test]
    fn constant_path_regularizes_to_c_plus_eps_t() {
        let g = grid().extended(1.0);
        let c = 2.5;
        let p = SubordinatorPath::from_values(g.times().to_vec(), vec![c; g.len()])
            .unwrap()
            .with_horizon(1.0);
        let r = regularize(&p, 0.3).unwrap();
        for (t, v) in r.times.iter().zip(&r.values) {
            assert_relative_eq!(*v, c + 0.3 * t, epsilon = 1e-12);
        }
        assert_eq!(r.epsilon, Some(0.3));
    }

    #[test]
    fn linear_path_within_one_step() {
        let g = grid().extended(1.0);
        let p = SubordinatorPath::from_values(g.times().to_vec(), g.times().to_vec())
            .unwrap()
            .with_horizon(1.0);
        let eps = 0.25;
        let r = regularize(&p, eps).unwrap();
        for (t, v) in r.times.iter().zip(&r.values) {
            let exact = t + eps / 2.0 + eps * t;
            assert!((v - exact).abs() <= 0.01, "{t}: {v} vs {exact}");
        }
    }

    #[test]
    fn short_path_is_rejected() {
        let g = grid();
        let p = SubordinatorPath::from_values(g.times().to_vec(), vec![0.0; g.len()]).unwrap();
        assert!(matches!(regularize(&p, 0.1), Err(Error::Precondition(_))));
        let p = p.with_horizon(0.5);
        assert!(regularize(&p, 0.1).is_ok());
        assert!(regularize(&p, 1.0).is_err());
    }

    #[test]
    fn inverse_of_pure_drift_regularization() {
        let mut rng = Streams::new(0).stream(Domain::Auxiliary, 0);
        let p = sample_path(&BernsteinSpec::PureDrift { drift: 1.0 }, &grid(), &mut rng).unwrap();
        let eps = 0.2;
        let r = regularize(&p, eps).unwrap();
        let l0 = r.values[0];
        for t in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let s = l0 + (1.0 + eps) * t;
            assert!((inverse_time(&r, s).unwrap() - t).abs() < 1e-9);
        }
        assert!(inverse_time(&r, l0 - 1e-3).is_err());
        assert!(inverse_time(&r, r.values[100] + 1e-3).is_err());
    }

    #[test]
    fn csv_export() {
        let p = SubordinatorPath::from_values(vec![0.0, 0.5, 1.0], vec![0.0, 0.2, 0.9]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,value\n0,0\n0.5,0.2\n1,0.9\n");
    }

    #[test]
    fn parallel_paths_are_per_stream() {
        let spec = BernsteinSpec::stable(0.7);
        let streams = Streams::new(11);
        let cfg = SamplerConfig::default();
        let a = sample_paths(&spec, &grid(), &cfg, &streams, 8).unwrap();
        let b = sample_paths(&spec, &grid(), &cfg, &streams, 4).unwrap();
        assert_eq!(&a[..4], &b[..]);
        assert_ne!(a[0], a[1]);
    }
}
