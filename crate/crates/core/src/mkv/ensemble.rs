use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::drift::{Law, LawSummary};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rng::{Domain, Streams};

/// N equally weighted points in ℝ^d, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub dim: usize,
    pub points: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::domain("ensemble needs N ≥ 1 points of a fixed dimension"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("ensemble coordinates must be finite"));
        }
        Ok(Self { dim, points })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Points sorted by first coordinate (the optimal 1-D pairing order).
    pub fn sorted(&self) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.point(a)[0].total_cmp(&self.point(b)[0]));
        Self {
            dim: self.dim,
            points: idx.iter().flat_map(|&i| self.point(i).to_vec()).collect(),
        }
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let n = self.len() as f64;
        self.points
            .chunks(self.dim)
            .map(|p| p.iter().zip(&m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum::<f64>()
            / n
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|k| format!("x_{k}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for p in self.points.chunks(self.dim) {
            let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

impl Law for ParticleEnsemble {
    fn dim(&self) -> usize {
        self.dim
    }

    fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.points.chunks(self.dim) {
            for (a, b) in m.iter_mut().zip(p) {
                *a += b;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    fn abs_moment(&self, theta: f64) -> f64 {
        let s: f64 = self
            .points
            .chunks(self.dim)
            .map(|p| {
                let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                if theta == 1.0 {
                    r
                } else {
                    r.powf(theta)
                }
            })
            .sum();
        s / self.len() as f64
    }
}

/// Initial laws that can be sampled into ensembles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialLaw {
    PointMass {
        x: Vec<f64>,
    },
    /// isotropic Gaussian
    Gaussian {
        mean: Vec<f64>,
        std: f64,
    },
    UniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// a fixed sample set, e.g. loaded from a file; cycled if N exceeds it
    Samples {
        dim: usize,
        points: Vec<f64>,
    },
}

impl InitialLaw {
    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::PointMass { x } => x.len(),
            InitialLaw::Gaussian { mean, .. } => mean.len(),
            InitialLaw::UniformBox { lo, .. } => lo.len(),
            InitialLaw::Samples { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitialLaw::Gaussian { std, .. } if !(*std >= 0.0) => Err(Error::domain("Gaussian std must be ≥ 0")),
            InitialLaw::UniformBox { lo, hi } if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a <= b)) => {
                Err(Error::domain("uniform box needs lo ≤ hi componentwise"))
            }
            InitialLaw::Samples { dim, points } if *dim == 0 || points.is_empty() || points.len() % dim != 0 => {
                Err(Error::domain("sample set is empty or ragged"))
            }
            _ if self.dim() == 0 => Err(Error::domain("initial law has dimension 0")),
            _ => Ok(()),
        }
    }

    /// N particles; particle i draws from stream `(InitialLaw, i)`.
    pub fn sample(&self, n: usize, streams: &Streams) -> Result<ParticleEnsemble> {
        self.validate()?;
        let d = self.dim();
        let mut pts = Vec::with_capacity(n * d);
        for i in 0..n {
            let mut rng = streams.stream(Domain::InitialLaw, i as u64);
            match self {
                InitialLaw::PointMass { x } => pts.extend_from_slice(x),
                InitialLaw::Gaussian { mean, std } => {
                    for m in mean {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        pts.push(m + std * z);
                    }
                }
                InitialLaw::UniformBox { lo, hi } => {
                    for (a, b) in lo.iter().zip(hi) {
                        pts.push(a + (b - a) * rng.random::<f64>());
                    }
                }
                InitialLaw::Samples { dim, points } => {
                    let m = points.len() / dim;
                    let j = i % m;
                    pts.extend_from_slice(&points[j * dim..(j + 1) * dim]);
                }
            }
        }
        ParticleEnsemble::new(d, pts)
    }
}

/// Which ensembles a solver keeps (summaries are always kept at every step).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Record {
    All,
    /// this many evenly spaced checkpoints, including both ends
    Checkpoints(usize),
    Terminal,
    /// explicit grid indices (0 is always added)
    At(Vec<usize>),
}

impl Record {
    pub fn indices(&self, steps: usize) -> Vec<usize> {
        match self {
            Record::All => (0..=steps).collect(),
            Record::Terminal => vec![0, steps],
            Record::At(v) => {
                let mut v: Vec<usize> = v.iter().map(|&i| i.min(steps)).collect();
                v.push(0);
                v.sort_unstable();
                v.dedup();
                v
            }
            Record::Checkpoints(k) => {
                let k = (*k).clamp(2, steps + 1);
                let mut v: Vec<usize> = (0..k)
                    .map(|j| ((j as f64) * steps as f64 / (k - 1) as f64).round() as usize)
                    .collect();
                v.dedup();
                v
            }
        }
    }
}

/// The law flow t ↦ μ_t of a particle system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawFlow {
    pub grid: TimeGrid,
    pub theta: f64,
    /// one per grid point
    pub summaries: Vec<LawSummary>,
    /// grid indices with a stored ensemble, increasing
    pub snapshot_index: Vec<usize>,
    pub snapshots: Vec<ParticleEnsemble>,
}

impl LawFlow {
    /// μ_t ≡ μ0.
    pub fn constant(mu0: &ParticleEnsemble, grid: &TimeGrid, theta: f64, record: Record) -> Self {
        let s = mu0.summary(theta);
        let idx = record.indices(grid.steps());
        Self {
            grid: grid.clone(),
            theta,
            summaries: vec![s; grid.len()],
            snapshots: vec![mu0.clone(); idx.len()],
            snapshot_index: idx,
        }
    }

    pub fn summary_at_step(&self, k: usize) -> &LawSummary {
        &self.summaries[k.min(self.summaries.len() - 1)]
    }

    /// Summary at time t (nearest grid point to the left).
    pub fn summary_at(&self, t: f64) -> &LawSummary {
        self.summary_at_step(self.grid.locate(t))
    }

    pub fn terminal(&self) -> &ParticleEnsemble {
        self.snapshots.last().unwrap()
    }

    /// Checkpoint times and ensembles.
    pub fn checkpoints(&self) -> impl Iterator<Item = (f64, &ParticleEnsemble)> {
        self.snapshot_index.iter().map(|&k| self.grid.times()[k]).zip(&self.snapshots)
    }
}

/// The stored ensemble at t, or the nearest stored one to its left.
pub fn law_at(flow: &LawFlow, t: f64) -> Result<&ParticleEnsemble> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("law_at needs t ≥ 0, got {t}")));
    }
    let k = flow.grid.locate(t);
    let j = flow.snapshot_index.partition_point(|&i| i <= k);
    Ok(&flow.snapshots[j.max(1) - 1])
}
