use serde::{Deserialize, Serialize};

use super::drift::MkvDrift;
use super::ensemble::{LawFlow, ParticleEnsemble, Record};
use super::particles::{run_particles, LawSource};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::levy_noise::LevyNoise;
use crate::metrics;
use crate::rng::Streams;
use crate::sde_core::Sigma;

/// One Picard step: solve the SDE with the law argument frozen at
/// `frozen`, with the same particle noise streams every time.
#[allow(clippy::too_many_arguments)]
pub fn picard_iterate(
    drift: &MkvDrift,
    sigma: &Sigma,
    noise: &LevyNoise,
    frozen: &LawFlow,
    mu0: &ParticleEnsemble,
    grid: &TimeGrid,
    streams: &Streams,
    record: Record,
) -> Result<LawFlow> {
    run_particles(drift, sigma, noise, mu0, grid, streams, LawSource::Frozen(frozen), record)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub checkpoints: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 30,
            checkpoints: 20,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PicardResult {
    pub flow: LawFlow,
    /// `decay[n-1] = sup_t Ŵ_θ(μ^{(n)}_t, μ^{(n-1)}_t)` over the checkpoints
    pub decay: Vec<f64>,
    pub iterations: usize,
}

/// sup over shared checkpoints of Ŵ_θ between two flows.
pub fn flow_distance(a: &LawFlow, b: &LawFlow, theta: f64) -> Result<f64> {
    if a.snapshot_index != b.snapshot_index {
        return Err(Error::precondition("flows have different checkpoints"));
    }
    let d = a.snapshots[0].dim;
    let mut sup: f64 = 0.0;
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        sup = sup.max(metrics::wasserstein(&x.points, &y.points, d, theta)?.value);
    }
    Ok(sup)
}

/// Iterate from μ^{(0)} ≡ μ0 until successive flows are closer than `tol`.
pub fn picard_solve(
    drift: &MkvDrift,
    sigma: &Sigma,
    noise: &LevyNoise,
    mu0: &ParticleEnsemble,
    grid: &TimeGrid,
    streams: &Streams,
    options: &PicardOptions,
) -> Result<PicardResult> {
    if !(options.tol > 0.0) {
        return Err(Error::domain("Picard tolerance must be positive"));
    }
    let record = Record::Checkpoints(options.checkpoints);
    let mut prev = LawFlow::constant(mu0, grid, drift.theta, record.clone());
    let mut decay = Vec::new();
    for n in 1..=options.max_iter.max(1) {
        let next = picard_iterate(drift, sigma, noise, &prev, mu0, grid, streams, record.clone())?;
        let dist = flow_distance(&next, &prev, drift.theta)?;
        decay.push(dist);
        if dist < options.tol {
            return Ok(PicardResult {
                flow: next,
                decay,
                iterations: n,
            });
        }
        prev = next;
    }
    Err(Error::NonConvergence {
        iterations: options.max_iter,
        last_distance: *decay.last().unwrap(),
        decay,
    })
}
