use rayon::prelude::*;

use super::drift::{Law, LawSummary, MkvDrift};
use super::ensemble::{LawFlow, ParticleEnsemble, Record};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::levy_noise::LevyNoise;
use crate::rng::{Domain, Streams};
use crate::sde_core::{check_finite, euler_update, Sigma};

/// Where the drift's law argument comes from at each step.
#[derive(Clone, Copy, Debug)]
pub enum LawSource<'a> {
    /// the current ensemble (interacting particles)
    Live,
    /// a fixed flow (Picard iterate, coupled solves)
    Frozen(&'a LawFlow),
}

/// Advance particles in lockstep. Particle `i` starts at `mu0.point(i)` and
/// draws its noise from stream `(Particle, i)`; the ensemble reduction of
/// each step is computed serially before the parallel update.
pub fn run_particles(
    drift: &MkvDrift,
    sigma: &Sigma,
    noise: &LevyNoise,
    mu0: &ParticleEnsemble,
    grid: &TimeGrid,
    streams: &Streams,
    source: LawSource<'_>,
    record: Record,
) -> Result<LawFlow> {
    let d = mu0.dim;
    if drift.dim != d || noise.dim() != d {
        return Err(Error::precondition("dimension mismatch between drift, noise and μ0"));
    }
    if let LawSource::Frozen(f) = source {
        if f.grid.len() != grid.len() {
            return Err(Error::precondition("frozen flow lives on a different grid"));
        }
    }
    let n = mu0.len();
    let theta = drift.theta;
    let rngs: Vec<_> = (0..n).map(|i| streams.stream(Domain::Particle, i as u64)).collect();
    let mut rngs = rngs;
    let mut noise_streams: Vec<_> = rngs.iter_mut().map(|r| noise.stream(r)).collect();

    let keep = record.indices(grid.steps());
    let mut snapshot_index = Vec::with_capacity(keep.len());
    let mut snapshots = Vec::with_capacity(keep.len());
    let mut summaries = Vec::with_capacity(grid.len());

    let mut x = mu0.points.clone();
    let times = grid.times();
    let mut next_keep = 0;
    for k in 0..=grid.steps() {
        let current = ParticleEnsemble { dim: d, points: x };
        summaries.push(current.summary(theta));
        if next_keep < keep.len() && keep[next_keep] == k {
            snapshot_index.push(k);
            snapshots.push(current.clone());
            next_keep += 1;
        }
        x = current.points;
        if k == grid.steps() {
            break;
        }
        let law: LawSummary = match source {
            LawSource::Live => summaries[k].clone(),
            LawSource::Frozen(f) => f.summary_at_step(k).clone(),
        };
        let (t, dt) = (times[k], grid.dt(k));
        let results: Vec<Result<()>> = x
            .par_chunks_mut(d)
            .zip(noise_streams.par_iter_mut())
            .map_init(
                || (vec![0.0; d], vec![0.0; d]),
                |(b, dz), (xi, ns)| {
                    drift.eval(t, xi, &law, b);
                    ns.next_increment(t, dt, dz, None)?;
                    euler_update(xi, b, dt, sigma, t, dz);
                    check_finite(xi, k + 1, times[k + 1])
                },
            )
            .collect();
        if let Some(e) = results.into_iter().find_map(|r| r.err()) {
            return Err(e);
        }
    }
    Ok(LawFlow {
        grid: grid.clone(),
        theta,
        summaries,
        snapshot_index,
        snapshots,
    })
}

/// Interacting particle system; all intermediate ensembles are kept.
pub fn propagate_particles(
    drift: &MkvDrift,
    sigma: &Sigma,
    noise: &LevyNoise,
    mu0: &ParticleEnsemble,
    grid: &TimeGrid,
    streams: &Streams,
) -> Result<LawFlow> {
    run_particles(drift, sigma, noise, mu0, grid, streams, LawSource::Live, Record::All)
}
