//! Wasserstein contraction of the law flow and invariant measures.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::levy_noise::LevyNoise;
use crate::metrics::{self, Resampling};
use crate::mkv::{run_particles, LawSource, MkvDrift, ParticleEnsemble, Record};
use crate::quad;
use crate::rng::{Domain, Streams};
use crate::sde_core::Sigma;
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionOptions {
    pub checkpoints: usize,
    pub bootstrap: usize,
}

impl Default for ContractionOptions {
    fn default() -> Self {
        Self {
            checkpoints: 21,
            bootstrap: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub ses: Vec<f64>,
    pub bounds: Vec<f64>,
    pub initial_distance: f64,
    /// -slope of log Ŵ_θ against t over checkpoints with Ŵ_θ > 5 SE
    pub fitted_rate: Option<f64>,
    pub fit_r2: Option<f64>,
    /// κ = -(κ₁ + κ₂)/2, averaged over the horizon
    pub theory_rate: f64,
    pub bound_violations: usize,
}

impl ContractionReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,distance,se,bound")?;
        for i in 0..self.times.len() {
            writeln!(w, "{},{},{},{}", self.times[i], self.distances[i], self.ses[i], self.bounds[i])?;
        }
        Ok(())
    }
}

/// `exp[½ ∫_0^t (κ₁ + κ₂)]`
pub fn contraction_factor(drift: &MkvDrift, t: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    (0.5 * quad::simpson(|s| drift.kappa1(s) + drift.kappa2(s), 0.0, t, 1000)).exp()
}

/// Pair ν0's particles with μ0's by an optimal matching so that particle
/// `i` of both systems forms a coupled pair.
pub fn pair_ensembles(mu0: &ParticleEnsemble, nu0: &ParticleEnsemble, theta: f64) -> Result<(ParticleEnsemble, ParticleEnsemble)> {
    if mu0.len() != nu0.len() || mu0.dim != nu0.dim {
        return Err(Error::precondition("initial ensembles must have equal size and dimension"));
    }
    if mu0.dim == 1 {
        return Ok((mu0.sorted(), nu0.sorted()));
    }
    if mu0.len() <= metrics::ASSIGNMENT_BUDGET {
        let (m, _) = metrics::optimal_matching(&mu0.points, &nu0.points, mu0.dim, theta)?;
        let d = mu0.dim;
        let points = m.iter().flat_map(|&j| nu0.point(j).to_vec()).collect();
        return Ok((mu0.clone(), ParticleEnsemble { dim: d, points }));
    }
    Ok((mu0.clone(), nu0.clone()))
}

/// Run the particle systems from μ0 and ν0 with identical noise and compare
/// Ŵ_θ at checkpoints against `Ŵ_θ(μ0,ν0) exp[½∫(κ₁+κ₂)]`.
#[allow(clippy::too_many_arguments)]
pub fn contraction_experiment(
    drift: &MkvDrift,
    sigma: &Sigma,
    noise: &LevyNoise,
    mu0: &ParticleEnsemble,
    nu0: &ParticleEnsemble,
    grid: &TimeGrid,
    streams: &Streams,
    options: &ContractionOptions,
) -> Result<ContractionReport> {
    let theta = drift.theta;
    let d = mu0.dim;
    let (mu0, nu0) = pair_ensembles(mu0, nu0, theta)?;
    let record = Record::Checkpoints(options.checkpoints);
    let a = run_particles(drift, sigma, noise, &mu0, grid, streams, LawSource::Live, record.clone())?;
    let b = run_particles(drift, sigma, noise, &nu0, grid, streams, LawSource::Live, record)?;
    let initial = metrics::wasserstein(&mu0.points, &nu0.points, d, theta)?.value;

    let mut report = ContractionReport {
        times: vec![],
        distances: vec![],
        ses: vec![],
        bounds: vec![],
        initial_distance: initial,
        fitted_rate: None,
        fit_r2: None,
        theory_rate: 0.0,
        bound_violations: 0,
    };
    for (j, ((t, x), y)) in a.checkpoints().zip(&b.snapshots).enumerate() {
        let w = metrics::wasserstein(&x.points, &y.points, d, theta)?.value;
        let mut rng = streams.stream(Domain::Bootstrap, j as u64);
        let se = if options.bootstrap >= 2 {
            metrics::bootstrap_se(&x.points, &y.points, d, theta, options.bootstrap, Resampling::Paired, &mut rng)?
        } else {
            0.0
        };
        let bound = initial * contraction_factor(drift, t);
        let rel = if w > 0.0 { se / w } else { 0.0 };
        if w > bound * (1.0 + 3.0 * rel) + 1e-12 {
            report.bound_violations += 1;
        }
        report.times.push(t);
        report.distances.push(w);
        report.ses.push(se);
        report.bounds.push(bound);
    }
    let (ts, logs): (Vec<f64>, Vec<f64>) = report
        .times
        .iter()
        .zip(report.distances.iter().zip(&report.ses))
        .filter(|(_, (w, se))| **w > 0.0 && **w > 5.0 * **se)
        .map(|(t, (w, _))| (*t, w.ln()))
        .unzip();
    if ts.len() >= 3 {
        let (_, slope, r2) = stats::linear_fit(&ts, &logs);
        report.fitted_rate = Some(-slope);
        report.fit_r2 = Some(r2);
    }
    let t_end = grid.t_end();
    report.theory_rate = -quad::simpson(|s| drift.kappa1(s) + drift.kappa2(s), 0.0, t_end, 1000) / (2.0 * t_end);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantOptions {
    pub dt: f64,
    /// number of doublings recorded in the convergence log
    pub doublings: usize,
    pub bootstrap: usize,
}

impl Default for InvariantOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            doublings: 6,
            bootstrap: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub t: f64,
    /// Ŵ_θ(μ_t, μ_{2t})
    pub gap: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub ensemble: ParticleEnsemble,
    pub log: Vec<ConvergenceEntry>,
    pub converged: bool,
}

/// Evolve μ0 up to `burn_in`; the terminal ensemble estimates the invariant
/// measure. Requires time-homogeneous coefficients and κ > 0.
#[allow(clippy::too_many_arguments)]
pub fn invariant_measure(
    drift: &MkvDrift,
    sigma: &Sigma,
    noise: &LevyNoise,
    mu0: &ParticleEnsemble,
    burn_in: f64,
    streams: &Streams,
    options: &InvariantOptions,
) -> Result<InvariantReport> {
    if !drift.homogeneous || matches!(sigma, Sigma::TimeVarying(_)) {
        return Err(Error::precondition("invariant measure needs time-homogeneous coefficients"));
    }
    if !(drift.kappa(0.0) > 0.0) {
        return Err(Error::precondition(format!(
            "invariant measure needs κ = -(κ₁+κ₂)/2 > 0, got {}",
            drift.kappa(0.0)
        )));
    }
    let grid = TimeGrid::with_step(burn_in, options.dt)?;
    let steps = grid.steps();
    // marks at T·2^{-j/2}; entries pair each mark with the one two places up
    let marks: Vec<usize> = (0..=2 * options.doublings)
        .map(|j| (steps as f64 * 0.5f64.powf(j as f64 / 2.0)).round() as usize)
        .collect();
    let flow = run_particles(drift, sigma, noise, mu0, &grid, streams, LawSource::Live, Record::At(marks.clone()))?;
    let d = mu0.dim;
    let theta = drift.theta;
    let snap = |k: usize| flow.snapshot_index.iter().position(|&i| i == k).map(|j| &flow.snapshots[j]);
    let mut log = Vec::new();
    for j in (2..marks.len()).rev() {
        let (k, k2) = (marks[j], marks[j - 2]);
        if k == 0 || k == k2 {
            continue;
        }
        let (Some(x), Some(y)) = (snap(k), snap(k2)) else {
            continue;
        };
        let gap = metrics::wasserstein(&x.points, &y.points, d, theta)?.value;
        let mut rng = streams.stream(Domain::Bootstrap, j as u64);
        let se = metrics::bootstrap_se(&x.points, &y.points, d, theta, options.bootstrap, Resampling::Independent, &mut rng)?;
        log.push(ConvergenceEntry {
            t: grid.times()[k],
            gap,
            se,
        });
    }
    let small: Vec<bool> = log.iter().map(|e| e.gap < (1e-3f64).max(3.0 * e.se)).collect();
    let converged = small.windows(2).any(|w| w[0] && w[1]);
    Ok(InvariantReport {
        ensemble: flow.terminal().clone(),
        log,
        converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub distance: f64,
    pub se: f64,
    pub pass: bool,
}

/// Re-evolve an invariant-measure estimate for time `t` with fresh noise and
/// compare with itself: Ŵ_θ(μ̂, P_t* μ̂) ≤ 3 SE.
pub fn fixed_point_check(
    drift: &MkvDrift,
    sigma: &Sigma,
    noise: &LevyNoise,
    mu_hat: &ParticleEnsemble,
    t: f64,
    dt: f64,
    streams: &Streams,
    bootstrap: usize,
) -> Result<FixedPointReport> {
    let grid = TimeGrid::with_step(t, dt)?;
    let flow = run_particles(drift, sigma, noise, mu_hat, &grid, streams, LawSource::Live, Record::Terminal)?;
    let d = mu_hat.dim;
    let out = flow.terminal();
    let distance = metrics::wasserstein(&mu_hat.points, &out.points, d, drift.theta)?.value;
    let mut rng = streams.stream(Domain::Bootstrap, 0);
    let se = metrics::bootstrap_se(
        &mu_hat.points,
        &out.points,
        d,
        drift.theta,
        bootstrap,
        Resampling::Independent,
        &mut rng,
    )?;
    Ok(FixedPointReport {
        distance,
        se,
        pass: distance <= 3.0 * se,
    })
}
