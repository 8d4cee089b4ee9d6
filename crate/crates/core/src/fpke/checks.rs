use serde::{Deserialize, Serialize};

use super::operator::{FracLaplacian, Grid1D};
use super::solver::{initial_density, FpkeSolver};
use crate::ergodicity::contraction_factor;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::levy_noise::{LevyNoise, LevyTriplet};
use crate::metrics::{wasserstein1_densities, wasserstein_1d};
use crate::mkv::{run_particles, InitialLaw, LawSource, MkvDrift, Record};
use crate::rng::Streams;
use crate::sde_core::Sigma;
use crate::subordinator::BernsteinSpec;

/// Mass, leak and clipping tolerances for a solve.
pub const TOL_MASS: f64 = 1e-3;
pub const TOL_CLIP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceOptions {
    pub sizes: Vec<usize>,
    /// independent particle systems per size, distances averaged
    pub repeats: usize,
    pub particle_dt: f64,
    /// also solve on grids with dx / 2^k for k in 1..=refinements
    pub refinements: usize,
    pub tolerance: f64,
}

impl Default for CorrespondenceOptions {
    fn default() -> Self {
        Self {
            sizes: vec![1000, 4000, 16000],
            repeats: 4,
            particle_dt: 0.01,
            refinements: 1,
            tolerance: 5e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeEntry {
    pub n: usize,
    pub distance: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementEntry {
    pub dx: f64,
    pub steps: usize,
    /// Ŵ₁ to the largest particle system
    pub distance: f64,
    /// Ŵ₁ to the density on the previous (coarser) grid
    pub grid_change: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceReport {
    pub t_end: f64,
    pub by_size: Vec<SizeEntry>,
    pub refinements: Vec<RefinementEntry>,
    pub mass_error: f64,
    pub max_clipped: f64,
    pub decreasing: bool,
    pub pass: bool,
}

/// Noise whose generator is `-(−Δ/2)^α`: Brownian motion subordinated to
/// an α-stable subordinator.
pub fn stable_noise(alpha: f64) -> Result<LevyNoise> {
    LevyNoise::new(&LevyTriplet::subordinate(1, BernsteinSpec::Stable { alpha }))
}

// δ_x becomes the same narrow Gaussian on both sides
fn particle_law(grid: &Grid1D, law: &InitialLaw) -> InitialLaw {
    match law {
        InitialLaw::PointMass { x } => InitialLaw::Gaussian {
            mean: x.clone(),
            std: 3.0 * grid.dx,
        },
        other => other.clone(),
    }
}

/// Compare the grid solution at `t_end` with interacting particle systems
/// started from the same law.
pub fn correspondence_check(
    grid: &Grid1D,
    drift: &MkvDrift,
    mu0: &InitialLaw,
    t_end: f64,
    streams: &Streams,
    options: &CorrespondenceOptions,
) -> Result<CorrespondenceReport> {
    if options.sizes.is_empty() || options.repeats == 0 {
        return Err(Error::precondition("need at least one particle size and one repeat"));
    }
    let noise = stable_noise(grid.alpha)?;
    let solver = FpkeSolver::new(grid, Some(drift))?;
    let u0 = initial_density(grid, mu0)?;
    let run = solver.solve(&u0, t_end, &[])?;
    let u = run.terminal();

    let law = particle_law(grid, mu0);
    let tgrid = if t_end > 0.0 {
        Some(TimeGrid::with_step(t_end, options.particle_dt)?)
    } else {
        None
    };
    let mut by_size = Vec::new();
    let mut largest = Vec::new();
    for (si, &n) in options.sizes.iter().enumerate() {
        let mut ds = Vec::with_capacity(options.repeats);
        for r in 0..options.repeats {
            let s = streams.derive((si * 1000 + r) as u64);
            let e0 = law.sample(n, &s)?;
            let mut ens = match &tgrid {
                None => e0,
                Some(tg) => run_particles(drift, &Sigma::identity(), &noise, &e0, tg, &s, LawSource::Live, Record::Terminal)?
                    .terminal()
                    .clone(),
            };
            // the grid carries the law on [-L, L]; compare on that window
            for x in ens.points.iter_mut() {
                *x = x.clamp(-grid.l, grid.l);
            }
            let q = u.quantile_points(grid, n);
            ds.push(wasserstein_1d(&q, &ens.points, 1.0)?.value);
            if si + 1 == options.sizes.len() && r == 0 {
                largest = ens.points;
            }
        }
        let m = crate::stats::mean_se(&ds);
        by_size.push(SizeEntry {
            n,
            distance: m.mean,
            se: m.se,
        });
    }

    let mut refinements = vec![RefinementEntry {
        dx: grid.dx,
        steps: run.steps,
        distance: wasserstein_1d(&u.quantile_points(grid, largest.len()), &largest, 1.0)?.value,
        grid_change: None,
    }];
    let mut prev = (grid.clone(), u.clone());
    for k in 1..=options.refinements {
        let fine = Grid1D::new(grid.l, grid.n << k, grid.alpha)?;
        let fine = fine.clone().with_dt(grid.dt.min(fine.jump_cap()));
        let fs = FpkeSolver::new(&fine, Some(drift))?;
        let fr = fs.solve(&initial_density(&fine, mu0)?, t_end, &[])?;
        let fu = fr.terminal().clone();
        let m = largest.len();
        let change = wasserstein_1d(&fu.quantile_points(&fine, 4 * m), &prev.1.quantile_points(&prev.0, 4 * m), 1.0)?.value;
        refinements.push(RefinementEntry {
            dx: fine.dx,
            steps: fr.steps,
            distance: wasserstein_1d(&fu.quantile_points(&fine, m), &largest, 1.0)?.value,
            grid_change: Some(change),
        });
        prev = (fine, fu);
    }

    let decreasing = by_size.windows(2).all(|w| w[1].distance < w[0].distance);
    let last = by_size.last().unwrap().distance;
    let mass_error = (u.mass(grid.dx) - 1.0).abs();
    Ok(CorrespondenceReport {
        t_end,
        by_size,
        refinements,
        mass_error,
        max_clipped: run.max_clipped,
        decreasing,
        pass: decreasing && last <= options.tolerance && mass_error <= TOL_MASS,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityEntry {
    pub t: f64,
    pub distance: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub initial_distance: f64,
    pub entries: Vec<StabilityEntry>,
    pub slack: f64,
    pub violations: usize,
    pub pass: bool,
}

/// Evolve two initial laws on the grid and compare Ŵ₁(μ_t, ν_t) with
/// `exp[½∫(κ₁+κ₂)] Ŵ₁(μ0, ν0)` at each checkpoint.
pub fn fpke_stability_check(
    grid: &Grid1D,
    drift: &MkvDrift,
    mu0: &InitialLaw,
    nu0: &InitialLaw,
    t_end: f64,
    checkpoints: usize,
    slack: f64,
) -> Result<StabilityReport> {
    let solver = FpkeSolver::new(grid, Some(drift))?;
    let (u0, v0) = (initial_density(grid, mu0)?, initial_density(grid, nu0)?);
    let marks: Vec<f64> = (1..=checkpoints.max(1))
        .map(|j| t_end * j as f64 / checkpoints.max(1) as f64)
        .collect();
    let ru = solver.solve(&u0, t_end, &marks)?;
    let rv = solver.solve(&v0, t_end, &marks)?;
    let w0 = wasserstein1_densities(&u0.values, &v0.values, grid.dx);
    let entries: Vec<StabilityEntry> = ru
        .snapshots
        .iter()
        .zip(&rv.snapshots)
        .map(|(a, b)| StabilityEntry {
            t: a.time,
            distance: wasserstein1_densities(&a.values, &b.values, grid.dx),
            bound: contraction_factor(drift, a.time) * w0,
        })
        .collect();
    // identical inputs give identical outputs; allow for rounding only
    let floor = 1e-12;
    let violations = entries.iter().filter(|e| e.distance > e.bound * (1.0 + slack) + floor).count();
    Ok(StabilityReport {
        initial_distance: w0,
        entries,
        slack,
        violations,
        pass: violations == 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub xi: f64,
    pub measured: f64,
    pub expected: f64,
    pub rel_error: f64,
}

/// Multiplier of the stencil on `cos(ξx)` over the unbounded lattice
/// (the periodic harness with period → ∞) against `-(ξ²/2)^α`.
pub fn symbol_check(grid: &Grid1D, xis: &[f64]) -> Result<Vec<SymbolEntry>> {
    let op = FracLaplacian::new(grid)?;
    Ok(xis
        .iter()
        .map(|&xi| {
            let measured = op.lattice_symbol(xi, 200_000);
            let expected = -(0.5 * xi * xi).powf(grid.alpha);
            SymbolEntry {
                xi,
                measured,
                expected,
                rel_error: (measured - expected).abs() / expected.abs(),
            }
        })
        .collect())
}
