//! Execution of each experiment kind.

use rayon::prelude::*;
use serde_json::{json, Value};

use mkvlevy_core::ergodicity::{contraction_experiment, fixed_point_check, invariant_measure, ContractionOptions, InvariantOptions};
use mkvlevy_core::fpke::{self, CorrespondenceOptions, DensityField, FpkeSolver, Grid1D};
use mkvlevy_core::harnack::{
    coupling_runs, entropy_cost_check, girsanov_mean_check, log_harnack_check, power_harnack_check, prepare, summarize, CouplingOptions,
    CouplingRun, HarnackProblem, InequalityReport,
};
use mkvlevy_core::levy_noise::LevyNoise;
use mkvlevy_core::mkv::{picard_solve, Law, LawSummary, MkvDrift, PicardOptions};
use mkvlevy_core::rng::Domain;
use mkvlevy_core::sde_core::{simulate_bundle, sup_moment, Sigma};
use mkvlevy_core::subordinator::{sample_path_with, IncrementSampler, SamplerConfig};
use mkvlevy_core::{stats, Error, Result, Streams, TimeGrid};

use crate::config::Kind;
use crate::params::*;
use crate::report::{Artifact, Check, Verdict};

pub struct Outcome {
    pub summary: Value,
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
}

fn sigma(s: f64) -> Sigma {
    Sigma::Scalar(s)
}

pub fn subcheck(p: &SubcheckParams, streams: &Streams) -> Result<Outcome> {
    let grid = TimeGrid::new(vec![0.0, p.t])?;
    let cfg = SamplerConfig {
        extension: 0.0,
        ..p.sampler.clone()
    };
    let sampler = IncrementSampler::new(&p.subordinator, &cfg)?;
    let values: Vec<f64> = (0..p.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(Domain::SubordinatorPath, i as u64);
            sample_path_with(&sampler, &grid, 0.0, &mut rng).map(|path| path.values[1])
        })
        .collect::<Result<_>>()?;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for &r in &p.rs {
        let xs: Vec<f64> = values.iter().map(|s| (-r * s).exp()).collect();
        let m = stats::mean_se(&xs);
        let exact = (-p.t * p.subordinator.laplace_exponent(r)?).exp();
        let tol = 4.0 * m.se + 1e-10;
        checks.push(Check::new(
            format!("laplace_r={r}"),
            (m.mean - exact).abs() <= tol,
            (m.mean - exact).abs(),
            tol,
            format!("MC mean {} (SE {}) against e^(-tφ(r)) = {exact}", m.mean, m.se),
        ));
        rows.push(vec![r, m.mean, m.se, exact]);
    }
    Ok(Outcome {
        summary: json!({
            "subordinator": p.subordinator.name(),
            "paths": p.paths,
            "t": p.t,
            "mean_s_t": stats::mean(&values),
        }),
        checks,
        artifacts: vec![Artifact::table("laplace.csv", &["r", "mc_mean", "se", "exact"], rows)],
    })
}

pub fn moments(p: &MomentsParams, streams: &Streams) -> Result<Outcome> {
    let dim = p.x0.len();
    let drift = p.drift.build(dim, p.theta)?;
    let anchor = vec![0.0; dim];
    let theta = p.theta;
    let field = drift.freeze(move |_| LawSummary::point(&anchor, theta));
    let noise = LevyNoise::new(&p.noise.triplet(dim))?;
    let grid = TimeGrid::uniform(p.t_end, p.steps)?;
    let sid = Sigma::identity();
    let small = sup_moment(&simulate_bundle(&field, &sid, &noise, &p.x0, &grid, streams, p.paths)?, p.theta);
    let big = sup_moment(&simulate_bundle(&field, &sid, &noise, &p.x0, &grid, streams, 2 * p.paths)?, p.theta);
    let drift_rel = ((small - big) / big).abs();
    let finite = small.is_finite() && big.is_finite();
    Ok(Outcome {
        summary: json!({ "sup_moment": big, "sup_moment_half": small, "relative_change": drift_rel }),
        checks: vec![
            Check::new("finite", finite, big, f64::INFINITY, "E sup|X|^θ estimated with N and 2N paths"),
            Check::new(
                "refinement_stable",
                finite && drift_rel < p.tolerance,
                drift_rel,
                p.tolerance,
                format!("{small} with {} paths, {big} with {}", p.paths, 2 * p.paths),
            ),
        ],
        artifacts: vec![Artifact::table(
            "moments.csv",
            &["paths", "sup_moment"],
            [vec![p.paths as f64, small], vec![2.0 * p.paths as f64, big]],
        )],
    })
}

pub fn picard(p: &PicardParams, streams: &Streams) -> Result<Outcome> {
    let dim = p.mu0.dim();
    let drift = p.drift.build(dim, p.theta)?;
    let noise = LevyNoise::new(&p.noise.triplet(dim))?;
    let grid = TimeGrid::uniform(p.t_end, p.steps)?;
    let mu0 = p.mu0.sample(p.particles, streams)?;
    let opts = PicardOptions {
        tol: p.tol,
        max_iter: p.max_iter,
        checkpoints: p.checkpoints,
    };
    let (decay, converged) = match picard_solve(&drift, &Sigma::identity(), &noise, &mu0, &grid, streams, &opts) {
        Ok(r) => (r.decay, true),
        Err(Error::NonConvergence { decay, .. }) => (decay, false),
        Err(e) => return Err(e),
    };
    let decreasing = decay.windows(2).all(|w| w[1] < w[0]);
    let (ns, logs): (Vec<f64>, Vec<f64>) = decay
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0)
        .map(|(i, d)| ((i + 1) as f64, d.ln()))
        .unzip();
    let (slope, r2) = if ns.len() >= 3 {
        let (_, b, r2) = stats::linear_fit(&ns, &logs);
        (b, r2)
    } else {
        (f64::NAN, f64::NAN)
    };
    let checks = vec![
        Check::new(
            "strictly_decreasing",
            decreasing && decay.len() >= p.min_iterations,
            decay.len() as f64,
            p.min_iterations as f64,
            format!("{} iterations, decay {decay:?}", decay.len()),
        ),
        Check::new(
            "log_linear_slope",
            slope < 0.0,
            slope,
            0.0,
            "slope of log sup-distance against iteration",
        ),
        Check::new("log_linear_r2", r2 >= p.min_r2, r2, p.min_r2, "R² of the log-linear fit"),
    ];
    Ok(Outcome {
        summary: json!({ "iterations": decay.len(), "converged": converged, "decay": decay, "slope": slope, "r2": r2 }),
        checks,
        artifacts: vec![Artifact::table(
            "picard_decay.csv",
            &["iteration", "sup_distance"],
            decay.iter().enumerate().map(|(i, d)| vec![(i + 1) as f64, *d]),
        )],
    })
}

pub fn contraction(p: &ContractionParams, streams: &Streams) -> Result<Outcome> {
    let dim = p.mu0.dim();
    let drift = p.drift.build(dim, p.theta)?;
    let noise = LevyNoise::new(&p.noise.triplet(dim))?;
    let grid = TimeGrid::uniform(p.t_end, p.steps)?;
    let mu0 = p.mu0.sample(p.particles, &streams.derive(1))?;
    let nu0 = p.nu0.sample(p.particles, &streams.derive(2))?;
    let opts = ContractionOptions {
        checkpoints: p.checkpoints,
        bootstrap: p.bootstrap,
    };
    let r = contraction_experiment(&drift, &sigma(p.sigma), &noise, &mu0, &nu0, &grid, streams, &opts)?;
    let kappa = r.theory_rate;
    let mut checks = vec![Check::new(
        "bound_violations",
        r.bound_violations == 0,
        r.bound_violations as f64,
        0.0,
        "checkpoints where Ŵ exceeds exp[½∫(κ₁+κ₂)]Ŵ(0) beyond 3 SE",
    )];
    match r.fitted_rate {
        Some(rate) if kappa > 0.0 => {
            let rel = (rate - kappa).abs() / kappa;
            checks.push(Check::new(
                "fitted_rate",
                rel <= p.rate_tolerance,
                rel,
                p.rate_tolerance,
                format!("fitted rate {rate} against κ = {kappa}"),
            ));
        }
        Some(_) => {}
        None => checks.push(Check::new(
            "fitted_rate",
            false,
            f64::NAN,
            p.rate_tolerance,
            "too few checkpoints above 5 SE to fit a rate",
        )),
    }
    if p.tight_bound {
        let misses = (0..r.times.len())
            .filter(|&i| (r.distances[i] - r.bounds[i]).abs() > (0.05 * r.bounds[i]).max(3.0 * r.ses[i]))
            .count();
        checks.push(Check::new(
            "matches_closed_form",
            misses == 0,
            misses as f64,
            0.0,
            "checkpoints where |Ŵ(t) - W0 e^{-κt}| > max(5%, 3 SE)",
        ));
    }
    Ok(Outcome {
        summary: json!({
            "initial_distance": r.initial_distance,
            "fitted_rate": r.fitted_rate,
            "fit_r2": r.fit_r2,
            "theory_rate": kappa,
            "bound_violations": r.bound_violations,
        }),
        checks,
        artifacts: vec![Artifact::from_writer("contraction.csv", |w| r.write_csv(w))],
    })
}

pub fn invariant(p: &InvariantParams, streams: &Streams) -> Result<Outcome> {
    let dim = p.mu0.dim();
    let drift = p.drift.build(dim, p.theta)?;
    let noise = LevyNoise::new(&p.noise.triplet(dim))?;
    let mu0 = p.mu0.sample(p.particles, streams)?;
    let opts = InvariantOptions {
        dt: p.dt,
        doublings: p.doublings,
        bootstrap: p.bootstrap,
    };
    let s = sigma(p.sigma);
    let r = invariant_measure(&drift, &s, &noise, &mu0, p.burn_in, streams, &opts)?;
    let var = r.ensemble.variance();
    let fp = fixed_point_check(
        &drift,
        &s,
        &noise,
        &r.ensemble,
        p.fixed_point_t,
        p.dt,
        &streams.derive(2),
        p.bootstrap,
    )?;
    let mut checks = Vec::new();
    if let Some([lo, hi]) = p.variance_range {
        checks.push(Check::new(
            "variance",
            (lo..=hi).contains(&var),
            var,
            hi,
            format!("terminal empirical variance, accepted range [{lo}, {hi}]"),
        ));
    }
    checks.push(Check::new(
        "fixed_point",
        fp.pass,
        fp.distance,
        3.0 * fp.se,
        format!("Ŵ(μ̂, P_tμ̂) at t = {} against 3 SE", p.fixed_point_t),
    ));
    Ok(Outcome {
        summary: json!({ "variance": var, "mean": r.ensemble.mean(), "converged": r.converged, "log": r.log, "fixed_point": fp }),
        checks,
        artifacts: vec![
            Artifact::table("convergence.csv", &["t", "gap", "se"], r.log.iter().map(|e| vec![e.t, e.gap, e.se])),
            Artifact::from_writer("invariant_ensemble.csv", |w| r.ensemble.write_csv(w)),
        ],
    })
}

fn inequality_check(name: &str, r: &InequalityReport) -> Check {
    let se = (r.lhs_se.powi(2) + r.rhs_se.powi(2)).sqrt();
    Check::new(
        name,
        r.pass,
        r.lhs,
        r.rhs + 3.0 * se,
        format!(
            "LHS {} (SE {}) against RHS {} (SE {}); {}",
            r.lhs, r.lhs_se, r.rhs, r.rhs_se, r.note
        ),
    )
    .with_verdict(r.verdict.into())
}

fn inequality_artifact(r: &InequalityReport) -> Artifact {
    Artifact::table(
        "inequality.csv",
        &[
            "lhs",
            "lhs_se",
            "rhs",
            "rhs_se",
            "k",
            "w_theta",
            "w2",
            "lambda",
            "cost_mean",
            "cost_se",
        ],
        [vec![
            r.lhs,
            r.lhs_se,
            r.rhs,
            r.rhs_se,
            r.k,
            r.w_theta,
            r.w2,
            r.lambda,
            r.cost.mean,
            r.cost.se,
        ]],
    )
}

fn runs_artifact(runs: &[CouplingRun]) -> Artifact {
    Artifact::table(
        "coupling_runs.csv",
        &["x0", "y0", "tau", "r", "bracket", "bracket_bound", "terminal_gap", "slips"],
        runs.iter().map(|c| {
            vec![
                c.x0[0],
                c.y0[0],
                c.tau.unwrap_or(f64::NAN),
                c.r,
                c.bracket,
                c.bracket_bound.unwrap_or(f64::NAN),
                c.terminal_gap,
                c.slips as f64,
            ]
        }),
    )
}

pub fn harnack(kind: Kind, p: &HarnackParams, streams: &Streams) -> Result<Outcome> {
    let h = &p.harnack;
    let dim = p.mu0.dim();
    let drift: MkvDrift = p.drift.build(dim, h.theta)?;
    let s = sigma(p.sigma);
    let mu0 = p.mu0.sample(p.particles, &streams.derive(1))?;
    let nu0 = p.nu0.sample(p.particles, &streams.derive(2))?;
    let problem = HarnackProblem {
        drift: &drift,
        sigma: &s,
        subordinator: &p.subordinator,
        mu0: &mu0,
        nu0: &nu0,
    };
    let prep = prepare(&problem, h, streams)?;
    let base = json!({
        "k": prep.k(),
        "k_variant": h.k_variant,
        "xi_scaling": h.xi_scaling,
        "w_theta": prep.w_theta,
        "w2": prep.w2,
        "lambda": prep.lambda,
    });
    match kind {
        Kind::HarnackLog => {
            let r = log_harnack_check(h, &prep, p.n_cost, streams)?;
            Ok(Outcome {
                summary: json!({ "constants": base, "report": r }),
                checks: vec![inequality_check("log_harnack", &r)],
                artifacts: vec![inequality_artifact(&r)],
            })
        }
        Kind::HarnackPower => {
            let r = power_harnack_check(&problem, h, &prep, p.n_cost, streams)?;
            Ok(Outcome {
                summary: json!({ "constants": base, "report": r }),
                checks: vec![inequality_check("power_harnack", &r)],
                artifacts: vec![inequality_artifact(&r)],
            })
        }
        _ => entropy(p, &problem, &prep, base, streams),
    }
}

fn entropy(
    p: &HarnackParams,
    problem: &HarnackProblem<'_>,
    prep: &mkvlevy_core::harnack::Prepared,
    base: Value,
    streams: &Streams,
) -> Result<Outcome> {
    let h = &p.harnack;
    let runs = coupling_runs(problem, h, prep, p.runs, streams, &CouplingOptions::default())?;
    let sum = summarize(&runs);
    let ent = entropy_cost_check(prep, &runs, p.n_cost, streams)?;
    let se = (ent.surrogate_se.powi(2) + ent.bound_se.powi(2)).sqrt();
    let mut checks = vec![Check::new(
        "entropy_cost",
        ent.pass,
        ent.surrogate,
        ent.bound + 3.0 * se,
        format!(
            "E[R log R] = {} (SE {}) against {} (SE {})",
            ent.surrogate, ent.surrogate_se, ent.bound, ent.bound_se
        ),
    )
    .with_verdict(ent.verdict.into())];
    let mut extra = serde_json::Map::new();
    if p.girsanov {
        let g = girsanov_mean_check(&runs)?;
        checks.push(Check::new(
            "girsanov_mean",
            g.pass,
            g.mean,
            1.0,
            format!("mean R = {} with SE {} over {} runs", g.mean, g.se, g.n),
        ));
        checks.push(Check::new(
            "bracket_bound",
            sum.bracket_violations == 0,
            sum.bracket_violations as f64,
            0.0,
            "runs whose ⟨M⟩_T exceeds 2λ²{|X₀-Y₀|² + K²W²}/∫K₁dℓ^ε + 1e-8",
        ));
        extra.insert("girsanov".into(), json!(g));
    }
    if p.negative_control {
        let bad = CouplingOptions {
            bracket_scale: 2.0,
            ..Default::default()
        };
        let runs_bad = coupling_runs(problem, h, prep, p.runs, streams, &bad)?;
        let g = girsanov_mean_check(&runs_bad)?;
        checks.push(Check::new(
            "negative_control_detected",
            !g.pass,
            g.mean,
            1.0,
            format!("R with a doubled bracket: mean {} (SE {}) must differ from 1", g.mean, g.se),
        ));
        extra.insert("negative_control".into(), json!(g));
    }
    if let Some(f) = p.min_coupled_fraction {
        checks.push(Check::new(
            "coupled_fraction",
            sum.coupled_fraction >= f,
            sum.coupled_fraction,
            f,
            "fraction of runs with τ ≤ T",
        ));
    }
    if p.refine_dt {
        let h2 = mkvlevy_core::harnack::HarnackConfig {
            dt: h.dt / 2.0,
            ..h.clone()
        };
        let prep2 = prepare(problem, &h2, streams)?;
        let runs2 = coupling_runs(problem, &h2, &prep2, p.runs, streams, &CouplingOptions::default())?;
        let f2 = summarize(&runs2).coupled_fraction;
        let f1 = sum.coupled_fraction;
        let n = p.runs as f64;
        let slack = 3.0 * ((f1 * (1.0 - f1) + f2 * (1.0 - f2)) / n).sqrt();
        checks.push(Check::new(
            "coupled_fraction_refined",
            f2 + slack >= f1,
            f2,
            f1 - slack,
            format!("coupled fraction {f1} at dt = {}, {f2} at dt = {}", h.dt, h2.dt),
        ));
        extra.insert("coupled_fraction_refined".into(), json!(f2));
    }
    Ok(Outcome {
        summary: json!({ "constants": base, "coupling": sum, "entropy": ent, "extra": extra }),
        checks,
        artifacts: vec![runs_artifact(&runs)],
    })
}

fn grid_of(g: &GridParams) -> Result<Grid1D> {
    let grid = Grid1D::new(g.l, g.n, g.alpha)?;
    Ok(match g.dt {
        Some(dt) => grid.with_dt(dt),
        None => grid,
    })
}

fn density_artifact(name: &str, grid: &Grid1D, u: &DensityField) -> Artifact {
    Artifact::from_writer(name, |w| u.write_csv(grid, w))
}

pub fn fpke_correspond(p: &CorrespondParams, streams: &Streams) -> Result<Outcome> {
    let grid = grid_of(&p.grid)?;
    let drift = p.drift.build(1, 1.0)?;
    let opts = CorrespondenceOptions {
        sizes: p.sizes.clone(),
        repeats: p.repeats,
        particle_dt: p.particle_dt,
        refinements: p.refinements,
        tolerance: p.tolerance,
    };
    let r = fpke::correspondence_check(&grid, &drift, &p.mu0, p.t_end, streams, &opts)?;
    let last = r.by_size.last().expect("sizes are nonempty").distance;
    let mut checks = vec![
        Check::new(
            "decreasing_in_n",
            r.decreasing,
            r.by_size.len() as f64,
            0.0,
            format!("Ŵ₁ by N: {:?}", r.by_size.iter().map(|e| (e.n, e.distance)).collect::<Vec<_>>()),
        ),
        Check::new(
            "final_distance",
            last <= p.tolerance,
            last,
            p.tolerance,
            "Ŵ₁(grid, particles) at the largest N",
        ),
        Check::new(
            "mass",
            r.mass_error <= fpke::TOL_MASS,
            r.mass_error,
            fpke::TOL_MASS,
            "|mass - 1| of the grid solution at T",
        ),
    ];
    let solver = FpkeSolver::new(&grid, Some(&drift))?;
    let u = solver.solve(&fpke::initial_density(&grid, &p.mu0)?, p.t_end, &[])?;
    let mut artifacts = vec![
        Artifact::table(
            "correspondence.csv",
            &["n", "distance", "se"],
            r.by_size.iter().map(|e| vec![e.n as f64, e.distance, e.se]),
        ),
        Artifact::table(
            "refinement.csv",
            &["dx", "steps", "distance", "grid_change"],
            r.refinements
                .iter()
                .map(|e| vec![e.dx, e.steps as f64, e.distance, e.grid_change.unwrap_or(f64::NAN)]),
        ),
        density_artifact("density.csv", &grid, u.terminal()),
    ];
    let mut oracle = Value::Null;
    if let Some(o) = &p.stable_oracle {
        let free = FpkeSolver::new(&grid, None)?;
        let u0 = DensityField {
            values: grid.xs().iter().map(|&x| fpke::stable_density(x, o.t0, grid.alpha)).collect(),
            time: o.t0,
        };
        let run = free.solve(&u0, o.t1, &[])?;
        let exact: Vec<f64> = grid.xs().iter().map(|&x| fpke::stable_density(x, o.t1, grid.alpha)).collect();
        let l1: f64 = run.terminal().values.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>() * grid.dx;
        checks.push(Check::new(
            "stable_oracle_l1",
            l1 <= o.tolerance,
            l1,
            o.tolerance,
            format!("free evolution t = {} → {} against Fourier inversion", o.t0, o.t1),
        ));
        artifacts.push(density_artifact("stable_evolution.csv", &grid, run.terminal()));
        oracle = json!({ "l1": l1, "t0": o.t0, "t1": o.t1 });
    }
    Ok(Outcome {
        summary: json!({ "report": r, "stable_oracle": oracle, "grid": grid }),
        checks,
        artifacts,
    })
}

pub fn fpke_stability(p: &StabilityParams) -> Result<Outcome> {
    let grid = grid_of(&p.grid)?;
    let drift = p.drift.build(1, 1.0)?;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (k, [a, b]) in p.pairs.iter().enumerate() {
        let r = fpke::fpke_stability_check(&grid, &drift, a, b, p.t_end, p.checkpoints, p.slack)?;
        checks.push(Check::new(
            format!("pair_{k}"),
            r.pass,
            r.violations as f64,
            0.0,
            format!("checkpoints where Ŵ₁(μ_t, ν_t) > (1 + {})·exp[½∫(κ₁+κ₂)]Ŵ₁(μ0, ν0)", p.slack),
        ));
        rows.extend(r.entries.iter().map(|e| vec![k as f64, e.t, e.distance, e.bound]));
        reports.push(r);
    }
    Ok(Outcome {
        summary: json!({ "pairs": reports }),
        checks,
        artifacts: vec![Artifact::table("stability.csv", &["pair", "t", "distance", "bound"], rows)],
    })
}

pub fn overall(checks: &[Check]) -> Verdict {
    Verdict::combine(checks.iter().map(|c| c.verdict))
}
