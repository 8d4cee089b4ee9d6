use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constants::{dist, stieltjes_k1, KVariant, Profile, XiScaling};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::levy_noise::{LevyNoise, LevyTriplet};
use crate::metrics;
use crate::mkv::{run_particles, LawFlow, LawSource, MkvDrift, ParticleEnsemble, Record};
use crate::rng::{Domain, Streams};
use crate::sde_core::{check_finite, Sigma};
use crate::stats;
use crate::subordinator::{regularize, sample_path_with, BernsteinSpec, IncrementSampler, SamplerConfig, SubordinatorPath};

use super::inequalities::TestFunction;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnackConfig {
    pub t_end: f64,
    pub theta: f64,
    pub p: f64,
    pub epsilon: f64,
    /// λ(T) ≥ sup_{t≤T} ‖σ(t)^{-1}‖; computed from σ on the grid when absent
    pub lambda: Option<f64>,
    pub contact_threshold: f64,
    pub f: TestFunction,
    pub dt: f64,
    pub k_variant: KVariant,
    pub xi_scaling: XiScaling,
    pub sampler: SamplerConfig,
}

impl Default for HarnackConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            theta: 1.0,
            p: 2.0,
            epsilon: 0.1,
            lambda: None,
            contact_threshold: 1e-4,
            f: TestFunction::GaussBump,
            dt: 0.01,
            k_variant: KVariant::Printed,
            xi_scaling: XiScaling::Terminal,
            sampler: SamplerConfig::default(),
        }
    }
}

impl HarnackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("T must be positive, got {}", self.t_end));
        }
        if !(self.theta >= 1.0) {
            return bad(format!("θ must be ≥ 1, got {}", self.theta));
        }
        if !(self.p > 1.0) {
            return bad(format!("p must be > 1, got {}", self.p));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("ε must lie in (0,1), got {}", self.epsilon));
        }
        if !(self.contact_threshold > 0.0) {
            return bad("contact threshold must be positive".into());
        }
        if !(self.dt > 0.0 && self.dt <= self.t_end) {
            return bad(format!("dt must lie in (0, T], got {}", self.dt));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) {
                return bad(format!("λ must be nonnegative, got {l}"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::with_step(self.t_end, self.dt)
    }

    /// λ(T), spot-checking ‖σ(t)^{-1}‖ ≤ λ on the grid.
    pub fn lambda_for(&self, sigma: &Sigma, dim: usize, grid: &TimeGrid) -> Result<f64> {
        let mut sup: f64 = 0.0;
        for &t in grid.times() {
            sup = sup.max(sigma.inverse_norm(t, dim)?);
        }
        match self.lambda {
            None => Ok(sup),
            Some(l) if l + 1e-12 >= sup => Ok(l),
            Some(l) => Err(Error::Assumption {
                assumption: "H5",
                detail: format!("‖σ(t)^{{-1}}‖ reaches {sup} on the grid but λ(T) = {l}"),
            }),
        }
    }
}

/// Everything fixed across coupling runs and inequality checks.
pub struct HarnackProblem<'a> {
    pub drift: &'a MkvDrift,
    pub sigma: &'a Sigma,
    pub subordinator: &'a BernsteinSpec,
    pub mu0: &'a ParticleEnsemble,
    pub nu0: &'a ParticleEnsemble,
}

/// Precomputed reference flows, constants and the optimal pairing of the
/// initial ensembles.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub grid: TimeGrid,
    pub profile: Profile,
    pub flow_mu: LawFlow,
    pub flow_nu: LawFlow,
    /// `(mu0 index, nu0 index)` of an optimal W₂ matching
    pub pairs: Vec<(usize, usize)>,
    pub w_theta: f64,
    pub w2: f64,
    pub lambda: f64,
    pub sampler: IncrementSampler,
}

impl Prepared {
    pub fn k(&self) -> f64 {
        self.profile.k_terminal()
    }

    pub fn pair(&self, j: usize, problem: &HarnackProblem<'_>) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = self.pairs[j];
        (problem.mu0.point(a).to_vec(), problem.nu0.point(b).to_vec())
    }
}

pub fn optimal_pairs(mu0: &ParticleEnsemble, nu0: &ParticleEnsemble) -> Result<Vec<(usize, usize)>> {
    if mu0.len() != nu0.len() || mu0.dim != nu0.dim {
        return Err(Error::precondition("initial ensembles must have equal size and dimension"));
    }
    if mu0.dim == 1 {
        let order = |e: &ParticleEnsemble| {
            let mut idx: Vec<usize> = (0..e.len()).collect();
            idx.sort_by(|&i, &j| e.points[i].total_cmp(&e.points[j]));
            idx
        };
        return Ok(order(mu0).into_iter().zip(order(nu0)).collect());
    }
    let (m, _) = metrics::optimal_matching(&mu0.points, &nu0.points, mu0.dim, 2.0)?;
    Ok(m.into_iter().enumerate().collect())
}

/// Run the reference particle systems from μ0 and ν0, tabulate K₁ and K,
/// and match the initial ensembles.
pub fn prepare(problem: &HarnackProblem<'_>, config: &HarnackConfig, streams: &Streams) -> Result<Prepared> {
    config.validate()?;
    let d = problem.mu0.dim;
    let check = problem.subordinator.check_h1prime(config.theta);
    if !check.holds {
        return Err(Error::Assumption {
            assumption: "H1'",
            detail: format!(
                "{} fails for θ = {} (diagnostic {})",
                problem.subordinator.name(),
                config.theta,
                check.diagnostic
            ),
        });
    }
    let grid = config.grid()?;
    let lambda = config.lambda_for(problem.sigma, d, &grid)?;
    let drift = problem.drift.clone().with_theta(config.theta);
    let noise = LevyNoise::with_config(&LevyTriplet::subordinate(d, problem.subordinator.clone()), &config.sampler)?;
    // both reference systems share their noise, particle i of one paired
    // optimally with particle i of the other
    let pairs = optimal_pairs(problem.mu0, problem.nu0)?;
    let reorder = |e: &ParticleEnsemble, pick: fn(&(usize, usize)) -> usize| ParticleEnsemble {
        dim: d,
        points: pairs.iter().flat_map(|q| e.point(pick(q)).to_vec()).collect(),
    };
    let (mu_r, nu_r) = (reorder(problem.mu0, |q| q.0), reorder(problem.nu0, |q| q.1));
    let flow_mu = run_particles(
        &drift,
        problem.sigma,
        &noise,
        &mu_r,
        &grid,
        streams,
        LawSource::Live,
        Record::Terminal,
    )?;
    let flow_nu = run_particles(
        &drift,
        problem.sigma,
        &noise,
        &nu_r,
        &grid,
        streams,
        LawSource::Live,
        Record::Terminal,
    )?;
    let profile = Profile::new(&drift, grid.times(), config.theta, config.k_variant);
    let w_theta = metrics::wasserstein(&problem.mu0.points, &problem.nu0.points, d, config.theta)?.value;
    let w2 = metrics::wasserstein(&problem.mu0.points, &problem.nu0.points, d, 2.0)?.value;
    Ok(Prepared {
        pairs,
        sampler: IncrementSampler::new(problem.subordinator, &config.sampler)?,
        grid,
        profile,
        flow_mu,
        flow_nu,
        w_theta,
        w2,
        lambda,
    })
}

/// The control Φ applied to Y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Control {
    /// ξ(t)(X-Y)/|X-Y| until contact, then keep Y on X
    Coupling,
    /// Ψ ≡ psi·e₁ in subordination time while t < until
    Constant { psi: f64, until: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingOptions {
    pub control: Control,
    /// multiplies ⟨M⟩ in the exponent of R; anything but 1 breaks the
    /// martingale normalisation
    pub bracket_scale: f64,
    pub keep_paths: bool,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self {
            control: Control::Coupling,
            bracket_scale: 1.0,
            keep_paths: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingRun {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    /// row-major states per grid point, empty unless paths are kept
    pub x_path: Vec<f64>,
    pub y_path: Vec<f64>,
    pub xi_trace: Vec<f64>,
    pub bracket_trace: Vec<f64>,
    /// first contact time, `None` when X and Y are still apart at T
    pub tau: Option<f64>,
    pub martingale: f64,
    pub bracket: f64,
    pub r: f64,
    pub terminal_gap: f64,
    /// `2λ²{|X₀-Y₀|² + K²W²}/∫K₁dℓ^ε`, for the ξ control only
    pub bracket_bound: Option<f64>,
    /// steps after contact where keeping Y on X needed more than ξ
    pub slips: usize,
    pub cost_denominator: f64,
}

impl CouplingRun {
    pub fn bracket_ok(&self) -> bool {
        self.bracket >= 0.0 && self.bracket_bound.is_none_or(|b| self.bracket <= b + 1e-8)
    }

    pub fn write_csv<W: std::io::Write>(&self, times: &[f64], mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,gap,xi,bracket")?;
        let d = self.x0.len();
        for (i, t) in times.iter().enumerate().take(self.xi_trace.len()) {
            let gap = dist(&self.x_path[i * d..(i + 1) * d], &self.y_path[i * d..(i + 1) * d]);
            writeln!(w, "{t},{gap},{},{}", self.xi_trace[i], self.bracket_trace[i])?;
        }
        Ok(())
    }
}

/// Solve X (drift frozen at the μ-flow) and Y (drift frozen at the ν-flow
/// plus the control) on the grid of `reg`, driven by the same Brownian
/// motion run at the clock ℓ^ε_t - ℓ^ε_0, and accumulate
/// `M = -∫⟨Ψ, dW⟩`, `⟨M⟩ = ∫|Ψ|²` and `R = exp(M - ½⟨M⟩)`.
#[allow(clippy::too_many_arguments)]
pub fn coupled_solve<R: Rng + ?Sized>(
    config: &HarnackConfig,
    drift: &MkvDrift,
    sigma: &Sigma,
    profile: &Profile,
    flows: (&LawFlow, &LawFlow),
    x0: &[f64],
    y0: &[f64],
    w_init: f64,
    lambda: f64,
    reg: &SubordinatorPath,
    rng: &mut R,
    options: &CouplingOptions,
) -> Result<CouplingRun> {
    let d = x0.len();
    let times = reg.horizon_times();
    let ell = reg.horizon_values();
    if reg.epsilon.is_none() {
        return Err(Error::precondition("coupled_solve needs a regularised path"));
    }
    if times.len() != profile.times.len() || flows.0.grid.len() != times.len() || flows.1.grid.len() != times.len() {
        return Err(Error::precondition("path, profile and reference flows must share one grid"));
    }
    let denom = stieltjes_k1(&profile.k1, reg)?;
    let gap0 = dist(x0, y0);
    let kt = profile.k_terminal();
    let threshold = config.contact_threshold * (1.0 + gap0);
    let xi_at = |i: usize| {
        let k = match config.xi_scaling {
            XiScaling::Running => profile.k[i],
            XiScaling::Terminal => kt,
        };
        (gap0 + k * w_init) * profile.k1[i].sqrt() / denom
    };

    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut contact = gap0 <= threshold;
    let mut tau = contact.then_some(0.0);
    if contact {
        y.copy_from_slice(&x);
    }
    let (mut m, mut bracket, mut slips) = (0.0, 0.0, 0);
    let mut run = CouplingRun {
        x0: x0.to_vec(),
        y0: y0.to_vec(),
        x_path: vec![],
        y_path: vec![],
        xi_trace: vec![],
        bracket_trace: vec![],
        tau: None,
        martingale: 0.0,
        bracket: 0.0,
        r: 1.0,
        terminal_gap: 0.0,
        bracket_bound: None,
        slips: 0,
        cost_denominator: denom,
    };
    let (mut bx, mut by) = (vec![0.0; d], vec![0.0; d]);
    let (mut phi, mut psi, mut dw, mut sdw) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut pred = vec![0.0; d];
    let steps = times.len() - 1;
    for i in 0..=steps {
        let xi = xi_at(i);
        if options.keep_paths {
            run.x_path.extend_from_slice(&x);
            run.y_path.extend_from_slice(&y);
            run.xi_trace.push(xi);
            run.bracket_trace.push(bracket);
        }
        if i == steps {
            break;
        }
        let t = times[i];
        let dt = times[i + 1] - t;
        let dl = ell[i + 1] - ell[i];
        drift.eval(t, &x, flows.0.summary_at_step(i), &mut bx);
        drift.eval(t, &y, flows.1.summary_at_step(i), &mut by);

        match &options.control {
            Control::Constant { psi: c, until } => {
                psi.iter_mut().for_each(|v| *v = 0.0);
                if t < *until {
                    psi[0] = *c;
                }
                phi.iter_mut().for_each(|v| *v = 0.0);
                sigma.apply_add(t, &psi, &mut phi);
            }
            Control::Coupling => {
                // gap after this step without control; the noise cancels
                for k in 0..d {
                    pred[k] = x[k] - y[k] + (bx[k] - by[k]) * dt;
                }
                let need = norm(&pred);
                if need <= xi * dl {
                    for k in 0..d {
                        phi[k] = if dl > 0.0 { pred[k] / dl } else { 0.0 };
                    }
                    if !contact {
                        contact = true;
                        tau = Some(times[i + 1]);
                    }
                } else {
                    let gap: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                    let (dir, len) = if contact || norm(&gap) == 0.0 {
                        (pred.clone(), need)
                    } else {
                        let l = norm(&gap);
                        (gap, l)
                    };
                    for k in 0..d {
                        phi[k] = xi * dir[k] / len;
                    }
                    if contact {
                        slips += 1;
                    }
                }
                sigma.solve(t, &phi, &mut psi)?;
            }
        }

        let sd = dl.max(0.0).sqrt();
        for v in dw.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = z * sd;
        }
        m -= psi.iter().zip(&dw).map(|(a, b)| a * b).sum::<f64>();
        bracket += psi.iter().map(|a| a * a).sum::<f64>() * dl;

        sdw.iter_mut().for_each(|v| *v = 0.0);
        sigma.apply_add(t, &dw, &mut sdw);
        for k in 0..d {
            x[k] += bx[k] * dt + sdw[k];
            y[k] += by[k] * dt + phi[k] * dl + sdw[k];
        }
        if matches!(options.control, Control::Coupling) && !contact && dist(&x, &y) <= threshold {
            contact = true;
            tau = Some(times[i + 1]);
            y.copy_from_slice(&x);
        }
        check_finite(&x, i + 1, times[i + 1])?;
        check_finite(&y, i + 1, times[i + 1])?;
    }
    run.tau = tau;
    run.martingale = m;
    run.bracket = bracket;
    run.r = (m - 0.5 * options.bracket_scale * bracket).exp();
    run.terminal_gap = dist(&x, &y);
    run.slips = slips;
    if matches!(options.control, Control::Coupling) {
        run.bracket_bound = Some(2.0 * lambda * lambda * (gap0 * gap0 + kt * kt * w_init * w_init) / denom);
    }
    Ok(run)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `n` independent coupling runs. Run `i` uses stream `(Coupling, i)` for
/// the initial pair, its subordinator path and its Brownian increments.
pub fn coupling_runs(
    problem: &HarnackProblem<'_>,
    config: &HarnackConfig,
    prepared: &Prepared,
    n: usize,
    streams: &Streams,
    options: &CouplingOptions,
) -> Result<Vec<CouplingRun>> {
    let drift = problem.drift.clone().with_theta(config.theta);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(Domain::Coupling, i as u64);
            let j = rng.random_range(0..prepared.pairs.len());
            let (x0, y0) = prepared.pair(j, problem);
            let path = sample_path_with(
                &prepared.sampler,
                &prepared.grid,
                config.sampler.extension.max(config.epsilon),
                &mut rng,
            )?;
            let reg = regularize(&path, config.epsilon)?;
            coupled_solve(
                config,
                &drift,
                problem.sigma,
                &prepared.profile,
                (&prepared.flow_mu, &prepared.flow_nu),
                &x0,
                &y0,
                prepared.w_theta,
                prepared.lambda,
                &reg,
                &mut rng,
                options,
            )
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GirsanovReport {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
    pub pass: bool,
}

/// `|mean(R) - 1| ≤ 3 SE` over at least 10³ runs.
pub fn girsanov_mean_check(runs: &[CouplingRun]) -> Result<GirsanovReport> {
    if runs.len() < 1000 {
        return Err(Error::precondition(format!("need at least 1000 runs, got {}", runs.len())));
    }
    let r: Vec<f64> = runs.iter().map(|c| c.r).collect();
    let ms = stats::mean_se(&r);
    Ok(GirsanovReport {
        mean: ms.mean,
        se: ms.se,
        n: ms.n,
        pass: (ms.mean - 1.0).abs() <= 3.0 * ms.se,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSummary {
    pub runs: usize,
    pub coupled_fraction: f64,
    pub bracket_violations: usize,
    pub max_terminal_gap: f64,
    pub runs_with_slips: usize,
}

pub fn summarize(runs: &[CouplingRun]) -> CouplingSummary {
    let n = runs.len();
    CouplingSummary {
        runs: n,
        coupled_fraction: runs.iter().filter(|r| r.tau.is_some()).count() as f64 / n.max(1) as f64,
        bracket_violations: runs.iter().filter(|r| !r.bracket_ok()).count(),
        max_terminal_gap: runs.iter().map(|r| r.terminal_gap).fold(0.0, f64::max),
        runs_with_slips: runs.iter().filter(|r| r.slips > 0).count(),
    }
}
