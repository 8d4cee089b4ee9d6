//! Parameter schemas for each experiment kind, and the checks that run
//! before any computation.

use serde::{Deserialize, Serialize};

use mkvlevy_core::harnack::HarnackConfig;
use mkvlevy_core::levy_noise::LevyTriplet;
use mkvlevy_core::mkv::{DriftSpec, InitialLaw, MkvDrift};
use mkvlevy_core::rng::Domain;
use mkvlevy_core::subordinator::{BernsteinSpec, SamplerConfig};
use mkvlevy_core::{Error, Streams};

use crate::config::{locate_key, ConfigError, ExperimentConfig, Parameters};

fn one() -> f64 {
    1.0
}
fn paths_default() -> usize {
    100_000
}
fn rs_default() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn checkpoints_default() -> usize {
    21
}
fn bootstrap_default() -> usize {
    200
}
fn rate_tol_default() -> f64 {
    0.15
}
fn moment_tol_default() -> f64 {
    0.05
}
fn picard_tol_default() -> f64 {
    1e-8
}
fn max_iter_default() -> usize {
    20
}
fn picard_checkpoints_default() -> usize {
    20
}
fn min_iter_default() -> usize {
    4
}
fn r2_default() -> f64 {
    0.8
}
fn dt_default() -> f64 {
    0.01
}
fn doublings_default() -> usize {
    6
}
fn particles_default() -> usize {
    2000
}
fn cost_default() -> usize {
    10_000
}
fn sizes_default() -> Vec<usize> {
    vec![1000, 4000, 16000]
}
fn repeats_default() -> usize {
    4
}
fn refinements_default() -> usize {
    1
}
fn corr_tol_default() -> f64 {
    5e-2
}
fn oracle_tol_default() -> f64 {
    2e-2
}
fn stab_checkpoints_default() -> usize {
    8
}
fn slack_default() -> f64 {
    0.1
}

/// Driving noise of the particle systems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Brownian,
    /// `W_{S_t}` with `S` given by its Bernstein function
    Subordinate {
        subordinator: BernsteinSpec,
    },
}

impl NoiseSpec {
    pub fn triplet(&self, dim: usize) -> LevyTriplet {
        match self {
            NoiseSpec::Brownian => LevyTriplet::brownian(dim),
            NoiseSpec::Subordinate { subordinator } => LevyTriplet::subordinate(dim, subordinator.clone()),
        }
    }

    pub fn subordinator(&self) -> Option<&BernsteinSpec> {
        match self {
            NoiseSpec::Brownian => None,
            NoiseSpec::Subordinate { subordinator } => Some(subordinator),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubcheckParams {
    pub subordinator: BernsteinSpec,
    #[serde(default = "paths_default")]
    pub paths: usize,
    #[serde(default = "rs_default")]
    pub rs: Vec<f64>,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default)]
    pub sampler: SamplerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsParams {
    /// must not depend on the law
    pub drift: DriftSpec,
    pub noise: NoiseSpec,
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub steps: usize,
    /// the refinement run uses twice as many
    pub paths: usize,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default = "moment_tol_default")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardParams {
    pub drift: DriftSpec,
    pub noise: NoiseSpec,
    pub mu0: InitialLaw,
    pub particles: usize,
    pub t_end: f64,
    pub steps: usize,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default = "picard_tol_default")]
    pub tol: f64,
    #[serde(default = "max_iter_default")]
    pub max_iter: usize,
    #[serde(default = "picard_checkpoints_default")]
    pub checkpoints: usize,
    #[serde(default = "min_iter_default")]
    pub min_iterations: usize,
    #[serde(default = "r2_default")]
    pub min_r2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionParams {
    pub drift: DriftSpec,
    pub noise: NoiseSpec,
    pub mu0: InitialLaw,
    pub nu0: InitialLaw,
    pub particles: usize,
    pub t_end: f64,
    pub steps: usize,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default = "checkpoints_default")]
    pub checkpoints: usize,
    #[serde(default = "bootstrap_default")]
    pub bootstrap: usize,
    /// relative tolerance of the fitted rate against κ
    #[serde(default = "rate_tol_default")]
    pub rate_tolerance: f64,
    /// the bound is attained (linear drift, point masses): also require
    /// Ŵ(t) within max(5%, 3 SE) of it
    #[serde(default)]
    pub tight_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantParams {
    pub drift: DriftSpec,
    pub noise: NoiseSpec,
    pub mu0: InitialLaw,
    pub particles: usize,
    pub burn_in: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default = "dt_default")]
    pub dt: f64,
    #[serde(default = "doublings_default")]
    pub doublings: usize,
    #[serde(default = "bootstrap_default")]
    pub bootstrap: usize,
    /// accepted range of the terminal empirical variance
    #[serde(default)]
    pub variance_range: Option<[f64; 2]>,
    #[serde(default = "one")]
    pub fixed_point_t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnackParams {
    pub drift: DriftSpec,
    pub subordinator: BernsteinSpec,
    pub mu0: InitialLaw,
    pub nu0: InitialLaw,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "particles_default")]
    pub particles: usize,
    #[serde(default)]
    pub harnack: HarnackConfig,
    /// subordinator paths for E(∫K₁dS)^{-1}
    #[serde(default = "cost_default")]
    pub n_cost: usize,
    /// coupling runs (entropy kind)
    #[serde(default = "cost_default")]
    pub runs: usize,
    /// entropy kind: also check E R = 1 and the pathwise bracket bound
    #[serde(default)]
    pub girsanov: bool,
    /// entropy kind: a doubled bracket in R must fail the normalisation
    #[serde(default)]
    pub negative_control: bool,
    /// entropy kind: required fraction of runs with τ ≤ T
    #[serde(default)]
    pub min_coupled_fraction: Option<f64>,
    /// entropy kind: coupled fraction must not drop when dt halves
    #[serde(default)]
    pub refine_dt: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub l: f64,
    pub n: usize,
    pub alpha: f64,
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StableOracle {
    pub t0: f64,
    pub t1: f64,
    #[serde(default = "oracle_tol_default")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrespondParams {
    pub drift: DriftSpec,
    pub mu0: InitialLaw,
    pub t_end: f64,
    pub grid: GridParams,
    #[serde(default = "sizes_default")]
    pub sizes: Vec<usize>,
    #[serde(default = "repeats_default")]
    pub repeats: usize,
    #[serde(default = "dt_default")]
    pub particle_dt: f64,
    #[serde(default = "refinements_default")]
    pub refinements: usize,
    #[serde(default = "corr_tol_default")]
    pub tolerance: f64,
    /// free evolution from the stable law at t0 against the Fourier
    /// oracle at t1
    #[serde(default)]
    pub stable_oracle: Option<StableOracle>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityParams {
    pub drift: DriftSpec,
    pub grid: GridParams,
    pub pairs: Vec<[InitialLaw; 2]>,
    pub t_end: f64,
    #[serde(default = "stab_checkpoints_default")]
    pub checkpoints: usize,
    #[serde(default = "slack_default")]
    pub slack: f64,
}

struct Checker<'a> {
    source: &'a str,
}

impl Checker<'_> {
    fn err(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        let (l, c) = locate_key(self.source, key);
        ConfigError::at(l, c, msg)
    }

    fn require(&self, ok: bool, key: &str, msg: impl Into<String>) -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(self.err(key, msg))
        }
    }

    fn positive(&self, v: f64, key: &str) -> Result<(), ConfigError> {
        self.require(v > 0.0 && v.is_finite(), key, format!("{key} must be positive and finite, got {v}"))
    }

    fn count(&self, v: usize, min: usize, key: &str) -> Result<(), ConfigError> {
        self.require(v >= min, key, format!("{key} must be at least {min}, got {v}"))
    }

    fn core(&self, key: &str, r: mkvlevy_core::Result<()>) -> Result<(), ConfigError> {
        r.map_err(|e| self.err(key, format!("{key}: {e}")))
    }

    fn drift(&self, spec: &DriftSpec, dim: usize, theta: f64) -> Result<MkvDrift, ConfigError> {
        self.require(theta >= 1.0, "theta", format!("θ must be ≥ 1, got {theta}"))?;
        spec.build(dim, theta).map_err(|e| self.err("drift", format!("drift: {e}")))
    }

    fn law(&self, law: &InitialLaw, key: &str, dim: usize) -> Result<(), ConfigError> {
        self.core(key, law.validate())?;
        self.require(law.dim() == dim, key, format!("{key} has dimension {}, expected {dim}", law.dim()))
    }

    fn subordinator(&self, spec: &BernsteinSpec, key: &str, theta: Option<f64>) -> Result<(), ConfigError> {
        self.core(key, spec.validate())?;
        if let Some(theta) = theta {
            let h = spec.check_h1prime(theta);
            if !h.holds {
                return Err(self.err(
                    key,
                    format!(
                        "assumption (H1') fails: {} subordinator has no finite ∫_(1,∞) x^(θ/2) ν(dx) for θ = {theta} (diagnostic {})",
                        spec.name(),
                        h.diagnostic
                    ),
                ));
            }
        }
        Ok(())
    }

    fn noise(&self, noise: &NoiseSpec, theta: f64) -> Result<(), ConfigError> {
        match noise.subordinator() {
            Some(s) => self.subordinator(s, "noise", Some(theta)),
            None => Ok(()),
        }
    }

    /// Spot checks of the monotonicity and growth conditions on samples of
    /// the configured initial laws.
    fn drift_assumptions(&self, drift: &MkvDrift, laws: &[&InitialLaw], t_max: f64, seed: u64) -> Result<(), ConfigError> {
        let streams = Streams::new(seed).derive(0xa55e);
        let ens: Vec<_> = laws
            .iter()
            .enumerate()
            .map(|(i, l)| l.sample(200, &streams.derive(i as u64)))
            .collect::<mkvlevy_core::Result<_>>()
            .map_err(|e| self.err("drift", e.to_string()))?;
        let mut pairs: Vec<_> = ens.iter().map(|e| (e.clone(), e.clone())).collect();
        for w in ens.windows(2) {
            pairs.push((w[0].clone(), w[1].clone()));
        }
        let mut rng = streams.stream(Domain::AssumptionCheck, 0);
        let wrap = |e: Error| match e {
            Error::Assumption { assumption, detail } => self.err("drift", format!("assumption ({assumption}) fails: {detail}")),
            other => self.err("drift", other.to_string()),
        };
        drift.check_monotonicity(&pairs, 2000, t_max, 5.0, &mut rng).map_err(wrap)?;
        drift.check_growth(&ens, t_max, 16).map_err(wrap)?;
        Ok(())
    }

    fn grid(&self, g: &GridParams) -> Result<(), ConfigError> {
        self.require(
            g.alpha > 0.5 && g.alpha < 1.0,
            "alpha",
            format!("grid α must lie in (1/2, 1), got {}", g.alpha),
        )?;
        self.positive(g.l, "l")?;
        self.count(g.n, 4, "n")?;
        if let Some(dt) = g.dt {
            self.positive(dt, "dt")?;
        }
        Ok(())
    }
}

/// Schema-level and assumption checks; nothing expensive runs here.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    let c = Checker { source: &cfg.source };
    let seed = cfg.seed;
    match &cfg.parameters {
        Parameters::Subcheck(p) => {
            c.subordinator(&p.subordinator, "subordinator", None)?;
            c.count(p.paths, 2, "paths")?;
            c.require(
                !p.rs.is_empty() && p.rs.iter().all(|r| *r > 0.0),
                "rs",
                "rs must be a nonempty list of positive reals",
            )?;
            c.positive(p.t, "t")?;
        }
        Parameters::Moments(p) => {
            let dim = p.x0.len();
            c.require(dim >= 1, "x0", "x0 must be nonempty")?;
            let d = c.drift(&p.drift, dim, p.theta)?;
            c.require(
                d.law_free,
                "drift",
                format!("the moments kind needs a law-free drift, '{}' depends on μ", d.name),
            )?;
            c.noise(&p.noise, p.theta)?;
            c.positive(p.t_end, "t_end")?;
            c.count(p.steps, 1, "steps")?;
            c.count(p.paths, 2, "paths")?;
            c.positive(p.tolerance, "tolerance")?;
            let x0 = InitialLaw::PointMass { x: p.x0.clone() };
            c.drift_assumptions(&d, &[&x0], p.t_end, seed)?;
        }
        Parameters::Picard(p) => {
            let dim = p.mu0.dim();
            let d = c.drift(&p.drift, dim, p.theta)?;
            c.law(&p.mu0, "mu0", dim)?;
            c.noise(&p.noise, p.theta)?;
            c.count(p.particles, 2, "particles")?;
            c.positive(p.t_end, "t_end")?;
            c.count(p.steps, 1, "steps")?;
            c.positive(p.tol, "tol")?;
            c.count(p.max_iter, 1, "max_iter")?;
            c.count(p.checkpoints, 2, "checkpoints")?;
            c.drift_assumptions(&d, &[&p.mu0], p.t_end, seed)?;
        }
        Parameters::Contraction(p) => {
            let dim = p.mu0.dim();
            let d = c.drift(&p.drift, dim, p.theta)?;
            c.law(&p.mu0, "mu0", dim)?;
            c.law(&p.nu0, "nu0", dim)?;
            c.noise(&p.noise, p.theta)?;
            c.count(p.particles, 2, "particles")?;
            c.positive(p.t_end, "t_end")?;
            c.count(p.steps, 1, "steps")?;
            c.positive(p.sigma, "sigma")?;
            c.count(p.checkpoints, 2, "checkpoints")?;
            c.count(p.bootstrap, 2, "bootstrap")?;
            c.drift_assumptions(&d, &[&p.mu0, &p.nu0], p.t_end, seed)?;
        }
        Parameters::Invariant(p) => {
            let dim = p.mu0.dim();
            let d = c.drift(&p.drift, dim, p.theta)?;
            c.law(&p.mu0, "mu0", dim)?;
            c.noise(&p.noise, p.theta)?;
            c.count(p.particles, 2, "particles")?;
            c.positive(p.burn_in, "burn_in")?;
            c.positive(p.dt, "dt")?;
            c.positive(p.sigma, "sigma")?;
            c.positive(p.fixed_point_t, "fixed_point_t")?;
            c.count(p.bootstrap, 2, "bootstrap")?;
            if let Some([lo, hi]) = p.variance_range {
                c.require(lo <= hi, "variance_range", "variance_range must be [low, high]")?;
            }
            c.require(
                d.kappa(0.0) > 0.0,
                "drift",
                format!(
                    "an invariant measure needs κ = -(κ₁+κ₂)/2 > 0, drift '{}' has κ = {}",
                    d.name,
                    d.kappa(0.0)
                ),
            )?;
            c.drift_assumptions(&d, &[&p.mu0], p.burn_in, seed)?;
        }
        Parameters::Harnack(p) => {
            let h = &p.harnack;
            c.core("harnack", h.validate())?;
            let dim = p.mu0.dim();
            let d = c.drift(&p.drift, dim, h.theta)?;
            c.law(&p.mu0, "mu0", dim)?;
            c.law(&p.nu0, "nu0", dim)?;
            c.subordinator(&p.subordinator, "subordinator", Some(h.theta))?;
            c.positive(p.sigma, "sigma")?;
            c.count(p.particles, 2, "particles")?;
            c.count(p.n_cost, 10, "n_cost")?;
            c.count(p.runs, 1, "runs")?;
            if p.girsanov || p.negative_control {
                c.count(p.runs, 1000, "runs")?;
            }
            if let Some(f) = p.min_coupled_fraction {
                c.require(
                    (0.0..=1.0).contains(&f),
                    "min_coupled_fraction",
                    "min_coupled_fraction must lie in [0, 1]",
                )?;
            }
            c.drift_assumptions(&d, &[&p.mu0, &p.nu0], h.t_end, seed)?;
        }
        Parameters::FpkeCorrespond(p) => {
            c.grid(&p.grid)?;
            let d = c.drift(&p.drift, 1, 1.0)?;
            c.law(&p.mu0, "mu0", 1)?;
            c.require(p.t_end >= 0.0 && p.t_end.is_finite(), "t_end", "t_end must be ≥ 0")?;
            c.require(
                !p.sizes.is_empty() && p.sizes.iter().all(|n| *n >= 2),
                "sizes",
                "sizes must be a nonempty list of integers ≥ 2",
            )?;
            c.count(p.repeats, 1, "repeats")?;
            c.positive(p.particle_dt, "particle_dt")?;
            c.positive(p.tolerance, "tolerance")?;
            if let Some(o) = &p.stable_oracle {
                c.require(o.t0 > 0.0 && o.t1 > o.t0, "stable_oracle", "stable_oracle needs 0 < t0 < t1")?;
            }
            c.subordinator(&BernsteinSpec::Stable { alpha: p.grid.alpha }, "grid", Some(1.0))?;
            c.drift_assumptions(&d, &[&p.mu0], p.t_end.max(1e-3), seed)?;
        }
        Parameters::FpkeStability(p) => {
            c.grid(&p.grid)?;
            let d = c.drift(&p.drift, 1, 1.0)?;
            c.require(!p.pairs.is_empty(), "pairs", "pairs must be nonempty")?;
            for [a, b] in &p.pairs {
                c.law(a, "pairs", 1)?;
                c.law(b, "pairs", 1)?;
            }
            c.positive(p.t_end, "t_end")?;
            c.count(p.checkpoints, 1, "checkpoints")?;
            c.require(p.slack >= 0.0, "slack", "slack must be ≥ 0")?;
            let laws: Vec<&InitialLaw> = p.pairs.iter().flatten().collect();
            c.drift_assumptions(&d, &laws, p.t_end, seed)?;
        }
    }
    Ok(())
}
