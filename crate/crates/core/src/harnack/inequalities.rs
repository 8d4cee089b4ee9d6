use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constants::dist;
use super::coupling::{CouplingRun, HarnackConfig, HarnackProblem, Prepared};
use crate::error::{Error, Result};
use crate::rng::{Domain, Streams};
use crate::stats;
use crate::subordinator::{regularize, sample_path_with, SubordinatorPath};

/// Bounded test functions for the Harnack checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum TestFunction {
    /// `1 + e^{-|x|²}`
    #[default]
    GaussBump,
    /// `1 + (1 + |x|²)^{-1}`
    CauchyBump,
    /// `1 + exp(1 - 1/(1 - |x|²))` on the unit ball, 1 outside
    SmoothBump,
    /// `e^{-|x|²}`
    Gauss,
    Constant {
        c: f64,
    },
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self {
            TestFunction::GaussBump => 1.0 + (-r2).exp(),
            TestFunction::CauchyBump => 1.0 + 1.0 / (1.0 + r2),
            TestFunction::SmoothBump => {
                if r2 < 1.0 {
                    1.0 + (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    1.0
                }
            }
            TestFunction::Gauss => (-r2).exp(),
            TestFunction::Constant { c } => *c,
        }
    }

    pub fn catalog() -> &'static [(&'static str, &'static str)] {
        &[
            ("gauss_bump", "1 + exp(-|x|^2)"),
            ("cauchy_bump", "1 + 1/(1 + |x|^2)"),
            ("smooth_bump", "1 + exp(1 - 1/(1 - |x|^2)) on |x| < 1, else 1"),
            ("gauss", "exp(-|x|^2)"),
            ("constant", "c"),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Monte Carlo estimate of `E(∫_0^T K₁ dS)^{-1}` over fresh subordinator
/// paths, with a tail-index diagnostic on the samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub se: f64,
    /// one-sided 97.5% upper confidence value
    pub upper: f64,
    pub tail_index: f64,
    pub n: usize,
}

/// Tail index below which a sample mean's SE is not trusted.
pub const MIN_TAIL_INDEX: f64 = 2.0;

fn tail_index(xs: &[f64]) -> f64 {
    stats::hill_tail_index(xs, (xs.len() / 50).max(10))
}

/// `(∫_0^T K₁ dℓ)^{-1}` on the horizon of `path`, with K₁ tabulated on the
/// same grid. Increments are weighted by the cell average of K₁.
pub fn cost_factor(k1: &[f64], path: &SubordinatorPath) -> Result<f64> {
    let v = path.horizon_values();
    if v.len() != k1.len() {
        return Err(Error::precondition("K₁ table and path live on different grids"));
    }
    let s: f64 = (0..v.len() - 1).map(|i| 0.5 * (k1[i] + k1[i + 1]) * (v[i + 1] - v[i])).sum();
    if !(s > 0.0) {
        return Err(Error::Numeric(format!("∫K₁dℓ = {s}")));
    }
    Ok(1.0 / s)
}

/// Cost factor of `path` regularised at each ε.
pub fn cost_factor_by_epsilon(k1: &[f64], path: &SubordinatorPath, eps: &[f64]) -> Result<Vec<f64>> {
    eps.iter().map(|&e| cost_factor(k1, &regularize(path, e)?)).collect()
}

fn cost_samples(prepared: &Prepared, n: usize, streams: &Streams) -> Result<Vec<f64>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(Domain::Auxiliary, i as u64);
            let path = sample_path_with(&prepared.sampler, &prepared.grid, 0.0, &mut rng)?;
            cost_factor(&prepared.profile.k1, &path)
        })
        .collect()
}

pub fn estimate_cost(prepared: &Prepared, n: usize, streams: &Streams) -> Result<CostEstimate> {
    let c = cost_samples(prepared, n, streams)?;
    let ms = stats::mean_se(&c);
    Ok(CostEstimate {
        mean: ms.mean,
        se: ms.se,
        upper: ms.mean + 1.96 * ms.se,
        tail_index: tail_index(&c),
        n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub pass: bool,
    pub verdict: Verdict,
    pub k: f64,
    pub w_theta: f64,
    pub w2: f64,
    pub lambda: f64,
    pub cost: CostEstimate,
    pub note: String,
}

fn verdict(pass: bool, tail: f64) -> Verdict {
    if !(tail >= MIN_TAIL_INDEX) {
        Verdict::Inconclusive
    } else if pass {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn terminal_values(prepared: &Prepared, config: &HarnackConfig) -> (Vec<f64>, Vec<f64>) {
    let eval = |e: &crate::mkv::ParticleEnsemble| (0..e.len()).map(|i| config.f.eval(e.point(i))).collect::<Vec<_>>();
    (eval(prepared.flow_mu.terminal()), eval(prepared.flow_nu.terminal()))
}

/// `P_T log f(ν0) ≤ log P_T f(μ0) + λ²{W₂² + K²W_θ²} E(∫K₁dS)^{-1}`
pub fn log_harnack_check(config: &HarnackConfig, prepared: &Prepared, n_cost: usize, streams: &Streams) -> Result<InequalityReport> {
    let (f_mu, f_nu) = terminal_values(prepared, config);
    if f_mu.iter().chain(&f_nu).any(|&v| !(v >= 1.0)) {
        return Err(Error::precondition("log-Harnack needs f ≥ 1"));
    }
    let logs: Vec<f64> = f_nu.iter().map(|v| v.ln()).collect();
    let lhs = stats::mean_se(&logs);
    let a = stats::mean_se(&f_mu);
    let cost = estimate_cost(prepared, n_cost, streams)?;
    let k = prepared.k();
    let weight = prepared.lambda.powi(2) * (prepared.w2.powi(2) + k * k * prepared.w_theta.powi(2));
    let rhs = a.mean.ln() + weight * cost.mean;
    let rhs_se = ((a.se / a.mean).powi(2) + (weight * cost.se).powi(2)).sqrt();
    let pass = lhs.mean <= rhs + 3.0 * (lhs.se.powi(2) + rhs_se.powi(2)).sqrt();
    Ok(InequalityReport {
        lhs: lhs.mean,
        lhs_se: lhs.se,
        rhs,
        rhs_se,
        pass,
        verdict: verdict(pass, cost.tail_index),
        k,
        w_theta: prepared.w_theta,
        w2: prepared.w2,
        lambda: prepared.lambda,
        cost,
        note: String::new(),
    })
}

/// `(P_T f(ν0))^p ≤ P_T f^p(μ0) (E exp[pλ²/(p-1)² {|X₀-Y₀|² + K²W_θ²} (∫K₁dS)^{-1}])^{p-1}`
/// with (X₀, Y₀) drawn from the optimal pairing.
pub fn power_harnack_check(
    problem: &HarnackProblem<'_>,
    config: &HarnackConfig,
    prepared: &Prepared,
    n_cost: usize,
    streams: &Streams,
) -> Result<InequalityReport> {
    let p = config.p;
    let (f_mu, f_nu) = terminal_values(prepared, config);
    if f_mu.iter().chain(&f_nu).any(|&v| !(v >= 0.0)) {
        return Err(Error::precondition("power-Harnack needs f ≥ 0"));
    }
    let a = stats::mean_se(&f_nu);
    let fp: Vec<f64> = f_mu.iter().map(|v| v.powf(p)).collect();
    let b = stats::mean_se(&fp);
    let k = prepared.k();
    let coef = p * prepared.lambda.powi(2) / (p - 1.0).powi(2);
    let kw2 = (k * prepared.w_theta).powi(2);
    let samples: Vec<(f64, f64)> = (0..n_cost)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(Domain::Auxiliary, i as u64);
            let path = sample_path_with(&prepared.sampler, &prepared.grid, 0.0, &mut rng)?;
            let c = cost_factor(&prepared.profile.k1, &path)?;
            let j = rng.random_range(0..prepared.pairs.len());
            let (x0, y0) = prepared.pair(j, problem);
            let g = dist(&x0, &y0);
            Ok((c, (coef * (g * g + kw2) * c).exp()))
        })
        .collect::<Result<_>>()?;
    let (c, e): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
    let cm = stats::mean_se(&c);
    let em = stats::mean_se(&e);
    let cost = CostEstimate {
        mean: cm.mean,
        se: cm.se,
        upper: cm.mean + 1.96 * cm.se,
        tail_index: tail_index(&c),
        n: n_cost,
    };
    let lhs = a.mean.powf(p);
    let lhs_se = p * a.mean.powf(p - 1.0) * a.se;
    let rhs = b.mean * em.mean.powf(p - 1.0);
    let rhs_se = rhs * ((b.se / b.mean).powi(2) + ((p - 1.0) * em.se / em.mean).powi(2)).sqrt();
    let exp_tail = tail_index(&e);
    let finite = rhs.is_finite() && rhs_se.is_finite();
    let pass = finite && lhs <= rhs + 3.0 * (lhs_se.powi(2) + rhs_se.powi(2)).sqrt();
    let mut v = verdict(pass, exp_tail.min(cost.tail_index));
    if !finite {
        v = Verdict::Inconclusive;
    }
    Ok(InequalityReport {
        lhs,
        lhs_se,
        rhs,
        rhs_se,
        pass,
        verdict: v,
        k,
        w_theta: prepared.w_theta,
        w2: prepared.w2,
        lambda: prepared.lambda,
        cost,
        note: format!("exponential-moment factor {} ± {}, tail index {exp_tail}", em.mean, em.se),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    /// Ê[R log R] over coupling runs
    pub surrogate: f64,
    pub surrogate_se: f64,
    /// λ²{W₂² + K²W_θ²} Ê(∫K₁dS)^{-1}
    pub bound: f64,
    pub bound_se: f64,
    pub pass: bool,
    pub verdict: Verdict,
    pub cost: CostEstimate,
}

/// Relative-entropy surrogate from coupling runs against the entropy-cost
/// bound.
pub fn entropy_cost_check(prepared: &Prepared, runs: &[CouplingRun], n_cost: usize, streams: &Streams) -> Result<EntropyReport> {
    if runs.is_empty() {
        return Err(Error::precondition("no coupling runs"));
    }
    let rlr: Vec<f64> = runs.iter().map(|c| if c.r > 0.0 { c.r * c.r.ln() } else { 0.0 }).collect();
    let s = stats::mean_se(&rlr);
    let cost = estimate_cost(prepared, n_cost, streams)?;
    let k = prepared.k();
    let weight = prepared.lambda.powi(2) * (prepared.w2.powi(2) + k * k * prepared.w_theta.powi(2));
    let bound = weight * cost.mean;
    let bound_se = weight * cost.se;
    let pass = s.mean <= bound + 3.0 * (s.se.powi(2) + bound_se.powi(2)).sqrt();
    Ok(EntropyReport {
        surrogate: s.mean,
        surrogate_se: s.se,
        bound,
        bound_se,
        pass,
        verdict: verdict(pass, cost.tail_index),
        cost,
    })
}
