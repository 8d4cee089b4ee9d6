use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::metrics;
use crate::sde_core::DriftField;

/// The part of a law a drift may look at: its mean and θ-th absolute moment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawSummary {
    pub mean: Vec<f64>,
    /// μ(|·|^θ)
    pub theta_moment: f64,
}

impl LawSummary {
    pub fn point(x: &[f64], theta: f64) -> Self {
        Self {
            mean: x.to_vec(),
            theta_moment: x.iter().map(|v| v * v).sum::<f64>().sqrt().powf(theta),
        }
    }
}

/// Anything that can produce a [`LawSummary`]: particle ensembles, grid
/// densities.
pub trait Law {
    fn dim(&self) -> usize;
    fn mean(&self) -> Vec<f64>;
    fn abs_moment(&self, theta: f64) -> f64;

    fn summary(&self, theta: f64) -> LawSummary {
        LawSummary {
            mean: self.mean(),
            theta_moment: self.abs_moment(theta),
        }
    }
}

type Field = dyn Fn(f64, &[f64], &LawSummary, &mut [f64]) + Send + Sync;
type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// `b(t, x, μ)` together with the constants of the structural assumptions:
///
/// * `2⟨b(t,x,μ) - b(t,y,ν), x - y⟩ ≤ κ₁(t)|x-y|² + κ₂(t) W_θ(μ,ν)|x-y|`
/// * `|b(t,0,μ)| ≤ Θ(t)(1 + μ(|·|^θ)^{1/θ})`
#[derive(Clone)]
pub struct MkvDrift {
    pub name: String,
    pub dim: usize,
    pub theta: f64,
    /// b does not depend on μ
    pub law_free: bool,
    /// b does not depend on t
    pub homogeneous: bool,
    field: Arc<Field>,
    kappa1: Arc<ScalarFn>,
    kappa2: Arc<ScalarFn>,
    growth: Arc<ScalarFn>,
}

impl fmt::Debug for MkvDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MkvDrift")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("theta", &self.theta)
            .finish_non_exhaustive()
    }
}

impl MkvDrift {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        theta: f64,
        field: impl Fn(f64, &[f64], &LawSummary, &mut [f64]) + Send + Sync + 'static,
        kappa1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        kappa2: impl Fn(f64) -> f64 + Send + Sync + 'static,
        growth: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            theta,
            law_free: false,
            homogeneous: true,
            field: Arc::new(field),
            kappa1: Arc::new(kappa1),
            kappa2: Arc::new(kappa2),
            growth: Arc::new(growth),
        }
    }

    pub fn law_free(mut self, yes: bool) -> Self {
        self.law_free = yes;
        self
    }

    pub fn homogeneous(mut self, yes: bool) -> Self {
        self.homogeneous = yes;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &[f64], law: &LawSummary, out: &mut [f64]) {
        (self.field)(t, x, law, out)
    }

    pub fn kappa1(&self, t: f64) -> f64 {
        (self.kappa1)(t)
    }

    pub fn kappa2(&self, t: f64) -> f64 {
        (self.kappa2)(t)
    }

    pub fn growth(&self, t: f64) -> f64 {
        (self.growth)(t)
    }

    /// κ = -(κ₁ + κ₂)/2 at time t.
    pub fn kappa(&self, t: f64) -> f64 {
        -(self.kappa1(t) + self.kappa2(t)) / 2.0
    }

    /// The distribution-free drift `b(t, x, law(t))`.
    pub fn freeze(&self, law: impl Fn(f64) -> LawSummary + Send + Sync + 'static) -> DriftField {
        let me = self.clone();
        let k1 = self.kappa1.clone();
        let me0 = self.clone();
        let law = Arc::new(law);
        let law0 = law.clone();
        DriftField::new(
            self.dim,
            move |t, x, out| me.eval(t, x, &law(t), out),
            move |t| k1(t),
            move |t| {
                let mut out = vec![0.0; me0.dim];
                me0.eval(t, &vec![0.0; me0.dim], &law0(t), &mut out);
                out.iter().map(|v| v * v).sum::<f64>().sqrt()
            },
        )
    }

    /// Spot-check the monotonicity condition on random `(t, x, y)` against
    /// the given ensemble pairs; returns the worst excess over the bound.
    pub fn check_monotonicity<R: Rng + ?Sized>(
        &self,
        pairs: &[(ParticleEnsemble, ParticleEnsemble)],
        n: usize,
        t_max: f64,
        radius: f64,
        rng: &mut R,
    ) -> Result<f64> {
        let d = self.dim;
        let prepared: Vec<(LawSummary, LawSummary, f64)> = pairs
            .iter()
            .map(|(mu, nu)| {
                let w = metrics::wasserstein(&mu.points, &nu.points, d, self.theta)?.value;
                Ok((mu.summary(self.theta), nu.summary(self.theta), w))
            })
            .collect::<Result<_>>()?;
        let (mut x, mut y, mut bx, mut by) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let mut worst = f64::NEG_INFINITY;
        for k in 0..n {
            let (mu, nu, w) = &prepared[k % prepared.len().max(1)];
            let t = t_max * rng.random::<f64>();
            for j in 0..d {
                x[j] = radius * (2.0 * rng.random::<f64>() - 1.0);
                y[j] = radius * (2.0 * rng.random::<f64>() - 1.0);
            }
            self.eval(t, &x, mu, &mut bx);
            self.eval(t, &y, nu, &mut by);
            let mut lhs = 0.0;
            let mut dist2 = 0.0;
            for j in 0..d {
                lhs += 2.0 * (bx[j] - by[j]) * (x[j] - y[j]);
                dist2 += (x[j] - y[j]).powi(2);
            }
            let rhs = self.kappa1(t) * dist2 + self.kappa2(t) * w * dist2.sqrt();
            let excess = lhs - rhs;
            worst = worst.max(excess);
            if excess > 1e-6 {
                return Err(Error::Assumption {
                    assumption: "H3",
                    detail: format!("drift '{}': monotonicity bound exceeded by {excess:e} at t={t}", self.name),
                });
            }
        }
        Ok(worst)
    }

    /// Spot-check the growth bound at the origin on the given ensembles.
    pub fn check_growth(&self, laws: &[ParticleEnsemble], t_max: f64, n_times: usize) -> Result<f64> {
        let d = self.dim;
        let zero = vec![0.0; d];
        let mut out = vec![0.0; d];
        let mut worst = f64::NEG_INFINITY;
        for law in laws {
            let s = law.summary(self.theta);
            for k in 0..n_times.max(1) {
                let t = t_max * k as f64 / n_times.max(1) as f64;
                self.eval(t, &zero, &s, &mut out);
                let b0 = out.iter().map(|v| v * v).sum::<f64>().sqrt();
                let bound = self.growth(t) * (1.0 + s.theta_moment.powf(1.0 / self.theta));
                let excess = b0 - bound;
                worst = worst.max(excess);
                if excess > 1e-6 {
                    return Err(Error::Assumption {
                        assumption: "H4",
                        detail: format!(
                            "drift '{}': |b(t,0,μ)| = {b0} exceeds Θ(t)(1+μ(|.|^θ)^(1/θ)) = {bound} at t={t}",
                            self.name
                        ),
                    });
                }
            }
        }
        Ok(worst)
    }

    // ---- built-in drifts ----

    pub fn zero(dim: usize) -> Self {
        Self::new("zero", dim, 1.0, |_, _, _, out| out.fill(0.0), |_| 0.0, |_| 0.0, |_| 0.0).law_free(true)
    }

    pub fn constant(v: Vec<f64>) -> Self {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let dim = v.len();
        Self::new(
            "constant",
            dim,
            1.0,
            move |_, _, _, out| out.copy_from_slice(&v),
            |_| 0.0,
            |_| 0.0,
            move |_| norm,
        )
        .law_free(true)
    }

    /// `b = -βx`
    pub fn ou(dim: usize, beta: f64) -> Self {
        Self::new(
            "ou",
            dim,
            1.0,
            move |_, x, _, out| {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = -beta * v;
                }
            },
            move |_| -2.0 * beta,
            |_| 0.0,
            |_| 0.0,
        )
        .law_free(true)
    }

    /// `b = -βx + γ mean(μ)`; κ₁ = -2β, κ₂ = 2|γ|, Θ = |γ|.
    pub fn meanfield_ou(dim: usize, beta: f64, gamma: f64) -> Self {
        Self::new(
            "meanfield_ou",
            dim,
            1.0,
            move |_, x, law, out| {
                for ((o, v), m) in out.iter_mut().zip(x).zip(&law.mean) {
                    *o = -beta * v + gamma * m;
                }
            },
            move |_| -2.0 * beta,
            move |_| 2.0 * gamma.abs(),
            move |_| gamma.abs(),
        )
    }

    /// `b = x - x³ + γ(mean(μ) - x)` componentwise; κ₁ = 2(1-γ), κ₂ = 2γ.
    pub fn double_well(dim: usize, gamma: f64) -> Self {
        let g = gamma.abs();
        Self::new(
            "double_well",
            dim,
            1.0,
            move |_, x, law, out| {
                for ((o, v), m) in out.iter_mut().zip(x).zip(&law.mean) {
                    *o = v - v * v * v + gamma * (m - v);
                }
            },
            move |_| 2.0 * (1.0 - gamma),
            move |_| 2.0 * g,
            move |_| g,
        )
    }

    /// `b = -βx + a sin(x) + γ mean(μ)` componentwise; κ₁ = 2(|a| - β),
    /// κ₂ = 2|γ|, Θ = |γ|.
    pub fn sine_meanfield(dim: usize, beta: f64, a: f64, gamma: f64) -> Self {
        Self::new(
            "sine_meanfield",
            dim,
            1.0,
            move |_, x, law, out| {
                for ((o, v), m) in out.iter_mut().zip(x).zip(&law.mean) {
                    *o = -beta * v + a * v.sin() + gamma * m;
                }
            },
            move |_| 2.0 * (a.abs() - beta),
            move |_| 2.0 * gamma.abs(),
            move |_| gamma.abs(),
        )
    }
}

/// Serializable names for the built-in drifts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DriftSpec {
    Zero,
    Constant { v: Vec<f64> },
    Ou { beta: f64 },
    MeanfieldOu { beta: f64, gamma: f64 },
    DoubleWell { gamma: f64 },
    SineMeanfield { beta: f64, a: f64, gamma: f64 },
}

impl DriftSpec {
    pub fn build(&self, dim: usize, theta: f64) -> Result<MkvDrift> {
        let d = match self {
            DriftSpec::Zero => MkvDrift::zero(dim),
            DriftSpec::Constant { v } => {
                if v.len() != dim {
                    return Err(Error::domain("constant drift has the wrong dimension"));
                }
                MkvDrift::constant(v.clone())
            }
            DriftSpec::Ou { beta } => MkvDrift::ou(dim, *beta),
            DriftSpec::MeanfieldOu { beta, gamma } => MkvDrift::meanfield_ou(dim, *beta, *gamma),
            DriftSpec::DoubleWell { gamma } => MkvDrift::double_well(dim, *gamma),
            DriftSpec::SineMeanfield { beta, a, gamma } => MkvDrift::sine_meanfield(dim, *beta, *a, *gamma),
        };
        Ok(d.with_theta(theta))
    }

    pub fn catalog() -> &'static [(&'static str, &'static str)] {
        &[
            ("zero", "b = 0"),
            ("constant", "b = v"),
            ("ou", "b = -beta x"),
            ("meanfield_ou", "b = -beta x + gamma mean(mu)"),
            ("double_well", "b = x - x^3 + gamma (mean(mu) - x)"),
            ("sine_meanfield", "b = -beta x + a sin(x) + gamma mean(mu)"),
        ]
    }
}
