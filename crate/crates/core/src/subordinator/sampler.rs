//! Increment samplers for the subordinator catalog.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use super::bernstein::BernsteinSpec;
use crate::error::{Error, Result};
use crate::quad;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Jumps at or below this size are replaced by their mean.
    pub small_jump_cutoff: f64,
    /// How far past the last grid time paths are extended.
    pub extension: f64,
    pub max_rejections: usize,
    pub cells_per_decade: usize,
    /// Upper end of the tabulated jump law; a Pareto tail is fitted beyond.
    pub table_max: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            small_jump_cutoff: 1e-4,
            extension: 1.0,
            max_rejections: 100_000,
            cells_per_decade: 200,
            table_max: 1e4,
        }
    }
}

/// A compiled sampler of `S_{t+dt} - S_t`.
#[derive(Clone, Debug)]
pub struct IncrementSampler {
    kind: Kind,
    max_rejections: usize,
}

#[derive(Clone, Debug)]
enum Kind {
    Drift(f64),
    Stable {
        alpha: f64,
    },
    RelStable {
        alpha: f64,
        m: f64,
        lambda: f64,
    },
    Gamma {
        a: f64,
    },
    /// Exact compound Poisson for the log-type measure: total mass a,
    /// jump law E / (a V) with E ~ Exp(1), V ~ U(0,1).
    LogType {
        a: f64,
    },
    Truncated {
        drift: f64,
        rate: f64,
        table: Arc<JumpTable>,
        /// ∫_{(0,δ]} x ν(dx), the compensated small-jump mass
        compensation: f64,
    },
}

impl IncrementSampler {
    pub fn new(spec: &BernsteinSpec, config: &SamplerConfig) -> Result<Self> {
        spec.validate()?;
        let kind = match *spec {
            BernsteinSpec::Stable { alpha } => Kind::Stable { alpha },
            BernsteinSpec::RelativisticStable { alpha, m } => Kind::RelStable {
                alpha,
                m,
                lambda: m.powf(1.0 / alpha),
            },
            BernsteinSpec::Gamma { a } => Kind::Gamma { a },
            BernsteinSpec::LogType { a } => Kind::LogType { a },
            BernsteinSpec::PureDrift { drift } => Kind::Drift(drift),
            BernsteinSpec::Custom { drift, .. } => {
                let delta = config.small_jump_cutoff;
                if !(delta > 0.0) {
                    return Err(Error::domain("small_jump_cutoff must be positive"));
                }
                let table = JumpTable::build(
                    |x| spec.levy_density(x),
                    delta,
                    config.table_max.max(10.0 * delta),
                    config.cells_per_decade.max(4),
                )?;
                Kind::Truncated {
                    drift,
                    rate: table.total_mass(),
                    compensation: spec.small_jump_mean(delta),
                    table: Arc::new(table),
                }
            }
        };
        Ok(Self {
            kind,
            max_rejections: config.max_rejections,
        })
    }

    /// Deterministic bias from truncating jumps ≤ δ, per unit time
    /// (zero for exact samplers).
    pub fn truncation_bias(&self) -> f64 {
        match &self.kind {
            Kind::Truncated { compensation, .. } => *compensation,
            _ => 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<f64> {
        if dt <= 0.0 {
            return Ok(0.0);
        }
        match &self.kind {
            Kind::Drift(d) => Ok(d * dt),
            Kind::Stable { alpha } => Ok(dt.powf(1.0 / alpha) * positive_stable(*alpha, rng)),
            Kind::RelStable { alpha, m, lambda } => {
                // split so that the acceptance rate e^{-m dt} stays ≥ e^{-1/2}
                let pieces = (m * dt / 0.5).ceil().max(1.0) as usize;
                let h = dt / pieces as f64;
                let scale = h.powf(1.0 / alpha);
                let mut total = 0.0;
                for _ in 0..pieces {
                    let mut tries = 0;
                    loop {
                        let x = scale * positive_stable(*alpha, rng);
                        if rng.random::<f64>() < (-lambda * x).exp() {
                            total += x;
                            break;
                        }
                        tries += 1;
                        if tries >= self.max_rejections {
                            return Err(Error::Sampler(format!(
                                "tempered stable rejection exceeded {} tries (alpha={alpha}, m={m}, dt={h})",
                                self.max_rejections
                            )));
                        }
                    }
                }
                Ok(total)
            }
            Kind::Gamma { a } => {
                let g = Gamma::new(dt, 1.0 / a).map_err(|e| Error::Sampler(format!("gamma increment: {e}")))?;
                Ok(g.sample(rng))
            }
            Kind::LogType { a } => {
                let n = poisson(a * dt, rng)?;
                let mut s = 0.0;
                for _ in 0..n {
                    let e: f64 = Exp1.sample(rng);
                    let v: f64 = 1.0 - rng.random::<f64>();
                    s += e / (a * v);
                }
                Ok(s)
            }
            Kind::Truncated {
                drift,
                rate,
                table,
                compensation,
            } => {
                let mut s = (drift + compensation) * dt;
                let n = poisson(rate * dt, rng)?;
                for _ in 0..n {
                    s += table.sample(rng);
                }
                Ok(s)
            }
        }
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let p = Poisson::new(mean).map_err(|e| Error::Sampler(format!("poisson({mean}): {e}")))?;
    let k: f64 = p.sample(rng);
    Ok(k as u64)
}

/// Kanter's representation of the positive stable law with
/// `E e^{-r S} = e^{-r^α}`.
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    loop {
        let u = PI * rng.random::<f64>();
        let w: f64 = Exp1.sample(rng);
        if u <= 0.0 || w <= 0.0 {
            continue;
        }
        let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
        let b = (((1.0 - alpha) * u).sin() / w).powf((1.0 - alpha) / alpha);
        let s = a * b;
        if s.is_finite() {
            return s;
        }
    }
}

/// Tabulated law of jumps larger than δ: log-spaced cells with a local
/// power-law fit inside each cell, and a Pareto tail beyond `x_max`.
#[derive(Clone, Debug)]
pub struct JumpTable {
    edges: Vec<f64>,
    /// cumulative mass up to the right edge of each cell
    cumulative: Vec<f64>,
    /// local exponent p in ν ~ x^{-p} per cell
    exponents: Vec<f64>,
    tail_mass: f64,
    tail_exponent: f64,
}

impl JumpTable {
    pub fn build<F: Fn(f64) -> f64>(density: F, delta: f64, x_max: f64, cells_per_decade: usize) -> Result<Self> {
        let decades = (x_max / delta).log10();
        let cells = (decades * cells_per_decade as f64).ceil() as usize;
        let ratio = (x_max / delta).powf(1.0 / cells as f64);
        let mut edges = Vec::with_capacity(cells + 1);
        let mut x = delta;
        for _ in 0..cells {
            edges.push(x);
            x *= ratio;
        }
        edges.push(x_max);

        let mut cumulative = Vec::with_capacity(cells);
        let mut exponents = Vec::with_capacity(cells);
        let mut acc = 0.0;
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let m = quad::integrate(&density, lo, hi, 1e-14 * (1.0 + acc)).value;
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::Sampler(format!("bad jump mass {m} on [{lo:e}, {hi:e}]")));
            }
            acc += m;
            cumulative.push(acc);
            let (dl, dh) = (density(lo), density(hi));
            let p = if dl > 0.0 && dh > 0.0 {
                -(dh / dl).ln() / (hi / lo).ln()
            } else {
                0.0
            };
            exponents.push(p);
        }
        let tail_mass = quad::integrate_to_inf(&density, x_max, 1e-14).value.max(0.0);
        let (d0, d1) = (density(x_max / 10.0), density(x_max));
        let tail_exponent = if d0 > 0.0 && d1 > 0.0 {
            (-(d1 / d0).ln() / 10f64.ln()).max(1.0 + 1e-6)
        } else {
            f64::INFINITY
        };
        if acc + tail_mass <= 0.0 {
            return Err(Error::Sampler("jump law above cutoff has zero mass".into()));
        }
        Ok(Self {
            edges,
            cumulative,
            exponents,
            tail_mass,
            tail_exponent,
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0) + self.tail_mass
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = self.total_mass();
        let u = rng.random::<f64>() * total;
        let body = *self.cumulative.last().unwrap();
        let x_max = *self.edges.last().unwrap();
        if u >= body {
            if !self.tail_exponent.is_finite() {
                return x_max;
            }
            let v = 1.0 - rng.random::<f64>();
            return x_max * v.powf(-1.0 / (self.tail_exponent - 1.0));
        }
        let k = self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1);
        let (lo, hi) = (self.edges[k], self.edges[k + 1]);
        sample_power_law(lo, hi, self.exponents[k], rng.random::<f64>())
    }
}

/// Inverse CDF of density ∝ x^{-p} on [lo, hi].
fn sample_power_law(lo: f64, hi: f64, p: f64, v: f64) -> f64 {
    let q = 1.0 - p;
    let x = if q.abs() < 1e-9 {
        lo * (hi / lo).powf(v)
    } else {
        let (a, b) = (lo.powf(q), hi.powf(q));
        (a + v * (b - a)).powf(1.0 / q)
    };
    x.clamp(lo, hi)
}
