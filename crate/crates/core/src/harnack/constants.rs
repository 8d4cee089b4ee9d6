use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mkv::MkvDrift;
use crate::quad;
use crate::subordinator::SubordinatorPath;

pub const PANELS: usize = 1000;

/// `K₁(t) = exp[-∫_0^t κ₁]`
pub fn k1(kappa1: impl Fn(f64) -> f64, t: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    (-quad::simpson(kappa1, 0.0, t, PANELS)).exp()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KVariant {
    /// `½∫_0^t exp[θ/2 (κ₁+κ₂)(s) - ½∫_0^s κ₁] κ₂(s) ds`
    #[default]
    Printed,
    /// `½∫_0^t κ₂(s) exp[½∫_0^s κ₂] ds`, the constant the comparison
    /// argument actually produces
    Derived,
}

/// `K(t, θ)` in either variant.
pub fn k_const(kappa1: impl Fn(f64) -> f64, kappa2: impl Fn(f64) -> f64, t: f64, theta: f64, variant: KVariant) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let inner = |g: &dyn Fn(f64) -> f64, s: f64| if s == 0.0 { 0.0 } else { quad::simpson(g, 0.0, s, PANELS) };
    let integrand = |s: f64| {
        let k2 = kappa2(s);
        if k2 == 0.0 {
            return 0.0;
        }
        match variant {
            KVariant::Printed => (0.5 * theta * (kappa1(s) + k2) - 0.5 * inner(&kappa1, s)).exp() * k2,
            KVariant::Derived => k2 * (0.5 * inner(&kappa2, s)).exp(),
        }
    };
    0.5 * quad::simpson(integrand, 0.0, t, PANELS)
}

/// Which K enters ξ(t).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiScaling {
    /// K(t, θ) at the current time
    Running,
    /// K(T, θ) throughout
    #[default]
    Terminal,
}

/// K₁ and K tabulated on the grid times of a horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub times: Vec<f64>,
    pub k1: Vec<f64>,
    pub k: Vec<f64>,
    pub variant: KVariant,
    pub theta: f64,
}

impl Profile {
    pub fn new(drift: &MkvDrift, times: &[f64], theta: f64, variant: KVariant) -> Self {
        // cumulative integrals on each grid cell keep the cost linear in the grid size
        let n = times.len();
        let sub = 8;
        let mut int1 = vec![0.0; n];
        let mut int2 = vec![0.0; n];
        let mut k = vec![0.0; n];
        for i in 1..n {
            let (a, b) = (times[i - 1], times[i]);
            int1[i] = int1[i - 1] + quad::simpson(|s| drift.kappa1(s), a, b, sub);
            int2[i] = int2[i - 1] + quad::simpson(|s| drift.kappa2(s), a, b, sub);
            // inner integrals within the cell by Simpson on the cell's own quadrature nodes
            let f = |s: f64| {
                let k2 = drift.kappa2(s);
                if k2 == 0.0 {
                    return 0.0;
                }
                match variant {
                    KVariant::Printed => {
                        let i1 = int1[i - 1] + quad::simpson(|r| drift.kappa1(r), a, s, sub);
                        (0.5 * theta * (drift.kappa1(s) + k2) - 0.5 * i1).exp() * k2
                    }
                    KVariant::Derived => {
                        let i2 = int2[i - 1] + quad::simpson(|r| drift.kappa2(r), a, s, sub);
                        k2 * (0.5 * i2).exp()
                    }
                }
            };
            k[i] = k[i - 1] + 0.5 * quad::simpson(f, a, b, sub);
        }
        Self {
            times: times.to_vec(),
            k1: int1.iter().map(|v| (-v).exp()).collect(),
            k,
            variant,
            theta,
        }
    }

    pub fn k_terminal(&self) -> f64 {
        *self.k.last().unwrap()
    }
}

/// `∫_0^T K₁ dℓ^ε` as the left-point sum over the grid of `reg`, the same
/// rule the coupled solver uses for its control.
pub fn stieltjes_k1(k1: &[f64], reg: &SubordinatorPath) -> Result<f64> {
    let v = reg.horizon_values();
    if v.len() != k1.len() {
        return Err(Error::precondition("K₁ table and path live on different grids"));
    }
    let s: f64 = (0..v.len() - 1).map(|i| k1[i] * (v[i + 1] - v[i])).sum();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Numeric(format!("∫K₁dℓ^ε = {s}: degenerate path")));
    }
    Ok(s)
}

/// `ξ(t) = {|X₀-Y₀| + K(t,θ) W} √K₁(t) / ∫_0^T K₁ dℓ^ε`
#[allow(clippy::too_many_arguments)]
pub fn xi(
    t: f64,
    x0: &[f64],
    y0: &[f64],
    w_init: f64,
    drift: &MkvDrift,
    theta: f64,
    variant: KVariant,
    reg: &SubordinatorPath,
) -> Result<f64> {
    if reg.epsilon.is_none() {
        return Err(Error::precondition("ξ needs a regularised path"));
    }
    let times = reg.horizon_times();
    let k1s: Vec<f64> = times.iter().map(|&s| k1(|r| drift.kappa1(r), s)).collect();
    let denom = stieltjes_k1(&k1s, reg)?;
    let gap = dist(x0, y0);
    let k = k_const(|r| drift.kappa1(r), |r| drift.kappa2(r), t, theta, variant);
    Ok((gap + k * w_init) * k1(|r| drift.kappa1(r), t).sqrt() / denom)
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
