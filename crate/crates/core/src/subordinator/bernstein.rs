use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Quad};

/// Laplace exponent of a subordinator: `φ(r) = ϱ r + ∫ (1 - e^{-rx}) ν_S(dx)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BernsteinSpec {
    Stable {
        alpha: f64,
    },
    RelativisticStable {
        alpha: f64,
        m: f64,
    },
    Gamma {
        a: f64,
    },
    LogType {
        a: f64,
    },
    PureDrift {
        drift: f64,
    },
    /// Drift plus a Lévy density. `witness` is an exponent γ < 1 such that
    /// `x ν(x) ≤ C x^{-γ}` near 0.
    Custom {
        #[serde(default)]
        drift: f64,
        density: LevyDensity,
        witness: f64,
    },
}

/// Lévy densities on (0, ∞) usable with [`BernsteinSpec::Custom`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LevyDensity {
    /// `n (1 + x)^{-n-1}`
    ShiftedPareto { n: f64 },
    /// `c x^{-1-α} e^{-λ x}`
    TemperedStable { alpha: f64, c: f64, lambda: f64 },
    #[serde(skip)]
    Function(DensityFn),
}

#[derive(Clone)]
pub struct DensityFn(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl DensityFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }
}

impl fmt::Debug for DensityFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DensityFn(..)")
    }
}

impl PartialEq for DensityFn {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl LevyDensity {
    pub fn eval(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        match self {
            LevyDensity::ShiftedPareto { n } => n * (1.0 + x).powf(-n - 1.0),
            LevyDensity::TemperedStable { alpha, c, lambda } => c * x.powf(-1.0 - alpha) * (-lambda * x).exp(),
            LevyDensity::Function(f) => (f.0)(x),
        }
    }
}

/// Outcome of the large-jump moment check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct H1Check {
    pub holds: bool,
    /// ∫_{(1,∞)} x^{θ/2} ν_S(dx) when finite; for custom densities whose
    /// integral diverges, the fitted tail exponent p of ν(x) ~ x^{-p}.
    pub diagnostic: f64,
}

impl BernsteinSpec {
    pub fn stable(alpha: f64) -> Self {
        BernsteinSpec::Stable { alpha }
    }

    pub fn drift(&self) -> f64 {
        match self {
            BernsteinSpec::PureDrift { drift } | BernsteinSpec::Custom { drift, .. } => *drift,
            _ => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BernsteinSpec::Stable { .. } => "stable",
            BernsteinSpec::RelativisticStable { .. } => "relativistic_stable",
            BernsteinSpec::Gamma { .. } => "gamma",
            BernsteinSpec::LogType { .. } => "log_type",
            BernsteinSpec::PureDrift { .. } => "pure_drift",
            BernsteinSpec::Custom { .. } => "custom",
        }
    }

    pub fn catalog() -> &'static [(&'static str, &'static str)] {
        &[
            ("stable", "phi(r) = r^alpha, alpha in (0,1)"),
            ("relativistic_stable", "phi(r) = (r + m^(1/alpha))^alpha - m"),
            ("gamma", "phi(r) = log(1 + r/a)"),
            ("log_type", "phi(r) = r log(1 + a/r)"),
            ("pure_drift", "phi(r) = drift * r"),
            ("custom", "drift * r + int (1 - e^(-rx)) nu(dx) for a named Levy density"),
        ]
    }

    /// Parameter checks, plus the small-jump witness and ∫(1∧x)ν < ∞ for
    /// custom densities.
    pub fn validate(&self) -> Result<()> {
        let unit = |a: f64, what: &str| {
            if a > 0.0 && a < 1.0 {
                Ok(())
            } else {
                Err(Error::domain(format!("{what} must lie in (0,1), got {a}")))
            }
        };
        let pos = |a: f64, what: &str| {
            if a > 0.0 && a.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(format!("{what} must be positive, got {a}")))
            }
        };
        match self {
            BernsteinSpec::Stable { alpha } => unit(*alpha, "alpha"),
            BernsteinSpec::RelativisticStable { alpha, m } => {
                unit(*alpha, "alpha")?;
                pos(*m, "m")
            }
            BernsteinSpec::Gamma { a } | BernsteinSpec::LogType { a } => pos(*a, "a"),
            BernsteinSpec::PureDrift { drift } => {
                if *drift >= 0.0 && drift.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain(format!("drift must be nonnegative, got {drift}")))
                }
            }
            BernsteinSpec::Custom { drift, density, witness } => {
                if !(*drift >= 0.0 && drift.is_finite()) {
                    return Err(Error::domain(format!("drift must be nonnegative, got {drift}")));
                }
                if let LevyDensity::ShiftedPareto { n } = density {
                    pos(*n, "n")?;
                }
                if let LevyDensity::TemperedStable { alpha, c, lambda } = density {
                    unit(*alpha, "alpha")?;
                    pos(*c, "c")?;
                    if !(*lambda >= 0.0) {
                        return Err(Error::domain("lambda must be nonnegative"));
                    }
                }
                check_witness(density, *witness)?;
                let m = self.truncated_first_moment();
                if !(m.is_finite()) {
                    return Err(Error::Assumption {
                        assumption: "levy_integrability",
                        detail: format!("∫(1∧x)ν(dx) evaluated to {m}"),
                    });
                }
                Ok(())
            }
        }
    }

    /// Density of ν_S at x > 0 (zero for a pure drift).
    pub fn levy_density(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        match self {
            BernsteinSpec::Stable { alpha } => alpha / quad::gamma(1.0 - alpha) * x.powf(-1.0 - alpha),
            BernsteinSpec::RelativisticStable { alpha, m } => {
                alpha / quad::gamma(1.0 - alpha) * (-m.powf(1.0 / alpha) * x).exp() * x.powf(-1.0 - alpha)
            }
            BernsteinSpec::Gamma { a } => (-a * x).exp() / x,
            BernsteinSpec::LogType { a } => {
                let y = a * x;
                // 1 - e^{-y}(1+y), accurate for small y
                let g = if y < 1e-3 {
                    y * y * (0.5 - y / 3.0 + y * y / 8.0)
                } else {
                    -(-y).exp_m1() - y * (-y).exp()
                };
                g / (x * x)
            }
            BernsteinSpec::PureDrift { .. } => 0.0,
            BernsteinSpec::Custom { density, .. } => density.eval(x),
        }
    }

    /// φ(r) for r > 0.
    pub fn laplace_exponent(&self, r: f64) -> Result<f64> {
        self.laplace_exponent_with_error(r).map(|q| q.value)
    }

    /// φ(r) together with a quadrature error estimate (zero when closed form).
    pub fn laplace_exponent_with_error(&self, r: f64) -> Result<Quad> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::domain(format!("laplace exponent needs r > 0, got {r}")));
        }
        let exact = |value| Ok(Quad { value, error: 0.0 });
        match self {
            BernsteinSpec::Stable { alpha } => exact(r.powf(*alpha)),
            BernsteinSpec::RelativisticStable { alpha, m } => exact((r + m.powf(1.0 / alpha)).powf(*alpha) - m),
            BernsteinSpec::Gamma { a } => exact((r / a).ln_1p()),
            BernsteinSpec::LogType { a } => exact(r * (a / r).ln_1p()),
            BernsteinSpec::PureDrift { drift } => exact(drift * r),
            BernsteinSpec::Custom { drift, density, .. } => {
                let f = |x: f64| -(-r * x).exp_m1() * density.eval(x);
                let head = quad::integrate_from_zero(f, 1.0, 1e-13);
                let tail = quad::integrate_to_inf(f, 1.0, 1e-12);
                Ok(Quad {
                    value: drift * r + head.value + tail.value,
                    error: head.error + tail.error,
                })
            }
        }
    }

    /// ∫ (1 ∧ x) ν_S(dx).
    pub fn truncated_first_moment(&self) -> f64 {
        let head = self.small_jump_mean(1.0);
        head + self.tail_mass(1.0)
    }

    /// ∫_{(0,δ]} x ν_S(dx).
    pub fn small_jump_mean(&self, delta: f64) -> f64 {
        match self {
            BernsteinSpec::PureDrift { .. } => 0.0,
            BernsteinSpec::Stable { alpha } => alpha / quad::gamma(1.0 - alpha) * delta.powf(1.0 - alpha) / (1.0 - alpha),
            BernsteinSpec::Gamma { a } => -(-a * delta).exp_m1() / a,
            _ => quad::integrate_from_zero(|x| x * self.levy_density(x), delta, 1e-15).value,
        }
    }

    /// ν_S((δ, ∞)).
    pub fn tail_mass(&self, delta: f64) -> f64 {
        match self {
            BernsteinSpec::PureDrift { .. } => 0.0,
            BernsteinSpec::Stable { alpha } => delta.powf(-alpha) / quad::gamma(1.0 - alpha),
            _ => {
                let f = |x: f64| self.levy_density(x);
                let mid = if delta < 1.0 {
                    quad::integrate_log_split(f, delta, 1.0, 1e-12).value
                } else {
                    0.0
                };
                mid + quad::integrate_to_inf(f, delta.max(1.0), 1e-12).value
            }
        }
    }

    /// Whether ∫_{(1,∞)} x^{θ/2} ν_S(dx) < ∞.
    pub fn check_h1prime(&self, theta: f64) -> H1Check {
        let moment = || quad::integrate_to_inf(|x| x.powf(theta / 2.0) * self.levy_density(x), 1.0, 1e-10).value;
        let analytic = match self {
            BernsteinSpec::Stable { alpha } => Some(theta < 2.0 * alpha),
            BernsteinSpec::RelativisticStable { .. } | BernsteinSpec::Gamma { .. } => Some(true),
            BernsteinSpec::LogType { .. } => Some(theta < 2.0),
            BernsteinSpec::PureDrift { .. } => {
                return H1Check {
                    holds: true,
                    diagnostic: 0.0,
                }
            }
            BernsteinSpec::Custom { .. } => None,
        };
        match analytic {
            Some(true) => H1Check {
                holds: true,
                diagnostic: moment(),
            },
            Some(false) => H1Check {
                holds: false,
                diagnostic: f64::INFINITY,
            },
            None => {
                let p = self.tail_exponent();
                if p > 1.0 + theta / 2.0 + 1e-6 {
                    H1Check {
                        holds: true,
                        diagnostic: moment(),
                    }
                } else {
                    H1Check {
                        holds: false,
                        diagnostic: p,
                    }
                }
            }
        }
    }

    /// Fitted p in ν(x) ~ x^{-p} over x ∈ [1e7, 1e8]; +∞ if the density
    /// vanishes there.
    pub fn tail_exponent(&self) -> f64 {
        let (x0, x1) = (1e7, 1e8);
        let (v0, v1) = (self.levy_density(x0), self.levy_density(x1));
        if v0 <= 0.0 || v1 <= 0.0 {
            return f64::INFINITY;
        }
        -(v1 / v0).ln() / (x1 / x0).ln()
    }
}

/// Require `x^{1+γ} ν(x)` to stay bounded as x ↓ 0 (γ < 1).
fn check_witness(density: &LevyDensity, gamma: f64) -> Result<()> {
    if !(gamma < 1.0) || !gamma.is_finite() {
        return Err(Error::Assumption {
            assumption: "small_jump_witness",
            detail: format!("witness exponent must be < 1, got {gamma}"),
        });
    }
    let g = |x: f64| x.powf(1.0 + gamma) * density.eval(x);
    let xs: Vec<f64> = (0..=48).map(|k| 10f64.powf(-12.0 + 0.25 * k as f64)).collect();
    if let Some(x) = xs.iter().find(|&&x| !g(x).is_finite() || density.eval(x) < 0.0) {
        return Err(Error::Assumption {
            assumption: "small_jump_witness",
            detail: format!("density not finite and nonnegative at x = {x:e}"),
        });
    }
    // log-log slope of g over [1e-12, 1e-6]; negative means growth at 0
    let (a, b) = (g(1e-12), g(1e-6));
    if a > 0.0 {
        let slope = (b.max(f64::MIN_POSITIVE) / a).ln() / 1e6f64.ln();
        if slope < -1e-6 {
            return Err(Error::Assumption {
                assumption: "small_jump_witness",
                detail: format!("x^(1+{gamma}) ν(x) grows like x^({slope:.4}) near 0; witness too small"),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn catalog() -> Vec<BernsteinSpec> {
        vec![
            BernsteinSpec::Stable { alpha: 0.7 },
            BernsteinSpec::RelativisticStable { alpha: 0.6, m: 1.3 },
            BernsteinSpec::Gamma { a: 1.7 },
            BernsteinSpec::LogType { a: 0.8 },
        ]
    }

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(BernsteinSpec::stable(0.5).laplace_exponent(4.0).unwrap(), 2.0);
        let rs = BernsteinSpec::RelativisticStable { alpha: 0.5, m: 1.0 };
        assert_relative_eq!(rs.laplace_exponent(3.0).unwrap(), 1.0);
        let g = BernsteinSpec::Gamma { a: 1.0 };
        assert!(g.laplace_exponent(1e-12).unwrap() < 1e-11);
        assert!(g.laplace_exponent(0.0).is_err());
        assert!(g.laplace_exponent(-1.0).is_err());
    }

    #[test]
    fn closed_forms_match_levy_measure_integral() {
        // independent oracle: integrate (1 - e^{-rx}) ν(x) numerically
        for spec in catalog() {
            for r in [0.3, 1.0, 4.0] {
                let f = |x: f64| -(-r * x).exp_m1() * spec.levy_density(x);
                let num = quad::integrate_from_zero(f, 1.0, 1e-13).value + quad::integrate_to_inf(f, 1.0, 1e-13).value;
                let closed = spec.laplace_exponent(r).unwrap();
                assert_relative_eq!(num, closed, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn shifted_pareto_custom_matches_integral_formula() {
        // φ(r) = r e^r ∫_1^∞ e^{-ry} y^{-n} dy
        let n = 2.0;
        let spec = BernsteinSpec::Custom {
            drift: 0.0,
            density: LevyDensity::ShiftedPareto { n },
            witness: 0.0,
        };
        spec.validate().unwrap();
        for r in [0.5, 1.0, 3.0] {
            let tail = quad::integrate_to_inf(|y: f64| (-r * (y - 1.0)).exp() * y.powf(-n), 1.0, 1e-13);
            let oracle = r * tail.value;
            let q = spec.laplace_exponent_with_error(r).unwrap();
            assert_relative_eq!(q.value, oracle, max_relative = 1e-8);
            assert!(q.error < 1e-8);
        }
    }

    #[test]
    fn tempered_custom_reproduces_relativistic() {
        let (alpha, m) = (0.6, 1.3);
        let rs = BernsteinSpec::RelativisticStable { alpha, m };
        let custom = BernsteinSpec::Custom {
            drift: 0.0,
            density: LevyDensity::TemperedStable {
                alpha,
                c: alpha / quad::gamma(1.0 - alpha),
                lambda: m.powf(1.0 / alpha),
            },
            witness: alpha,
        };
        custom.validate().unwrap();
        for r in [0.5, 2.0, 10.0] {
            assert_relative_eq!(
                custom.laplace_exponent(r).unwrap(),
                rs.laplace_exponent(r).unwrap(),
                max_relative = 1e-7
            );
        }
    }

    #[test]
    fn witness_rejects_non_levy_density() {
        // x^{-2} near 0 is not a subordinator Lévy density
        let bad = BernsteinSpec::Custom {
            drift: 0.0,
            density: LevyDensity::Function(DensityFn::new(|x| x.powf(-2.0))),
            witness: 0.9,
        };
        assert!(matches!(bad.validate(), Err(Error::Assumption { .. })));
        let lying = BernsteinSpec::Custom {
            drift: 0.0,
            density: LevyDensity::TemperedStable {
                alpha: 0.7,
                c: 1.0,
                lambda: 1.0,
            },
            witness: 0.5,
        };
        assert!(lying.validate().is_err());
        let bad_gamma = BernsteinSpec::Custom {
            drift: 0.0,
            density: LevyDensity::ShiftedPareto { n: 1.0 },
            witness: 1.0,
        };
        assert!(bad_gamma.validate().is_err());
    }

    #[test]
    fn h1prime_catalog() {
        assert!(BernsteinSpec::stable(0.7).check_h1prime(1.0).holds);
        assert!(BernsteinSpec::Gamma { a: 2.0 }.check_h1prime(8.0).holds);
        assert!(!BernsteinSpec::stable(0.6).check_h1prime(1.5).holds);
        assert!(BernsteinSpec::LogType { a: 1.0 }.check_h1prime(1.5).holds);
        assert!(!BernsteinSpec::LogType { a: 1.0 }.check_h1prime(2.0).holds);
        let rs = BernsteinSpec::RelativisticStable { alpha: 0.5, m: 1.0 };
        let c = rs.check_h1prime(6.0);
        assert!(c.holds && c.diagnostic.is_finite() && c.diagnostic > 0.0);
    }

    #[test]
    fn h1prime_custom_uses_tail_fit() {
        let sp = |n| BernsteinSpec::Custom {
            drift: 0.0,
            density: LevyDensity::ShiftedPareto { n },
            witness: 0.0,
        };
        // holds iff θ < 2n
        assert!(sp(1.0).check_h1prime(1.9).holds);
        let c = sp(1.0).check_h1prime(2.0);
        assert!(!c.holds);
        assert_relative_eq!(c.diagnostic, 2.0, epsilon = 1e-6);
        assert!(sp(3.0).check_h1prime(5.5).holds);
        assert!(!sp(3.0).check_h1prime(6.5).holds);
        let tempered = BernsteinSpec::Custom {
            drift: 0.0,
            density: LevyDensity::TemperedStable {
                alpha: 0.5,
                c: 1.0,
                lambda: 0.5,
            },
            witness: 0.5,
        };
        assert!(tempered.check_h1prime(20.0).holds);
    }

    #[test]
    fn truncated_moments_are_finite() {
        for spec in catalog() {
            let m = spec.truncated_first_moment();
            assert!(m.is_finite() && m > 0.0, "{spec:?}");
        }
        // stable closed forms against quadrature
        let s = BernsteinSpec::stable(0.7);
        let d = |x: f64| s.levy_density(x);
        // ∫_0^δ x^{-α} dx by substitution x = δ u^{1/(1-α)} removes the singularity
        let k = 1.0 / 0.3;
        let q = quad::integrate(
            |u: f64| 1e-3 * k * u.powf(k - 1.0) * 1e-3 * u.powf(k) * d(1e-3 * u.powf(k)),
            0.0,
            1.0,
            1e-15,
        )
        .value;
        assert_relative_eq!(s.small_jump_mean(1e-3), q, max_relative = 1e-8);
        let t = quad::integrate_log_split(d, 1e-3, 1.0, 1e-13).value + quad::integrate_to_inf(d, 1.0, 1e-13).value;
        assert_relative_eq!(s.tail_mass(1e-3), t, max_relative = 1e-8);
    }

    #[test]
    fn log_type_total_mass_is_a() {
        let a = 0.8;
        let spec = BernsteinSpec::LogType { a };
        assert_relative_eq!(spec.tail_mass(1e-12), a, max_relative = 1e-6);
    }

    #[test]
    fn serde_round_trip() {
        let s = BernsteinSpec::stable(0.7);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"kind":"stable","alpha":0.7}"#);
        let c: BernsteinSpec =
            serde_json::from_str(r#"{"kind":"custom","density":{"family":"shifted_pareto","n":2},"witness":0.0}"#).unwrap();
        assert_eq!(c.drift(), 0.0);
        assert_eq!(serde_json::from_str::<BernsteinSpec>(&j).unwrap(), s);
    }
}
