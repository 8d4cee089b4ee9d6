//! Thin wrappers around `quadrature` plus a composite Simpson rule.

use quadrature::double_exponential;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

/// ∫_a^b f with tanh-sinh quadrature. Endpoint singularities are fine.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Quad {
    if a == b {
        return Quad { value: 0.0, error: 0.0 };
    }
    let out = double_exponential::integrate(f, a, b, tol);
    Quad {
        value: out.integral,
        error: out.error_estimate,
    }
}

/// ∫_a^∞ f via x = a + u/(1-u).
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Quad {
    integrate(
        |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - u;
            let v = f(a + u / w) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// ∫_0^b f for integrands with an integrable singularity at 0, via
/// x = b e^{-y}.
pub fn integrate_from_zero<F: Fn(f64) -> f64>(f: F, b: f64, tol: f64) -> Quad {
    integrate_to_inf(
        |y: f64| {
            let x = b * (-y).exp();
            if x <= 0.0 {
                0.0
            } else {
                f(x) * x
            }
        },
        0.0,
        tol,
    )
}

/// ∫_a^b f over a logarithmic split, useful for integrands spread over
/// many decades (Lévy densities near zero).
pub fn integrate_log_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Quad {
    assert!(a > 0.0 && b > a);
    let decades = (b / a).log10().ceil().max(1.0) as usize;
    let ratio = (b / a).powf(1.0 / decades as f64);
    let mut acc = Quad { value: 0.0, error: 0.0 };
    let mut lo = a;
    for k in 0..decades {
        let hi = if k + 1 == decades { b } else { lo * ratio };
        let q = integrate(&f, lo, hi, tol / decades as f64);
        acc.value += q.value;
        acc.error += q.error;
        lo = hi;
    }
    acc
}

/// Composite Simpson on `n` (rounded up to even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n.max(2) };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Trapezoid rule on tabulated values with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}
