use crate::quad;

/// Density at x of the symmetric law with characteristic function
/// `exp(-t(ξ²/2)^α)`, by Simpson on `(1/π)∫_0^Ξ cos(ξx) e^{-t(ξ²/2)^α} dξ`
/// with Ξ where the integrand drops below e^{-40}. The substitution
/// ξ = u² removes the kink of ξ^{2α} at the origin.
pub fn stable_density(x: f64, t: f64, alpha: f64) -> f64 {
    let cut = 2f64.sqrt() * (40.0 / t).powf(0.5 / alpha);
    // enough panels for both the oscillation and the decay scale
    let panels = ((cut * x.abs() * 4.0) as usize + 2000).min(400_000);
    let f = |u: f64| {
        let xi = u * u;
        2.0 * u * (xi * x).cos() * (-t * (0.5 * xi * xi).powf(alpha)).exp()
    };
    quad::simpson(f, 0.0, cut.sqrt(), panels) / std::f64::consts::PI
}
