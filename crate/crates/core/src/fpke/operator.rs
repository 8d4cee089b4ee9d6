use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Uniform cell-centred grid on [-L, L]; `x_i = -L + (i + ½) dx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub l: f64,
    pub n: usize,
    pub dx: f64,
    pub dt: f64,
    pub alpha: f64,
}

impl Grid1D {
    /// Grid with `dt` set to the jump-part stability cap.
    pub fn new(l: f64, n: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.5 && alpha < 1.0) {
            return Err(Error::domain(format!("stable index α must lie in (1/2, 1), got {alpha}")));
        }
        if !(l > 0.0 && l.is_finite()) || n < 4 {
            return Err(Error::domain(format!("need L > 0 and n ≥ 4, got L = {l}, n = {n}")));
        }
        let dx = 2.0 * l / n as f64;
        let mut g = Self { l, n, dx, dt: 0.0, alpha };
        g.dt = g.jump_cap();
        Ok(g)
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.l + (i as f64 + 0.5) * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// |diagonal| of the discrete operator, `2 D c_α dx^{-2α}`.
    pub fn diagonal(&self) -> f64 {
        2.0 * near_plus_far(self.alpha) * c_alpha(self.alpha) * self.dx.powf(-2.0 * self.alpha)
    }

    /// `0.5 / |diagonal|`
    pub fn jump_cap(&self) -> f64 {
        0.5 / self.diagonal()
    }

    /// `min(jump cap, 0.5 dx / max|b|)`
    pub fn stability_cap(&self, max_b: f64) -> f64 {
        if max_b > 0.0 {
            self.jump_cap().min(0.5 * self.dx / max_b)
        } else {
            self.jump_cap()
        }
    }
}

/// Kernel constant of `-(−Δ/2)^α` in one dimension:
/// `c_α = α 2^α Γ(α+½) / (√π Γ(1-α))`, so that
/// `∫(cos(ξz) - 1) c_α |z|^{-1-2α} dz = -(ξ²/2)^α`.
pub fn c_alpha(alpha: f64) -> f64 {
    alpha * 2f64.powf(alpha) * quad::gamma(alpha + 0.5) / (std::f64::consts::PI.sqrt() * quad::gamma(1.0 - alpha))
}

fn near_plus_far(alpha: f64) -> f64 {
    1.0 / (2.0 - 2.0 * alpha) + 1.0 / (2.0 * alpha)
}

/// Dimensionless lattice weights `W_k`, k = 1..n: the second difference
/// `G(s) = u(x+s) + u(x-s) - 2u(x)` is taken quadratic on the first cell
/// and piecewise linear beyond.
pub fn lattice_weights(alpha: f64, n: usize) -> Vec<f64> {
    let a2 = 2.0 * alpha;
    let i0 = |k: f64| (k.powf(-a2) - (k + 1.0).powf(-a2)) / a2;
    let i1 = |k: f64| ((k + 1.0).powf(1.0 - a2) - k.powf(1.0 - a2)) / (1.0 - a2);
    // weight of G_k from the cell [k, k+1] and from [k-1, k]
    let a = |k: f64| (k + 1.0) * i0(k) - i1(k);
    let b = |k: f64| i1(k) - k * i0(k);
    let mut w = vec![0.0; n + 1];
    for (k, wk) in w.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        *wk = a(kf) + if k == 1 { 1.0 / (2.0 - a2) } else { b(kf - 1.0) };
    }
    w
}

/// The discrete operator `(Lu)_i = c_α dx^{-2α} [Σ_{j≠i} W_{|i-j|} u_j - 2D u_i]`
/// with zero exterior, applied by FFT.
#[derive(Clone)]
pub struct FracLaplacian {
    pub grid: Grid1D,
    scale: f64,
    diag: f64,
    weights: Vec<f64>,
    size: usize,
    kernel_hat: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FracLaplacian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FracLaplacian").field("grid", &self.grid).finish()
    }
}

impl FracLaplacian {
    pub fn new(grid: &Grid1D) -> Result<Self> {
        let g = Grid1D::new(grid.l, grid.n, grid.alpha)?.with_dt(grid.dt);
        let n = g.n;
        let weights = lattice_weights(g.alpha, n);
        let size = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let mut kernel = vec![Complex64::new(0.0, 0.0); size];
        for k in 1..n {
            kernel[k] = Complex64::new(weights[k], 0.0);
            kernel[size - k] = Complex64::new(weights[k], 0.0);
        }
        fwd.process(&mut kernel);
        Ok(Self {
            scale: c_alpha(g.alpha) * g.dx.powf(-2.0 * g.alpha),
            diag: 2.0 * near_plus_far(g.alpha),
            grid: g,
            weights,
            size,
            kernel_hat: kernel,
            fwd,
            inv,
        })
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.size];
        for (b, &v) in buf.iter_mut().zip(u) {
            b.re = v;
        }
        self.fwd.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.inv.process(&mut buf);
        let norm = 1.0 / self.size as f64;
        (0..n).map(|i| self.scale * (buf[i].re * norm - self.diag * u[i])).collect()
    }

    /// O(n²) reference evaluation of the same matrix.
    pub fn apply_direct(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.n;
        (0..n)
            .map(|i| {
                let mut acc = -self.diag * u[i];
                for (j, &v) in u.iter().enumerate() {
                    if j != i {
                        acc += self.weights[i.abs_diff(j)] * v;
                    }
                }
                self.scale * acc
            })
            .collect()
    }

    /// Rate at which mass at node i jumps out of [-L, L].
    pub fn exit_rate(&self, i: usize) -> f64 {
        let n = self.grid.n;
        let inside: f64 = (1..=i).map(|k| self.weights[k]).sum::<f64>() + (1..n - i).map(|k| self.weights[k]).sum::<f64>();
        self.scale * (self.diag - inside)
    }

    /// Multiplier of the operator on `cos(ξx)` over an unbounded lattice,
    /// summing `kmax` neighbours per side.
    pub fn lattice_symbol(&self, xi: f64, kmax: usize) -> f64 {
        let w = lattice_weights(self.grid.alpha, kmax);
        let h = self.grid.dx;
        let s: f64 = (1..=kmax).map(|k| w[k] * (k as f64 * xi * h).cos()).sum();
        self.scale * (2.0 * s - self.diag)
    }
}

/// Apply the discrete `-(−Δ/2)^α` on `grid` with zero exterior.
pub fn frac_laplacian_apply(grid: &Grid1D, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != grid.n {
        return Err(Error::precondition(format!("expected {} grid values, got {}", grid.n, u.len())));
    }
    Ok(FracLaplacian::new(grid)?.apply(u))
}

/// `c_α ∫_0^∞ (u(x+s) + u(x-s) - 2u(x)) s^{-1-2α} ds` by adaptive
/// quadrature, for smooth `u`. Below s = 0.05 the second difference is
/// replaced by its Taylor series `u'' s² + u⁽⁴⁾ s⁴/12`, which avoids
/// cancellation; the `-2u(x)` part of the tail is exact.
pub fn frac_laplacian_quadrature(u: impl Fn(f64) -> f64, x: f64, alpha: f64) -> f64 {
    let s0: f64 = 0.05;
    let p = -1.0 - 2.0 * alpha;
    let h = 1e-3;
    let u2 = (-u(x + 2.0 * h) + 16.0 * u(x + h) - 30.0 * u(x) + 16.0 * u(x - h) - u(x - 2.0 * h)) / (12.0 * h * h);
    let h: f64 = 2e-2;
    let u4 = (u(x + 2.0 * h) - 4.0 * u(x + h) + 6.0 * u(x) - 4.0 * u(x - h) + u(x - 2.0 * h)) / h.powi(4);
    let series = u2 * s0.powf(p + 3.0) / (p + 3.0) + u4 / 12.0 * s0.powf(p + 5.0) / (p + 5.0);
    let head = quad::integrate(|s| (u(x + s) + u(x - s) - 2.0 * u(x)) * s.powf(p), s0, 1.0, 1e-13).value;
    let tail = quad::integrate_to_inf(|s| (u(x + s) + u(x - s)) * s.powf(p), 1.0, 1e-13).value - u(x) / alpha;
    c_alpha(alpha) * (series + head + tail)
}
