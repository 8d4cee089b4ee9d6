//! Empirical Wasserstein distances between equal-size samples.

mod assignment;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Domain, StreamRng, Streams};

pub use assignment::solve as assignment;

/// Largest sample size handed to the assignment solver.
pub const ASSIGNMENT_BUDGET: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sorted1D,
    ExactAssignment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub value: f64,
    pub p: f64,
    pub method: Method,
    pub bootstrap_se: Option<f64>,
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("Wasserstein order must be ≥ 1, got {p}")))
    }
}

fn subsample_rng(n: usize, m: usize) -> StreamRng {
    Streams::new(0x5eed ^ ((n as u64) << 32) ^ m as u64).stream(Domain::Subsample, 0)
}

/// Uniformly subsample `xs` (points of dimension `d`) down to `m` points.
pub fn subsample<R: Rng + ?Sized>(xs: &[f64], d: usize, m: usize, rng: &mut R) -> Vec<f64> {
    let n = xs.len() / d;
    if m >= n {
        return xs.to_vec();
    }
    let mut idx = sample(rng, n, m).into_vec();
    idx.sort_unstable();
    idx.iter().flat_map(|&i| xs[i * d..(i + 1) * d].iter().copied()).collect()
}

/// Ŵ_p between two 1-D samples by the quantile coupling. Unequal sizes
/// are matched by a seeded subsample of the larger one.
pub fn wasserstein_1d(x: &[f64], y: &[f64], p: f64) -> Result<DistanceReport> {
    check_p(p)?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::domain("empty sample"));
    }
    let (mut a, mut b) = equalize(x, y, 1);
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(DistanceReport {
        value: sorted_distance(&a, &b, p),
        p,
        method: Method::Sorted1D,
        bootstrap_se: None,
    })
}

fn equalize(x: &[f64], y: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny) = (x.len() / d, y.len() / d);
    if nx == ny {
        (x.to_vec(), y.to_vec())
    } else if nx > ny {
        (subsample(x, d, ny, &mut subsample_rng(nx, ny)), y.to_vec())
    } else {
        (x.to_vec(), subsample(y, d, nx, &mut subsample_rng(ny, nx)))
    }
}

/// `(mean |a_i - b_i|^p)^{1/p}` for already sorted samples.
pub fn sorted_distance(a: &[f64], b: &[f64], p: f64) -> f64 {
    let n = a.len();
    let s: f64 = if p == 1.0 {
        a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum()
    } else {
        a.iter().zip(b).map(|(u, v)| (u - v).abs().powf(p)).sum()
    };
    (s / n as f64).powf(1.0 / p)
}

fn cost_matrix(x: &[f64], y: &[f64], d: usize, p: f64) -> Vec<f64> {
    let n = x.len() / d;
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..d {
                let diff = x[i * d + k] - y[j * d + k];
                s += diff * diff;
            }
            c[i * n + j] = s.sqrt().powf(p);
        }
    }
    c
}

/// Optimal assignment between two equal-size samples in ℝ^d; returns the
/// matching and the distance.
pub fn optimal_matching(x: &[f64], y: &[f64], d: usize, p: f64) -> Result<(Vec<usize>, f64)> {
    check_p(p)?;
    if x.is_empty() || x.len() != y.len() || !x.len().is_multiple_of(d) {
        return Err(Error::domain("samples must be nonempty with equal sizes"));
    }
    let n = x.len() / d;
    if n > ASSIGNMENT_BUDGET {
        return Err(Error::Budget(format!(
            "assignment of {n} points exceeds the budget of {ASSIGNMENT_BUDGET}; subsample first"
        )));
    }
    let c = cost_matrix(x, y, d, p);
    let m = assignment::solve(&c, n);
    let total: f64 = m.iter().enumerate().map(|(i, &j)| c[i * n + j]).sum();
    Ok((m, (total / n as f64).powf(1.0 / p)))
}

/// Ŵ_p by exact assignment (N ≤ 512).
pub fn wasserstein_exact(x: &[f64], y: &[f64], d: usize, p: f64) -> Result<DistanceReport> {
    let (_, value) = optimal_matching(x, y, d, p)?;
    Ok(DistanceReport {
        value,
        p,
        method: Method::ExactAssignment,
        bootstrap_se: None,
    })
}

/// Ŵ_p with the method suited to the data: sorting in 1-D, assignment
/// otherwise (after a seeded subsample to the budget when needed).
pub fn wasserstein(x: &[f64], y: &[f64], d: usize, p: f64) -> Result<DistanceReport> {
    if d == 1 {
        return wasserstein_1d(x, y, p);
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::domain("empty sample"));
    }
    let (a, b) = equalize(x, y, d);
    let n = a.len() / d;
    if n <= ASSIGNMENT_BUDGET {
        return wasserstein_exact(&a, &b, d, p);
    }
    let mut rng = subsample_rng(n, ASSIGNMENT_BUDGET);
    let a = subsample(&a, d, ASSIGNMENT_BUDGET, &mut rng);
    let b = subsample(&b, d, ASSIGNMENT_BUDGET, &mut rng);
    wasserstein_exact(&a, &b, d, p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    /// resample each sample separately
    Independent,
    /// resample index pairs (x_i, y_i) jointly, for coupled samples
    Paired,
}

/// Bootstrap standard error of [`wasserstein`] with `b` replicates.
pub fn bootstrap_se(x: &[f64], y: &[f64], d: usize, p: f64, b: usize, scheme: Resampling, rng: &mut StreamRng) -> Result<f64> {
    if b < 2 {
        return Err(Error::domain("bootstrap needs at least two replicates"));
    }
    let (x, y) = equalize(x, y, d);
    let n = x.len() / d;
    if n == 0 {
        return Err(Error::domain("empty sample"));
    }
    let mut xs = vec![0.0; n * d];
    let mut ys = vec![0.0; n * d];
    let mut vals = Vec::with_capacity(b);
    for _ in 0..b {
        for i in 0..n {
            let jx = rng.random_range(0..n);
            let jy = match scheme {
                Resampling::Paired => jx,
                Resampling::Independent => rng.random_range(0..n),
            };
            xs[i * d..(i + 1) * d].copy_from_slice(&x[jx * d..(jx + 1) * d]);
            ys[i * d..(i + 1) * d].copy_from_slice(&y[jy * d..(jy + 1) * d]);
        }
        vals.push(wasserstein(&xs, &ys, d, p)?.value);
    }
    Ok(crate::stats::variance(&vals).sqrt())
}

/// Ŵ_1 between two densities on a common uniform grid: ∫|F_u − F_v| dx.
pub fn wasserstein1_densities(u: &[f64], v: &[f64], dx: f64) -> f64 {
    let (mut fu, mut fv, mut acc) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        fu += a * dx;
        fv += b * dx;
        acc += (fu - fv).abs() * dx;
    }
    acc
}
