//! Small statistics helpers shared by the experiment checks.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    MeanSe {
        mean: mean(xs),
        se: (variance(xs) / n.max(1) as f64).sqrt(),
        n,
    }
}

/// Ordinary least squares y = a + b x. Returns (a, b, r²).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (a, b, r2)
}

/// Hill estimator of the tail index from the `k` largest absolute values.
pub fn hill_tail_index(xs: &[f64], k: usize) -> f64 {
    let mut v: Vec<f64> = xs.iter().map(|x| x.abs()).filter(|x| x.is_finite()).collect();
    if v.len() <= k + 1 || k == 0 {
        return f64::NAN;
    }
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let xk = v[k];
    if xk <= 0.0 {
        return f64::INFINITY;
    }
    let s: f64 = v[..k].iter().map(|x| (x / xk).ln()).sum();
    k as f64 / s
}

/// Empirical quantile with linear interpolation, `q` in [0, 1].
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < n {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[n - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn basic_moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert_relative_eq!(variance(&xs), 5.0 / 3.0);
        let m = mean_se(&xs);
        assert_relative_eq!(m.se, (5.0 / 12.0f64).sqrt());
    }

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.5 * x).collect();
        let (a, b, r2) = linear_fit(&xs, &ys);
        assert_relative_eq!(a, 1.5, epsilon = 1e-14);
        assert_relative_eq!(b, -0.5, epsilon = 1e-14);
        assert_relative_eq!(r2, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn hill_on_pareto_quantiles() {
        // deterministic Pareto(2) quantiles
        let n = 20000;
        let xs: Vec<f64> = (1..=n).map(|i| (1.0 - i as f64 / (n as f64 + 1.0)).powf(-0.5)).collect();
        let h = hill_tail_index(&xs, 500);
        assert!((h - 2.0).abs() < 0.1, "{h}");
    }

    #[test]
    fn quantiles() {
        let s = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile(&s, 0.0), 0.0);
        assert_eq!(quantile(&s, 1.0), 3.0);
        assert_relative_eq!(quantile(&s, 0.5), 1.5);
    }
}
