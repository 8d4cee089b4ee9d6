use mkvlevy_core::metrics::*;
use mkvlevy_core::rng::{Domain, Streams};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn sample(n: usize, seed: u64, shift: f64) -> Vec<f64> {
    let mut rng = Streams::new(seed).stream(Domain::Auxiliary, 0);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            shift + z
        })
        .collect()
}

proptest! {
    #[test]
    fn symmetry_and_triangle(
        x in prop::collection::vec(-5.0f64..5.0, 12),
        y in prop::collection::vec(-5.0f64..5.0, 12),
        z in prop::collection::vec(-5.0f64..5.0, 12),
        p in 1.0f64..4.0,
    ) {
        let dxy = wasserstein_1d(&x, &y, p).unwrap().value;
        prop_assert_eq!(dxy, wasserstein_1d(&y, &x, p).unwrap().value);
        let dxz = wasserstein_1d(&x, &z, p).unwrap().value;
        let dzy = wasserstein_1d(&z, &y, p).unwrap().value;
        prop_assert!(dxy <= dxz + dzy + 1e-9);
        // same in 2-D through the assignment solver
        let e = |a: &[f64]| wasserstein_exact(a, &y, 2, p).unwrap().value;
        let (exy, exz) = (e(&x), wasserstein_exact(&x, &z, 2, p).unwrap().value);
        let ezy = wasserstein_exact(&z, &y, 2, p).unwrap().value;
        prop_assert!(exy <= exz + ezy + 1e-9);
    }

    #[test]
    fn monotone_in_order(x in prop::collection::vec(-5.0f64..5.0, 20), y in prop::collection::vec(-5.0f64..5.0, 20)) {
        let w1 = wasserstein_1d(&x, &y, 1.0).unwrap().value;
        let w2 = wasserstein_1d(&x, &y, 2.0).unwrap().value;
        let w3 = wasserstein_1d(&x, &y, 3.0).unwrap().value;
        prop_assert!(w1 <= w2 + 1e-12 && w2 <= w3 + 1e-12);
    }

    #[test]
    fn exact_agrees_with_sorting_in_1d(x in prop::collection::vec(-5.0f64..5.0, 1..40), shift in -2.0f64..2.0, p in 1.0f64..3.0) {
        let y: Vec<f64> = x.iter().rev().map(|v| v * 0.7 + shift).collect();
        let a = wasserstein_1d(&x, &y, p).unwrap().value;
        let b = wasserstein_exact(&x, &y, 1, p).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn zero_iff_same_sorted_sample(mut x in prop::collection::vec(-5.0f64..5.0, 2..30)) {
        let y: Vec<f64> = x.iter().rev().copied().collect();
        prop_assert_eq!(wasserstein_1d(&x, &y, 1.0).unwrap().value, 0.0);
        x[0] += 0.5;
        prop_assert!(wasserstein_1d(&x, &y, 1.0).unwrap().value > 0.0);
    }
}

#[test]
fn exact_matches_1d_at_budget() {
    let x = sample(512, 1, 0.0);
    let y = sample(512, 2, 0.3);
    let a = wasserstein_1d(&x, &y, 2.0).unwrap().value;
    let b = wasserstein_exact(&x, &y, 1, 2.0).unwrap().value;
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn bootstrap_se_scales_like_inverse_sqrt_n() {
    let mut rng = Streams::new(3).stream(Domain::Bootstrap, 0);
    let se = |n: usize, seed: u64, rng: &mut _| {
        let x = sample(n, seed, 0.0);
        let y = sample(n, seed + 1, 0.5);
        bootstrap_se(&x, &y, 1, 1.0, 400, Resampling::Independent, rng).unwrap()
    };
    let a = se(500, 10, &mut rng);
    let b = se(2000, 20, &mut rng);
    let ratio = b / a;
    assert!((0.35..=0.7).contains(&ratio), "{ratio}");
}

#[test]
fn bootstrap_replicate_count_stability() {
    let x = sample(800, 4, 0.0);
    let y = sample(800, 5, 0.5);
    let mut rng = Streams::new(6).stream(Domain::Bootstrap, 0);
    let a = bootstrap_se(&x, &y, 1, 1.0, 100, Resampling::Independent, &mut rng).unwrap();
    let b = bootstrap_se(&x, &y, 1, 1.0, 1000, Resampling::Independent, &mut rng).unwrap();
    assert!(a >= 0.0 && b >= 0.0);
    assert!(((a - b) / b).abs() < 0.5, "{a} vs {b}");
    // paired resampling of identical samples is exactly zero
    let z = bootstrap_se(&x, &x, 1, 1.0, 100, Resampling::Paired, &mut rng).unwrap();
    assert_eq!(z, 0.0);
}

#[test]
fn density_distance_matches_samples() {
    // Gaussian densities N(0,1) and N(0.7,1) on a grid vs inverse-CDF samples
    let dx = 0.01;
    let xs: Vec<f64> = (0..2001).map(|i| -10.0 + i as f64 * dx).collect();
    let g = |m: f64| -> Vec<f64> {
        xs.iter()
            .map(|x| (-(x - m) * (x - m) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt())
            .collect()
    };
    let (u, v) = (g(0.0), g(0.7));
    let w = wasserstein1_densities(&u, &v, dx);
    assert!((w - 0.7).abs() < 2e-3);
    let n = 20_000;
    let quantiles = |dens: &[f64]| -> Vec<f64> {
        let mut cdf = Vec::with_capacity(dens.len());
        let mut acc = 0.0;
        for d in dens {
            acc += d * dx;
            cdf.push(acc);
        }
        (0..n)
            .map(|i| {
                let q = (i as f64 + 0.5) / n as f64 * acc;
                let k = cdf.partition_point(|&c| c < q);
                xs[k.min(xs.len() - 1)]
            })
            .collect()
    };
    let s = wasserstein_1d(&quantiles(&u), &quantiles(&v), 1.0).unwrap().value;
    assert!((s - w).abs() < 2e-3, "{s} vs {w}");
}
