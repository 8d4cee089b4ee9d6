use mkvlevy_core::quad;
use mkvlevy_core::rng::{Domain, Streams};
use mkvlevy_core::stats::mean_se;
use mkvlevy_core::subordinator::*;
use mkvlevy_core::TimeGrid;
use proptest::prelude::*;

fn laplace_check(spec: &BernsteinSpec, n: usize, seed: u64) {
    let grid = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
    let cfg = SamplerConfig {
        extension: 0.0,
        ..SamplerConfig::default()
    };
    let sampler = IncrementSampler::new(spec, &cfg).unwrap();
    let streams = Streams::new(seed);
    let paths: Vec<SubordinatorPath> = (0..n)
        .map(|i| sample_path_with(&sampler, &grid, 0.0, &mut streams.stream(Domain::SubordinatorPath, i as u64)).unwrap())
        .collect();
    for (k, t) in [(1usize, 0.5), (2, 1.0)] {
        for r in [0.5, 1.0, 2.0] {
            let xs: Vec<f64> = paths.iter().map(|p| (-r * p.values[k]).exp()).collect();
            let m = mean_se(&xs);
            let exact = (-t * spec.laplace_exponent(r).unwrap()).exp();
            let tol = 4.0 * m.se + 1e-12;
            assert!(
                (m.mean - exact).abs() <= tol,
                "{spec:?} t={t} r={r}: {} vs {exact} (se {})",
                m.mean,
                m.se
            );
        }
    }
}

#[test]
fn laplace_law_stable() {
    laplace_check(&BernsteinSpec::stable(0.7), 100_000, 1);
}

#[test]
fn laplace_law_relativistic() {
    laplace_check(&BernsteinSpec::RelativisticStable { alpha: 0.6, m: 1.0 }, 100_000, 2);
}

#[test]
fn laplace_law_gamma() {
    laplace_check(&BernsteinSpec::Gamma { a: 1.0 }, 100_000, 3);
}

#[test]
fn laplace_law_log_type() {
    laplace_check(&BernsteinSpec::LogType { a: 1.5 }, 100_000, 4);
}

#[test]
fn laplace_law_pure_drift() {
    laplace_check(&BernsteinSpec::PureDrift { drift: 1.0 }, 1_000, 5);
}

#[test]
fn laplace_law_custom_shifted_pareto() {
    let spec = BernsteinSpec::Custom {
        drift: 0.0,
        density: LevyDensity::ShiftedPareto { n: 2.0 },
        witness: 0.0,
    };
    laplace_check(&spec, 100_000, 6);
}

#[test]
fn laplace_law_custom_tempered_stable() {
    // infinite activity, handled by cutoff + compensation
    let spec = BernsteinSpec::Custom {
        drift: 0.1,
        density: LevyDensity::TemperedStable {
            alpha: 0.5,
            c: 0.5 / quad::gamma(0.5),
            lambda: 1.0,
        },
        witness: 0.5,
    };
    laplace_check(&spec, 100_000, 7);
}

#[test]
fn paths_are_nondecreasing_for_every_kind() {
    let grid = TimeGrid::uniform(1.0, 200).unwrap();
    let specs = [
        BernsteinSpec::stable(0.7),
        BernsteinSpec::RelativisticStable { alpha: 0.6, m: 1.0 },
        BernsteinSpec::Gamma { a: 1.0 },
        BernsteinSpec::LogType { a: 2.0 },
        BernsteinSpec::PureDrift { drift: 0.3 },
    ];
    for spec in &specs {
        let paths = sample_paths(spec, &grid, &SamplerConfig::default(), &Streams::new(9), 50).unwrap();
        for p in &paths {
            assert_eq!(p.values[0], 0.0);
            assert!(p.values.windows(2).all(|w| w[1] >= w[0]), "{spec:?}");
        }
    }
}

#[test]
fn epsilon_ordering_and_convergence() {
    let grid = TimeGrid::uniform(1.0, 500).unwrap();
    let mut rng = Streams::new(4).stream(Domain::SubordinatorPath, 0);
    let p = sample_path(&BernsteinSpec::stable(0.7), &grid, &mut rng).unwrap();
    let eps = [0.5, 0.2, 0.05, 0.01, 0.002];
    let regs: Vec<_> = eps.iter().map(|&e| regularize(&p, e).unwrap()).collect();
    for w in regs.windows(2) {
        for (a, b) in w[0].values.iter().zip(&w[1].values) {
            assert!(b <= a, "ℓ^ε must decrease with ε");
        }
    }
    // at ε equal to one grid step the average is the left value plus εt
    let fine = regularize(&p, grid.dt(0)).unwrap();
    for (k, v) in fine.values.iter().enumerate() {
        let t = grid.times()[k];
        assert!((v - (p.values[k] + grid.dt(0) * t)).abs() < 1e-10);
    }
}

fn arb_path() -> impl Strategy<Value = (SubordinatorPath, f64)> {
    (prop::collection::vec(0.0f64..2.0, 20..60), 0.01f64..0.99).prop_map(|(incs, eps)| {
        let n = incs.len();
        let dt = 2.0 / n as f64;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let mut values = vec![0.0];
        for (i, d) in incs.iter().enumerate() {
            // some flat stretches
            let v = values[i] + if i % 3 == 0 { 0.0 } else { *d };
            values.push(v);
        }
        (SubordinatorPath::from_values(times, values).unwrap().with_horizon(1.0), eps)
    })
}

proptest! {
    #[test]
    fn sandwich_and_strict_monotonicity((p, eps) in arb_path()) {
        let r = regularize(&p, eps).unwrap();
        prop_assert!(r.values.windows(2).all(|w| w[1] > w[0]));
        for (t, v) in r.times.iter().zip(&r.values) {
            let inner = v - eps * t;
            prop_assert!(p.value_at(*t) <= inner + 1e-12);
            prop_assert!(inner <= p.value_at(t + eps) + 1e-12);
        }
    }

    #[test]
    fn inverse_time_is_a_left_inverse((p, eps) in arb_path()) {
        let r = regularize(&p, eps).unwrap();
        for (t, v) in r.times.iter().zip(&r.values) {
            let back = inverse_time(&r, *v).unwrap();
            prop_assert!((back - t).abs() <= 1e-9 * t.max(1.0));
        }
        let lo = r.values[0];
        let hi = *r.values.last().unwrap();
        let s1 = lo + 0.3 * (hi - lo);
        let s2 = lo + 0.31 * (hi - lo);
        prop_assert!(inverse_time(&r, s1).unwrap() < inverse_time(&r, s2).unwrap());
    }

    #[test]
    fn larger_epsilon_gives_larger_path((p, eps) in arb_path()) {
        let a = regularize(&p, eps * 0.5).unwrap();
        let b = regularize(&p, eps).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!(x <= &(y + 1e-12));
        }
    }
}
