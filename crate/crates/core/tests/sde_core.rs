use mkvlevy_core::levy_noise::{sample_increments, LevyNoise, LevyTriplet};
use mkvlevy_core::rng::{Domain, Streams};
use mkvlevy_core::sde_core::*;
use mkvlevy_core::stats::mean_se;
use mkvlevy_core::subordinator::BernsteinSpec;
use mkvlevy_core::TimeGrid;

#[test]
fn brownian_variance_at_one() {
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let noise = LevyNoise::new(&LevyTriplet::brownian(1)).unwrap();
    let b = simulate_bundle(
        &DriftField::zero(1),
        &Sigma::identity(),
        &noise,
        &[0.0],
        &grid,
        &Streams::new(1),
        100_000,
    )
    .unwrap();
    let sq: Vec<f64> = b.terminal().iter().map(|x| x * x).collect();
    let m = mean_se(&sq);
    assert!((m.mean - 1.0).abs() <= 4.0 * m.se);
}

#[test]
fn synchronous_contraction_is_pathwise() {
    let kappa = -1.5;
    let beta = -kappa / 2.0;
    let grid = TimeGrid::uniform(2.0, 400).unwrap();
    let dt = grid.dt(0);
    let drift = DriftField::new(1, move |_, x, o| o[0] = -beta * x[0] - 0.3 * x[0].powi(3), move |_| kappa, |_| 0.0);
    let t = LevyTriplet::subordinate(1, BernsteinSpec::stable(0.75));
    for i in 0..200 {
        let z = sample_increments(&t, &grid, &mut Streams::new(2).stream(Domain::Particle, i)).unwrap();
        let x = euler_solve(&drift, &Sigma::identity(), &z, &[1.0]).unwrap();
        let y = euler_solve(&drift, &Sigma::identity(), &z, &[-0.5]).unwrap();
        for (k, s) in grid.times().iter().enumerate() {
            let gap = (x.state(k)[0] - y.state(k)[0]).abs();
            let bound = 1.5 * (kappa * s / 2.0).exp() * (1.0 + 10.0 * dt);
            assert!(gap <= bound, "path {i} t={s}: {gap} > {bound}");
        }
    }
}

#[test]
fn euler_error_halves_with_step() {
    // σ ≡ 0 OU example: the error against x0 e^{-T} is pure discretisation
    let x0 = 1.0;
    let err = |n: usize| {
        let grid = TimeGrid::uniform(1.0, n).unwrap();
        let z = sample_increments(&LevyTriplet::zero(1), &grid, &mut Streams::new(3).stream(Domain::Particle, 0)).unwrap();
        let p = euler_solve(&DriftField::ou(1, 1.0), &Sigma::Scalar(0.0), &z, &[x0]).unwrap();
        (p.terminal()[0] - x0 * (-1.0f64).exp()).abs()
    };
    for n in [20, 40, 80] {
        let ratio = err(n) / err(2 * n);
        assert!((1.5..=2.5).contains(&ratio), "n={n}: {ratio}");
    }
}

#[test]
fn sup_moment_refinement_stable() {
    let grid = TimeGrid::uniform(1.0, 50).unwrap();
    let noise = LevyNoise::new(&LevyTriplet::subordinate(1, BernsteinSpec::stable(0.75))).unwrap();
    let small = simulate_bundle(
        &DriftField::ou(1, 1.0),
        &Sigma::identity(),
        &noise,
        &[0.0],
        &grid,
        &Streams::new(4),
        50_000,
    )
    .unwrap();
    let big = simulate_bundle(
        &DriftField::ou(1, 1.0),
        &Sigma::identity(),
        &noise,
        &[0.0],
        &grid,
        &Streams::new(4),
        100_000,
    )
    .unwrap();
    let (a, b) = (sup_moment(&small, 1.0), sup_moment(&big, 1.0));
    assert!(a.is_finite() && b.is_finite());
    assert!(((a - b) / b).abs() < 0.05, "{a} vs {b}");
}
