use mkvlevy_core::ergodicity::*;
use mkvlevy_core::levy_noise::{LevyNoise, LevyTriplet};
use mkvlevy_core::mkv::*;
use mkvlevy_core::rng::Streams;
use mkvlevy_core::sde_core::Sigma;
use mkvlevy_core::subordinator::BernsteinSpec;
use mkvlevy_core::{Error, TimeGrid};

fn point(n: usize, x: f64) -> ParticleEnsemble {
    InitialLaw::PointMass { x: vec![x] }.sample(n, &Streams::new(0)).unwrap()
}

fn meanfield_run(triplet: LevyTriplet, seed: u64) -> ContractionReport {
    let noise = LevyNoise::new(&triplet).unwrap();
    let grid = TimeGrid::uniform(4.0, 400).unwrap();
    contraction_experiment(
        &MkvDrift::meanfield_ou(1, 1.0, 0.5),
        &Sigma::identity(),
        &noise,
        &point(5000, 0.0),
        &point(5000, 2.0),
        &grid,
        &Streams::new(seed),
        &ContractionOptions::default(),
    )
    .unwrap()
}

fn check_meanfield(r: &ContractionReport) {
    assert_eq!(r.bound_violations, 0);
    assert!((r.theory_rate - 0.5).abs() < 1e-9);
    let rate = r.fitted_rate.unwrap();
    assert!((0.45..=0.55).contains(&rate), "rate {rate}");
    for ((t, w), se) in r.times.iter().zip(&r.distances).zip(&r.ses) {
        let exact = 2.0 * (-0.5 * t).exp();
        assert!((w - exact).abs() <= (0.05 * exact).max(3.0 * se), "t={t} w={w} exact={exact}");
    }
}

#[test]
fn meanfield_ou_contracts_at_closed_form_rate_brownian() {
    check_meanfield(&meanfield_run(LevyTriplet::brownian(1), 3));
}

#[test]
fn meanfield_ou_contracts_at_closed_form_rate_stable() {
    check_meanfield(&meanfield_run(LevyTriplet::subordinate(1, BernsteinSpec::stable(0.75)), 4));
}

#[test]
fn identical_initial_laws_stay_identical() {
    let noise = LevyNoise::new(&LevyTriplet::brownian(1)).unwrap();
    let grid = TimeGrid::uniform(1.0, 50).unwrap();
    let streams = Streams::new(9);
    let mu0 = InitialLaw::Gaussian { mean: vec![0.0], std: 1.0 }.sample(500, &streams).unwrap();
    let r = contraction_experiment(
        &MkvDrift::meanfield_ou(1, 1.0, 0.5),
        &Sigma::identity(),
        &noise,
        &mu0,
        &mu0,
        &grid,
        &streams,
        &ContractionOptions::default(),
    )
    .unwrap();
    assert!(r.distances.iter().all(|&w| w == 0.0));
    assert_eq!(r.bound_violations, 0);
}

#[test]
fn law_free_contraction_respects_exponential_bound_across_seeds() {
    // κ₁ = -2, κ₂ = 0: bound e^{-t} Ŵ(μ0, ν0) for any pair of initial laws
    let noise = LevyNoise::new(&LevyTriplet::subordinate(1, BernsteinSpec::stable(0.75))).unwrap();
    let grid = TimeGrid::uniform(3.0, 300).unwrap();
    for seed in 0..5 {
        let streams = Streams::new(seed);
        let mu0 = InitialLaw::Gaussian { mean: vec![0.0], std: 1.0 }.sample(1000, &streams).unwrap();
        let nu0 = InitialLaw::UniformBox {
            lo: vec![1.0],
            hi: vec![4.0],
        }
        .sample(1000, &streams.derive(1))
        .unwrap();
        let r = contraction_experiment(
            &MkvDrift::ou(1, 1.0),
            &Sigma::identity(),
            &noise,
            &mu0,
            &nu0,
            &grid,
            &streams,
            &ContractionOptions::default(),
        )
        .unwrap();
        assert_eq!(r.bound_violations, 0, "seed {seed}");
        for (t, b) in r.times.iter().zip(&r.bounds) {
            assert!((b - r.initial_distance * (-t).exp()).abs() < 1e-9 * r.initial_distance);
        }
    }
}

#[test]
fn contraction_factor_integrates_time_dependent_kappa() {
    let drift = MkvDrift::new("t", 1, 1.0, |_, _, _, _| {}, |s| -s, |_| 0.0, |_| 0.0);
    assert!((contraction_factor(&drift, 2.0) - (-1.0f64).exp()).abs() < 1e-9);
    assert_eq!(contraction_factor(&drift, 0.0), 1.0);
}

#[test]
fn ou_invariant_measure_is_half_variance_gaussian() {
    let noise = LevyNoise::new(&LevyTriplet::brownian(1)).unwrap();
    let drift = MkvDrift::ou(1, 1.0);
    let streams = Streams::new(21);
    let mu0 = point(10_000, 3.0);
    let r = invariant_measure(
        &drift,
        &Sigma::identity(),
        &noise,
        &mu0,
        10.0,
        &streams,
        &InvariantOptions::default(),
    )
    .unwrap();
    let v = r.ensemble.variance();
    assert!((0.45..=0.55).contains(&v), "variance {v}");
    assert!(r.log.first().unwrap().gap > r.log.last().unwrap().gap);

    let fp = fixed_point_check(&drift, &Sigma::identity(), &noise, &r.ensemble, 1.0, 0.01, &streams.derive(2), 200).unwrap();
    assert!(fp.pass, "{fp:?}");

    // W(P_t ν0, P_t μ̂) ≤ e^{-κt} W(ν0, μ̂)
    let nu0 = InitialLaw::Gaussian { mean: vec![2.0], std: 0.3 }
        .sample(10_000, &streams.derive(1))
        .unwrap();
    let c = contraction_experiment(
        &drift,
        &Sigma::identity(),
        &noise,
        &r.ensemble,
        &nu0,
        &TimeGrid::uniform(2.0, 200).unwrap(),
        &streams.derive(3),
        &ContractionOptions::default(),
    )
    .unwrap();
    assert_eq!(c.bound_violations, 0);
}

#[test]
fn convergence_declared_after_long_burn_in() {
    let noise = LevyNoise::new(&LevyTriplet::subordinate(1, BernsteinSpec::stable(0.75))).unwrap();
    let r = invariant_measure(
        &MkvDrift::meanfield_ou(1, 1.0, 0.5),
        &Sigma::identity(),
        &noise,
        &point(4000, 3.0),
        24.0,
        &Streams::new(5),
        &InvariantOptions::default(),
    )
    .unwrap();
    assert!(r.converged, "{:?}", r.log);
    let short = invariant_measure(
        &MkvDrift::meanfield_ou(1, 1.0, 0.5),
        &Sigma::identity(),
        &noise,
        &point(4000, 3.0),
        1.0,
        &Streams::new(5),
        &InvariantOptions::default(),
    )
    .unwrap();
    assert!(!short.converged, "{:?}", short.log);
}

#[test]
fn invariant_measure_preconditions() {
    let noise = LevyNoise::new(&LevyTriplet::brownian(1)).unwrap();
    let mu0 = point(10, 0.0);
    let s = Streams::new(0);
    let o = InvariantOptions::default();
    let expanding = MkvDrift::ou(1, -0.5);
    assert!(matches!(
        invariant_measure(&expanding, &Sigma::identity(), &noise, &mu0, 1.0, &s, &o),
        Err(Error::Precondition(_))
    ));
    let inhomogeneous = MkvDrift::ou(1, 1.0).homogeneous(false);
    assert!(matches!(
        invariant_measure(&inhomogeneous, &Sigma::identity(), &noise, &mu0, 1.0, &s, &o),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn report_csv_has_header_and_rows() {
    let r = meanfield_run(LevyTriplet::brownian(1), 1);
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let s = String::from_utf8(buf).unwrap();
    assert!(s.starts_with("t,distance,se,bound\n"));
    assert_eq!(s.lines().count(), r.times.len() + 1);
}
