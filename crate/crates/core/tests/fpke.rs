use mkvlevy_core::fpke::*;
use mkvlevy_core::metrics::{wasserstein1_densities, wasserstein_1d};
use mkvlevy_core::mkv::{InitialLaw, MkvDrift};
use mkvlevy_core::quad::gamma;
use mkvlevy_core::{Error, Streams};
use proptest::prelude::*;

fn l1(a: &[f64], b: &[f64], dx: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * dx
}

fn gauss(x: f64, m: f64, s: f64) -> f64 {
    (-(x - m) * (x - m) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
}

#[test]
fn alpha_outside_range_is_a_domain_error() {
    for a in [0.5, 1.0, 0.3, f64::NAN] {
        assert!(matches!(Grid1D::new(10.0, 100, a), Err(Error::Domain(_))));
    }
}

#[test]
fn zero_maps_to_zero() {
    let g = Grid1D::new(20.0, 400, 0.8).unwrap();
    assert!(frac_laplacian_apply(&g, &vec![0.0; 400]).unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn delta_response_is_even() {
    let g = Grid1D::new(20.0, 401, 0.75).unwrap();
    let mut u = vec![0.0; 401];
    u[200] = 1.0 / g.dx;
    let lu = frac_laplacian_apply(&g, &u).unwrap();
    for k in 1..=200 {
        assert!((lu[200 - k] - lu[200 + k]).abs() <= 1e-12 * lu[200].abs(), "{k}");
    }
}

#[test]
fn fft_matches_direct_sum() {
    let g = Grid1D::new(10.0, 333, 0.6).unwrap();
    let op = FracLaplacian::new(&g).unwrap();
    let u: Vec<f64> = g.xs().iter().map(|&x| gauss(x, 1.0, 0.7) + 0.3 * gauss(x, -2.0, 1.5)).collect();
    let (a, b) = (op.apply(&u), op.apply_direct(&u));
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-10 * scale);
    }
}

#[test]
fn constant_matches_symbol_convention() {
    // ∫_0^∞(1 - cos z) z^{-1-a} dz = -Γ(-a) cos(πa/2), so
    // 2 c_α ∫_0^∞(cos z - 1) z^{-1-2α} dz = 2 c_α Γ(-2α) cos(πα) must be -2^{-α}
    for alpha in [0.55, 0.6, 0.75, 0.9, 0.95] {
        let v = 2.0 * c_alpha(alpha) * gamma(-2.0 * alpha) * (std::f64::consts::PI * alpha).cos();
        assert!((v + 0.5f64.powf(alpha)).abs() < 1e-12, "{alpha}: {v}");
    }
    assert!((c_alpha(0.9) - 0.08837).abs() < 1e-5);
}

#[test]
fn gaussian_at_centre_matches_quadrature_and_closed_form() {
    for alpha in [0.6, 0.75, 0.9] {
        let g = Grid1D::new(50.0, 4001, alpha).unwrap();
        let u: Vec<f64> = g.xs().iter().map(|&x| gauss(x, 0.0, 1.0)).collect();
        let lu = frac_laplacian_apply(&g, &u).unwrap();
        let quad = frac_laplacian_quadrature(|x| gauss(x, 0.0, 1.0), 0.0, alpha);
        let closed = -std::f64::consts::SQRT_2 * gamma(alpha + 0.5) / (2.0 * std::f64::consts::PI);
        assert!((quad / closed - 1.0).abs() < 1e-6, "{alpha}: quadrature {quad} vs {closed}");
        assert!((lu[2000] / quad - 1.0).abs() < 1e-2, "{alpha}: grid {} vs {quad}", lu[2000]);
    }
}

#[test]
fn multiplier_matches_symbol_at_resolved_frequencies() {
    let g = Grid1D::new(50.0, 2000, 0.9).unwrap();
    let xis: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0, 6.0].to_vec();
    for e in symbol_check(&g, &xis).unwrap() {
        assert!(e.rel_error < 1e-2, "{e:?}");
    }
}

#[test]
fn stable_density_oracle_is_a_density() {
    let (t, alpha) = (0.7, 0.8);
    // Gaussian limit check: α → 1 would give N(0, t); here check mass and symmetry
    let xs: Vec<f64> = (0..4001).map(|i| -40.0 + 0.02 * i as f64).collect();
    let p: Vec<f64> = xs.iter().map(|&x| stable_density(x, t, alpha)).collect();
    let mass: f64 = p.iter().sum::<f64>() * 0.02;
    assert!(mass > 0.99 && mass < 1.0, "{mass}");
    assert!((stable_density(1.3, t, alpha) - stable_density(-1.3, t, alpha)).abs() < 1e-14);
    // the peak is (1/π)∫e^{-t(ξ²/2)^α}dξ = Γ(1 + 1/(2α)) √2 t^{-1/(2α)} / π
    let peak = gamma(1.0 + 0.5 / alpha) * std::f64::consts::SQRT_2 * t.powf(-0.5 / alpha) / std::f64::consts::PI;
    assert!((stable_density(0.0, t, alpha) / peak - 1.0).abs() < 1e-8);
}

#[test]
fn free_evolution_matches_fourier_inversion() {
    let alpha = 0.9;
    let g = Grid1D::new(50.0, 2000, alpha).unwrap();
    let (t0, t1) = (0.2, 1.0);
    let u0 = DensityField {
        values: g.xs().iter().map(|&x| stable_density(x, t0, alpha)).collect(),
        time: t0,
    };
    let solver = FpkeSolver::new(&g, None).unwrap();
    let run = solver.solve(&u0, t1, &[]).unwrap();
    let exact: Vec<f64> = g.xs().iter().map(|&x| stable_density(x, t1, alpha)).collect();
    let err = l1(&run.terminal().values, &exact, g.dx);
    assert!(err <= 2e-2, "L1 error {err}");
    assert_eq!(run.max_clipped, 0.0);
}

#[test]
fn zero_step_leaves_density_unchanged() {
    let g = Grid1D::new(20.0, 400, 0.8).unwrap();
    let d = MkvDrift::meanfield_ou(1, 1.0, 0.5);
    let s = FpkeSolver::new(&g, Some(&d)).unwrap();
    let u = gaussian_density(&g, 0.3, 1.0);
    let (v, stats) = s.step(&u, 0.0).unwrap();
    assert_eq!(u, v);
    assert_eq!(stats, StepStats::default());
}

#[test]
fn step_above_cap_is_rejected() {
    let g = Grid1D::new(20.0, 400, 0.8).unwrap();
    let s = FpkeSolver::new(&g, None).unwrap();
    let u = gaussian_density(&g, 0.0, 1.0);
    assert!(matches!(s.step(&u, 2.0 * g.jump_cap()), Err(Error::Precondition(_))));
}

#[test]
fn pure_drift_translates_with_upwind_diffusion() {
    let g = Grid1D::new(20.0, 800, 0.8).unwrap();
    let v = 1.5;
    let d = MkvDrift::constant(vec![v]);
    let g = g.clone().with_dt(0.2 * g.dx / v);
    let mut s = FpkeSolver::new(&g, Some(&d)).unwrap();
    s.jumps = false;
    let t = 2.0;
    let u = s.solve(&gaussian_density(&g, -2.0, 1.0), t, &[]).unwrap();
    let u = u.terminal();
    let mean: f64 = g.xs().iter().zip(&u.values).map(|(x, p)| x * p).sum::<f64>() * g.dx;
    assert!((mean - (-2.0 + v * t)).abs() < 1e-6, "{mean}");
    // modified equation of first-order upwind: diffusion v dx (1 - ν)/2
    let cfl = v * g.dt / g.dx;
    let var = 1.0 + v * g.dx * (1.0 - cfl) * t;
    let exact = gaussian_density(&g, -2.0 + v * t, var.sqrt());
    assert!(l1(&u.values, &exact.values, g.dx) < 5e-3);
    let naive = gaussian_density(&g, -2.0 + v * t, 1.0);
    assert!(l1(&u.values, &naive.values, g.dx) > 1e-2);
}

#[test]
fn point_mass_is_a_narrow_gaussian() {
    let g = Grid1D::new(20.0, 400, 0.8).unwrap();
    let u = initial_density(&g, &InitialLaw::PointMass { x: vec![1.0] }).unwrap();
    let var: f64 = g.xs().iter().zip(&u.values).map(|(x, p)| (x - 1.0) * (x - 1.0) * p).sum::<f64>() * g.dx;
    assert!((var.sqrt() / (3.0 * g.dx) - 1.0).abs() < 0.05);
    assert!((u.mass(g.dx) - 1.0).abs() < 1e-12);
}

#[test]
fn reference_solve_conserves_mass_and_stays_positive() {
    let g = Grid1D::new(50.0, 2000, 0.9).unwrap();
    let d = MkvDrift::meanfield_ou(1, 1.0, 0.5);
    let s = FpkeSolver::new(&g, Some(&d)).unwrap();
    let u0 = initial_density(&g, &InitialLaw::PointMass { x: vec![1.0] }).unwrap();
    let run = s.solve(&u0, 1.0, &[0.25, 0.5, 0.75]).unwrap();
    let u = run.terminal();
    // lost mass is accounted for by the boundary leaks
    let balance = u.mass(g.dx) + run.total_leak() - run.initial_mass;
    assert!(balance.abs() < 1e-5, "{balance}");
    assert!((u.mass(g.dx) - 1.0).abs() < TOL_MASS);
    assert!(run.max_clipped <= TOL_CLIP);
    assert!(run.snapshots.iter().all(|s| s.values.iter().all(|v| *v >= 0.0)));
    assert_eq!(run.snapshots.len(), 4);
}

#[test]
fn cdf_distance_agrees_with_sample_distance() {
    let g = Grid1D::new(30.0, 1200, 0.8).unwrap();
    let u = gaussian_density(&g, 0.0, 1.0);
    let v = initial_density(
        &g,
        &InitialLaw::UniformBox {
            lo: vec![-1.0],
            hi: vec![2.5],
        },
    )
    .unwrap();
    let exact = wasserstein1_densities(&u.values, &v.values, g.dx);
    let n = 20000;
    let sampled = wasserstein_1d(&u.quantile_points(&g, n), &v.quantile_points(&g, n), 1.0)
        .unwrap()
        .value;
    assert!((exact - sampled).abs() < 2e-3, "{exact} vs {sampled}");
}

#[test]
fn translated_gaussians_under_ou_contract_like_exp_minus_t() {
    let g = Grid1D::new(50.0, 2000, 0.9).unwrap();
    let d = MkvDrift::ou(1, 1.0);
    let mu = InitialLaw::Gaussian { mean: vec![0.0], std: 1.0 };
    let nu = InitialLaw::Gaussian { mean: vec![1.0], std: 1.0 };
    let r = fpke_stability_check(&g, &d, &mu, &nu, 2.0, 8, 0.1).unwrap();
    assert!(r.pass);
    assert!((r.initial_distance - 1.0).abs() < 1e-6);
    for e in &r.entries {
        assert!((e.distance / ((-e.t).exp() * r.initial_distance) - 1.0).abs() < 0.02, "{e:?}");
    }
}

#[test]
fn stability_bound_holds_with_meanfield_coupling() {
    let g = Grid1D::new(50.0, 2000, 0.9).unwrap();
    let d = MkvDrift::meanfield_ou(1, 1.0, 0.5);
    let mu = InitialLaw::PointMass { x: vec![0.0] };
    let nu = InitialLaw::Gaussian { mean: vec![2.0], std: 0.5 };
    let r = fpke_stability_check(&g, &d, &mu, &nu, 2.0, 8, 0.1).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn equal_initial_laws_stay_at_distance_zero() {
    let g = Grid1D::new(20.0, 400, 0.8).unwrap();
    let d = MkvDrift::meanfield_ou(1, 1.0, 0.5);
    let mu = InitialLaw::Gaussian { mean: vec![0.5], std: 1.0 };
    let r = fpke_stability_check(&g, &d, &mu, &mu, 1.0, 4, 0.1).unwrap();
    assert!(r.pass);
    assert!(r.entries.iter().all(|e| e.distance == 0.0));
}

#[test]
fn correspondence_at_time_zero_is_sampling_error() {
    let g = Grid1D::new(20.0, 800, 0.8).unwrap();
    let d = MkvDrift::meanfield_ou(1, 1.0, 0.5);
    let mu = InitialLaw::Gaussian { mean: vec![0.0], std: 1.0 };
    let r = correspondence_check(
        &g,
        &d,
        &mu,
        0.0,
        &Streams::new(3),
        &CorrespondenceOptions {
            refinements: 0,
            ..Default::default()
        },
    )
    .unwrap();
    for e in &r.by_size {
        // E Ŵ₁ for a standard Gaussian sample is about 0.9 / √N
        let n = e.n as f64;
        assert!(e.distance < 3.0 / n.sqrt() && e.distance > 0.2 / n.sqrt(), "{e:?}");
    }
}

#[test]
fn free_particles_match_grid_density() {
    let g = Grid1D::new(50.0, 2000, 0.9).unwrap();
    let d = MkvDrift::zero(1);
    let mu = InitialLaw::PointMass { x: vec![0.0] };
    let r = correspondence_check(
        &g,
        &d,
        &mu,
        1.0,
        &Streams::new(5),
        &CorrespondenceOptions {
            refinements: 0,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn meanfield_ou_correspondence_passes() {
    let g = Grid1D::new(50.0, 2000, 0.9).unwrap();
    let d = MkvDrift::meanfield_ou(1, 1.0, 0.5);
    let mu = InitialLaw::Gaussian { mean: vec![1.0], std: 0.5 };
    let r = correspondence_check(&g, &d, &mu, 1.0, &Streams::new(11), &CorrespondenceOptions::default()).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.refinements[1].grid_change.unwrap() < 1e-2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn steps_keep_mass_balance_and_positivity(
        m1 in -5.0f64..5.0, s1 in 0.2f64..2.0, m2 in -5.0f64..5.0, s2 in 0.2f64..2.0,
        w in 0.0f64..1.0, alpha in 0.55f64..0.95, beta in 0.0f64..2.0, gamma in -1.0f64..1.0,
    ) {
        let g = Grid1D::new(20.0, 400, alpha).unwrap();
        let d = MkvDrift::meanfield_ou(1, beta, gamma);
        let s = FpkeSolver::new(&g, Some(&d)).unwrap();
        let a = gaussian_density(&g, m1, s1);
        let b = gaussian_density(&g, m2, s2);
        let u = DensityField { values: a.values.iter().zip(&b.values).map(|(x, y)| w * x + (1.0 - w) * y).collect(), time: 0.0 };
        let m0 = u.mass(g.dx);
        let dt = s.cap(&u);
        let (v, st) = s.step(&u, dt).unwrap();
        prop_assert!(v.values.iter().all(|x| *x >= 0.0));
        prop_assert!(st.clipped <= TOL_CLIP);
        prop_assert!((v.mass(g.dx) + st.jump_leak + st.drift_leak - m0).abs() < 1e-12);
    }

    #[test]
    fn operator_is_symmetric(alpha in 0.55f64..0.95, i in 0usize..60, j in 0usize..60) {
        let g = Grid1D::new(5.0, 60, alpha).unwrap();
        let mut ei = vec![0.0; 60];
        let mut ej = vec![0.0; 60];
        ei[i] = 1.0;
        ej[j] = 1.0;
        let op = FracLaplacian::new(&g).unwrap();
        let (a, b) = (op.apply(&ej)[i], op.apply(&ei)[j]);
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0));
    }
}
