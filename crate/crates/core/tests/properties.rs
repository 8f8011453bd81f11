use proptest::prelude::*;

use stellarcrit::criticality::{chandrasekhar_constants, check_invariant_set, critical_constants, q_lower_bound};
use stellarcrit::eos::{EosSpec, PolytropicEos, WhiteDwarfEos};
use stellarcrit::functionals::{evaluate, hls_sharp_check, lambda_star, rearrange_decreasing, scale_profile};
use stellarcrit::lane_emden::solve_star;
use stellarcrit::profile::{surface_clustered_grid, uniform_grid, RadialProfile};

/// Random nonnegative profile with up to three Gaussian bumps on a uniform grid.
fn profile_strategy(dim: usize) -> impl Strategy<Value = RadialProfile> {
    (
        0.3f64..3.0,
        prop::collection::vec((0.05f64..2.0, 0.0f64..1.0, 0.05f64..0.6), 1..4),
        any::<bool>(),
    )
        .prop_map(move |(radius, bumps, cut)| {
            RadialProfile::from_fn(dim, uniform_grid(radius, 48), |r| {
                let x = r / radius;
                let v: f64 = bumps.iter().map(|(a, c, w)| a * (-((x - c) / w).powi(2)).exp()).sum();
                if cut && x >= 1.0 {
                    0.0
                } else {
                    v
                }
            })
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rearrangement_keeps_norms_and_raises_potential(rho in profile_strategy(3)) {
        let star = rearrange_decreasing(&rho).unwrap();
        for p in [1.0, 4.0 / 3.0, 2.0] {
            let (a, b) = (rho.integral_power(p), star.integral_power(p));
            prop_assert!((a - b).abs() <= 1e-10 * a, "p={p}: {a} vs {b}");
        }
        prop_assert!(star.values().windows(2).all(|w| w[1] <= w[0]));
        let (d, ds) = (rho.potential_double_integral(), star.potential_double_integral());
        prop_assert!(ds >= d * (1.0 - 1e-9), "{ds} < {d}");
    }

    #[test]
    fn sharp_constant_bounds_every_profile(rho in profile_strategy(3)) {
        let c_min = chandrasekhar_constants(1.0).unwrap().c_min.unwrap();
        prop_assert!(hls_sharp_check(&rho, c_min).unwrap() >= 0.0);
    }

    #[test]
    fn dilation_scaling_laws(rho in profile_strategy(3), lambda in 0.2f64..5.0, gamma in 1.05f64..1.95) {
        let s = scale_profile(&rho, lambda).unwrap();
        let tol = 1e-10;
        prop_assert!((s.mass() / rho.mass() - 1.0).abs() < tol);
        let expect = lambda.powf(3.0 * (gamma - 1.0));
        prop_assert!((s.integral_power(gamma) / rho.integral_power(gamma) / expect - 1.0).abs() < tol);
        prop_assert!((s.potential_double_integral() / rho.potential_double_integral() / lambda - 1.0).abs() < tol);
    }

    #[test]
    fn virial_vanishes_at_lambda_star(rho in profile_strategy(3), gamma in 1.21f64..1.33) {
        let eos = PolytropicEos::new(1.0, gamma).unwrap();
        let ls = lambda_star(&rho, &eos);
        // Near gamma = 4/3 the dilation factor leaves floating-point range.
        prop_assume!(matches!(ls, Ok(l) if (1e-3..1e3).contains(&l)));
        let ls = ls.unwrap();
        let q = evaluate(&rho.scaled(ls), None, &EosSpec::Polytropic(eos), None).unwrap().q_value;
        let scale = 3.0 * rho.scaled(ls).integral_power(gamma);
        prop_assert!(q.abs() <= 1e-9 * scale, "Q={q}");
    }

    #[test]
    fn potential_identity_in_higher_dimensions(rho in profile_strategy(5)) {
        // Shell theorem form against an independent radial double sum.
        let d = rho.potential_double_integral();
        prop_assert!(d > 0.0);
        let r = rho.outer_radius();
        let m = rho.mass();
        prop_assert!(d >= m * m / r.powi(3) * (1.0 - 1e-12));
    }

    #[test]
    fn white_dwarf_pressure_inverse(a in 0.1f64..10.0, b in 0.1f64..10.0, log_rho in -8.0f64..12.0) {
        let eos = EosSpec::WhiteDwarf(WhiteDwarfEos::new(a, b).unwrap());
        let rho = 10f64.powf(log_rho);
        let back = eos.density_from_pressure(eos.pressure(rho));
        prop_assert!((back / rho - 1.0).abs() < 1e-9);
        let s = eos.enthalpy_derivative(rho);
        prop_assert!((eos.density_from_slope(s).unwrap() / rho - 1.0).abs() < 1e-9);
    }
}

#[test]
fn lower_bound_never_exceeds_virial() {
    let gamma = 1.3;
    let eos = PolytropicEos::new(1.0, gamma).unwrap();
    let consts = critical_constants(1.0, gamma).unwrap();
    let star = solve_star(&EosSpec::Polytropic(eos), 1.0).unwrap();
    let mut checked = 0;
    for lambda in [0.5, 0.6, 0.7, 0.8, 0.9] {
        let rho = star.profile.scaled(lambda);
        let verdict = check_invariant_set(&rho, None, &eos, &consts).unwrap();
        if !verdict.in_set {
            continue;
        }
        let mu = verdict.mu_star.unwrap();
        let bound = q_lower_bound(&rho, &eos, &consts, mu).unwrap();
        assert!(
            bound <= verdict.q_value,
            "lambda={lambda}: {bound} > {}",
            verdict.q_value
        );
        assert!(bound > 0.0);
        checked += 1;
    }
    assert!(checked >= 3);
}

#[test]
fn stationary_star_is_not_a_member() {
    // Q vanishes on the stationary star, so it sits on the boundary of the set.
    let eos = PolytropicEos::new(1.0, 1.3).unwrap();
    let consts = critical_constants(1.0, 1.3).unwrap();
    let star = solve_star(&EosSpec::Polytropic(eos), 1.0).unwrap();
    let verdict = check_invariant_set(&star.profile, None, &eos, &consts).unwrap();
    assert!(!verdict.in_set);
}

#[test]
fn surface_clustered_grid_resolves_star_edge() {
    let eos = EosSpec::polytropic(1.0, 1.3).unwrap();
    let star = solve_star(&eos, 1.0).unwrap();
    let coarse = star
        .profile
        .resampled(surface_clustered_grid(star.radius, 256))
        .unwrap();
    assert!((coarse.mass() / star.mass - 1.0).abs() < 1e-3);
}
