use stellarcrit::eos::EosSpec;
use stellarcrit::hydro::{diagnostics, init_state, run, Partition, ProfileSpec, RunConfig, Termination, VelocitySpec};
use stellarcrit::lane_emden::solve_star;
use stellarcrit::profile::{uniform_grid, RadialProfile, VelocityProfile};

fn config(eos: EosSpec, profile: ProfileSpec, cells: usize, t_end: f64, interval: f64) -> RunConfig {
    RunConfig {
        eos,
        dim: 3,
        initial_profile: profile,
        velocity: VelocitySpec::Zero,
        epsilon: 0.0,
        inner_radius: 0.0,
        cells,
        partition: Partition::EqualMass,
        hydrostatic_start: false,
        t_end,
        output_interval: interval,
        max_steps: None,
        reference_mu: None,
        output: None,
    }
}

#[test]
fn stationary_star_has_vanishing_virial_second_derivative() {
    let eos = EosSpec::polytropic(1.0, 1.3).unwrap();
    let star = solve_star(&eos, 1.0).unwrap();
    let s = init_state(&star.profile, None, &eos, 0.0, 0.0, 1024, Partition::SurfaceRefined).unwrap();
    let d = diagnostics(&s, None);
    assert!(d.hpp.abs() < 1e-3 * 3.0 * d.internal * 0.3, "H''={}", d.hpp);
}

#[test]
fn relaxed_star_stays_put() {
    let eos = EosSpec::polytropic(1.0, 1.3).unwrap();
    let star = solve_star(&eos, 1.0).unwrap();
    let mut s = init_state(&star.profile, None, &eos, 0.0, 0.0, 256, Partition::EqualMass).unwrap();
    s.relax_hydrostatic().unwrap();
    let amax = s.accelerations().iter().fold(0.0f64, |a, x| a.max(x.abs()));
    assert!(amax < 1e-8, "max acceleration {amax}");
    let r0 = s.outer_radius();
    for _ in 0..200 {
        s.step(f64::INFINITY).unwrap();
    }
    assert!((s.outer_radius() / r0 - 1.0).abs() < 1e-8);
}

#[test]
fn viscous_run_conserves_mass_and_dissipates() {
    let eos = EosSpec::polytropic(1.0, 1.3).unwrap();
    let mut cfg = config(
        eos,
        ProfileSpec::LaneEmden {
            mu: 1.0,
            amplitude: 0.8,
        },
        256,
        20.0,
        0.5,
    );
    cfg.epsilon = 1e-3;
    cfg.velocity = VelocitySpec::Homologous { amplitude: 0.3 };
    let out = run(&cfg, None).unwrap();
    assert_eq!(out.termination, Termination::Completed);
    let m0 = out.records[0].m;
    for w in out.records.windows(2) {
        assert!(w[1].e <= w[0].e + 1e-12 * w[0].e.abs(), "energy rose at t={}", w[1].t);
        assert!((w[1].m / m0 - 1.0).abs() <= 1e-12);
    }
    assert!(out.records.last().unwrap().e < out.records[0].e);
}

#[test]
fn assembled_virial_matches_differenced_moment() {
    // Smooth expansion of a subcritical-mass gamma = 4/3 star.
    let eos = EosSpec::polytropic(1.0, 4.0 / 3.0).unwrap();
    let h = 0.05;
    let cfg = config(
        eos,
        ProfileSpec::LaneEmden {
            mu: 1.0,
            amplitude: 0.5,
        },
        512,
        20.0 * h,
        h,
    );
    let out = run(&cfg, None).unwrap();
    let rec = &out.records;
    for i in 1..rec.len() - 1 {
        let numeric = (rec[i + 1].h - 2.0 * rec[i].h + rec[i - 1].h) / (h * h);
        let assembled = rec[i].hpp;
        assert!(
            (numeric / assembled - 1.0).abs() < 0.05,
            "t={}: {numeric} vs {assembled}",
            rec[i].t
        );
        let first = (rec[i + 1].h - rec[i - 1].h) / (2.0 * h);
        assert!((first / rec[i].hp - 1.0).abs() < 0.05);
    }
}

#[test]
fn uniform_ball_starts_at_rest() {
    let eos = EosSpec::polytropic(1.0, 1.3).unwrap();
    let rho = RadialProfile::from_fn(3, uniform_grid(1.0, 32), |_| 1.0).unwrap();
    let s = init_state(&rho, None, &eos, 0.0, 0.0, 64, Partition::UniformRadius).unwrap();
    assert_eq!(diagnostics(&s, None).hp, 0.0);
}

#[test]
fn truncated_center_keeps_inner_edge_fixed() {
    let eos = EosSpec::polytropic(1.0, 1.3).unwrap();
    let star = solve_star(&eos, 1.0).unwrap();
    let u = VelocityProfile::from_fn(3, star.profile.radii().to_vec(), |r| -0.1 * r).unwrap();
    let a = 0.1 * star.radius;
    let mut s = init_state(&star.profile, Some(&u), &eos, 0.0, a, 128, Partition::EqualMass).unwrap();
    assert!((s.total_mass() - (star.profile.mass() - star.profile.enclosed_mass(a))).abs() < 1e-9);
    for _ in 0..100 {
        s.step(f64::INFINITY).unwrap();
    }
    assert_eq!(s.edge_radii[0], a);
    assert_eq!(s.edge_velocities[0], 0.0);
}

#[test]
fn max_steps_stops_the_run() {
    let eos = EosSpec::polytropic(1.0, 1.3).unwrap();
    let mut cfg = config(
        eos,
        ProfileSpec::UniformBall {
            density: 1.0,
            radius: 1.0,
        },
        64,
        100.0,
        1.0,
    );
    cfg.max_steps = Some(10);
    let out = run(&cfg, None).unwrap();
    assert_eq!(out.termination, Termination::MaxSteps);
    assert_eq!(out.final_state.steps, 10);
    assert_eq!(out.records.last().unwrap().t, out.final_state.time);
}

#[test]
fn runs_are_deterministic() {
    let eos = EosSpec::polytropic(1.0, 1.25).unwrap();
    let cfg = config(
        eos,
        ProfileSpec::PowerCap {
            central_density: 1.0,
            radius: 2.0,
            exponent: 2.0,
        },
        128,
        2.0,
        0.25,
    );
    let a = run(&cfg, None).unwrap();
    let b = run(&cfg, None).unwrap();
    assert_eq!(a.records, b.records);
}
