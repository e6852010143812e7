use proptest::prelude::*;
use srm_core::geometry::{MotorSpec, Topology};
use srm_core::mec::{
    build_lumped_network, build_network, check_dominance, flux_linkage, solve_closed_form, solve_network, solve_network_with,
    Element, FluxSolution, FluxTriple, LumpedReluctances, MagnetModel, Mode, Phase, Scheme, SolveOptions,
};
use srm_core::SrmError;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-15)
}

fn sum(t: [&FluxTriple; 3], f: fn(&FluxTriple) -> f64) -> f64 {
    t.iter().map(|x| f(x)).sum()
}

fn decomposition_gap(s: &FluxSolution) -> f64 {
    let d = &s.decomposition;
    let parts = [&d.phi_prime, &d.phi_dprime, &d.phi_tprime];
    rel(sum(parts, |t| t.phi_sy), s.phi_sy)
        .max(rel(sum(parts, |t| t.phi_sp), s.phi_sp))
        .max(rel(sum(parts, |t| t.phi_g), s.phi_g))
}

fn topology() -> impl Strategy<Value = Topology> {
    (1usize..=4).prop_map(|k| Topology::from_index(k).unwrap())
}

fn phase() -> impl Strategy<Value = Phase> {
    prop_oneof![Just(Phase::A), Just(Phase::B)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_form_matches_lumped_network(top in topology(), theta in -40.0f64..40.0, i in 0.0f64..8.0, ph in phase()) {
        let spec = MotorSpec::preset(top);
        let cf = solve_closed_form(&spec, theta, i, ph, Mode::Linear).unwrap();
        let net = build_lumped_network(&spec, theta, i, ph, MagnetModel::IdealFlux).unwrap();
        let ns = solve_network(&net).unwrap();
        prop_assert!(rel(cf.phi_sy, ns.phi_sy) < 1e-9);
        prop_assert!(rel(cf.phi_sp, ns.phi_sp) < 1e-9);
        prop_assert!(rel(cf.phi_g, ns.phi_g) < 1e-9);
        prop_assert!(decomposition_gap(&cf) < 1e-12);
        prop_assert!(decomposition_gap(&ns) < 1e-9);
    }

    #[test]
    fn flux_linkage_is_periodic(top in topology(), theta in -20.0f64..20.0, i in 0.0f64..8.0) {
        let spec = MotorSpec::preset(top);
        let a = flux_linkage(&spec, theta, i, Phase::A, Mode::Saturable).unwrap();
        let b = flux_linkage(&spec, theta + 20.0, i, Phase::A, Mode::Saturable).unwrap();
        prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-3), "{a} vs {b}");
    }
}

#[test]
fn motor1_loop_flux_is_mmf_over_total_reluctance() {
    let spec = MotorSpec::preset(Topology::Motor1);
    for theta in [-15.0, -10.0, -6.0, -2.0, 0.0, 3.0] {
        let l = LumpedReluctances::new(&spec, theta, 6.0, Phase::A).unwrap();
        let expected = 2.0 * 90.0 * 6.0 / l.r_star();
        let cf = solve_closed_form(&spec, theta, 6.0, Phase::A, Mode::Linear).unwrap();
        assert!(rel(cf.phi_g, expected) < 1e-12);
        assert!(rel(cf.phi_sy, expected) < 1e-12);
    }
}

#[test]
fn aligned_flux_linkage_of_motor1() {
    // 360 turns on the phase, loop mmf 2 * 90 * 6 A-turns
    let spec = MotorSpec::preset(Topology::Motor1);
    let l = LumpedReluctances::new(&spec, 0.0, 6.0, Phase::A).unwrap();
    let hand = 360.0 * (2.0 * 90.0 * 6.0) / l.r_star();
    let cf = solve_closed_form(&spec, 0.0, 6.0, Phase::A, Mode::Linear).unwrap();
    assert!(rel(spec.turns_per_phase() * cf.phi_sp, hand) < 1e-12);
    // the ring network adds the neighbouring core's rotor return path in parallel
    let full = flux_linkage(&spec, 0.0, 6.0, Phase::A, Mode::Linear).unwrap();
    assert!(rel(full, hand) < 1e-3, "{full} vs {hand}");
}

#[test]
fn motor2_gap_flux_closed_form_terms() {
    let spec = MotorSpec::preset(Topology::Motor2);
    let (theta, i) = (-4.0, 3.0);
    let l = LumpedReluctances::new(&spec, theta, i, Phase::A).unwrap();
    let r_pm1 = l.r_pm1.unwrap();
    let expected = 2.0 * l.f_e / l.r_star() + (2.0 * l.r_sp + l.r_sy) / (r_pm1 * l.r_star()) * l.f_pm1;
    let cf = solve_closed_form(&spec, theta, i, Phase::A, Mode::Linear).unwrap();
    assert!(rel(cf.phi_g, expected) < 1e-12);
}

#[test]
fn motor4_without_magnet_mmf_reduces_to_motor1() {
    let mut m4 = MotorSpec::preset(Topology::Motor4);
    m4.pm_material.h_c = 0.0;
    m4.pm_material.b_r = 0.0;
    let m1 = MotorSpec::preset(Topology::Motor1);
    for theta in [-12.0, -7.0, -1.0] {
        let a = solve_closed_form(&m4, theta, 5.0, Phase::A, Mode::Linear).unwrap();
        let b = solve_closed_form(&m1, theta, 5.0, Phase::A, Mode::Linear).unwrap();
        assert!(rel(a.phi_g, b.phi_g) < 1e-12);
        assert!(rel(a.phi_sy, b.phi_sy) < 1e-12);
    }
}

#[test]
fn superposition_terms_vanish_with_their_source() {
    let spec = MotorSpec::preset(Topology::Motor4);
    let with = solve_closed_form(&spec, -6.0, 4.0, Phase::A, Mode::Linear).unwrap();
    let no_current = solve_closed_form(&spec, -6.0, 0.0, Phase::A, Mode::Linear).unwrap();
    assert_eq!(no_current.decomposition.phi_prime, FluxTriple::default());
    assert_eq!(no_current.decomposition.phi_dprime, with.decomposition.phi_dprime);
    assert_eq!(no_current.decomposition.phi_tprime, with.decomposition.phi_tprime);
    let no_pm2 = solve_closed_form(&spec.with_topology(Topology::Motor2), -6.0, 4.0, Phase::A, Mode::Linear).unwrap();
    assert_eq!(no_pm2.decomposition.phi_tprime, FluxTriple::default());
    assert_eq!(no_pm2.decomposition.phi_dprime, with.decomposition.phi_dprime);
}

#[test]
fn closed_form_needs_linear_mode() {
    let spec = MotorSpec::preset(Topology::Motor2);
    assert!(matches!(
        solve_closed_form(&spec, 0.0, 1.0, Phase::A, Mode::Saturable),
        Err(SrmError::ClosedFormNeedsLinear)
    ));
}

#[test]
fn zero_sources_give_zero_flux() {
    let spec = MotorSpec::preset(Topology::Motor1);
    for mode in [Mode::Linear, Mode::Saturable] {
        let net = build_network(&spec, -5.0, 0.0, Phase::A, mode).unwrap();
        assert!(net.branches.iter().all(|b| b.mmf == 0.0));
        let s = solve_network(&net).unwrap();
        assert!(s.branch_flux.iter().all(|&f| f == 0.0));
        assert_eq!(flux_linkage(&spec, -5.0, 0.0, Phase::A, mode).unwrap(), 0.0);
    }
}

#[test]
fn magnet_branches_follow_topology() {
    for top in Topology::ALL {
        let net = build_network(&MotorSpec::preset(top), 0.0, 1.0, Phase::A, Mode::Linear).unwrap();
        let count = |tag: &str| net.branches.iter().filter(|b| b.label.ends_with(tag)).count();
        assert_eq!(count(".pm1") > 0, top.has_pm1(), "{top:?}");
        assert_eq!(count(".pm2") > 0, top.has_pm2(), "{top:?}");
    }
}

#[test]
fn linear_flux_linkage_of_motor1_scales_with_current() {
    let spec = MotorSpec::preset(Topology::Motor1);
    for theta in [-11.0, -5.0, 0.0] {
        let a = flux_linkage(&spec, theta, 1.5, Phase::A, Mode::Linear).unwrap();
        let b = flux_linkage(&spec, theta, 3.0, Phase::A, Mode::Linear).unwrap();
        assert!(rel(2.0 * a, b) < 1e-9);
    }
}

#[test]
fn saturation_lowers_aligned_flux() {
    let spec = MotorSpec::preset(Topology::Motor1);
    let lin = flux_linkage(&spec, 0.0, 8.0, Phase::A, Mode::Linear).unwrap();
    let sat = flux_linkage(&spec, 0.0, 8.0, Phase::A, Mode::Saturable).unwrap();
    assert!(sat < lin, "{sat} vs {lin}");
}

#[test]
fn phase_b_sees_the_rotor_half_a_pitch_later() {
    for top in [Topology::Motor1, Topology::Motor4] {
        let spec = MotorSpec::preset(top);
        for theta in [-13.0, -4.5, 2.0] {
            let b = flux_linkage(&spec, theta, 5.0, Phase::B, Mode::Saturable).unwrap();
            let a = flux_linkage(&spec, theta + 10.0, 5.0, Phase::A, Mode::Saturable).unwrap();
            assert!((a - b).abs() < 1e-6 * a.abs().max(1e-3), "{top:?} {theta}: {a} vs {b}");
        }
    }
}

#[test]
fn newton_and_fixed_point_agree_where_both_converge() {
    let spec = MotorSpec::preset(Topology::Motor1);
    let net = build_network(&spec, -5.0, 2.0, Phase::A, Mode::Saturable).unwrap();
    let newton = solve_network(&net).unwrap();
    let opts = SolveOptions {
        scheme: Scheme::FixedPoint { relaxation: 0.5 },
        tolerance: 1e-9,
        max_iterations: 2000,
    };
    match solve_network_with(&net, &opts) {
        Ok(fp) => assert!(rel(fp.phi_g, newton.phi_g) < 1e-5, "{} vs {}", fp.phi_g, newton.phi_g),
        // the relaxed scheme may stall on stiff points; that is what Newton is for
        Err(SrmError::NonConvergence { .. }) => {}
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn dominance_of_preset_magnets_at_alignment() {
    let net = build_network(&MotorSpec::preset(Topology::Motor4), 0.0, 0.0, Phase::A, Mode::Linear).unwrap();
    let report = check_dominance(&net);
    let ratios = [report.pm1.unwrap(), report.pm2.unwrap()];
    for r in ratios {
        for v in [r.vs_stator, r.vs_rotor, r.vs_parallel] {
            assert!(v > 1.0);
        }
    }
    assert!(report.pass);
}

#[test]
fn dominance_fails_for_thin_magnets_and_grows_with_thickness() {
    let mut thin = MotorSpec::preset(Topology::Motor2);
    let net = build_network(&thin, 0.0, 0.0, Phase::A, Mode::Linear).unwrap();
    let l = &net.lumped;
    // magnet length giving R_PM1 equal to the stator loop reluctance
    thin.l_PM1 *= l.stator_loop() / l.r_pm1.unwrap();
    let report = check_dominance(&build_network(&thin, 0.0, 0.0, Phase::A, Mode::Linear).unwrap());
    assert!((report.pm1.unwrap().vs_stator - 1.0).abs() < 1e-9);
    assert!(!report.pass);

    let mut thick = MotorSpec::preset(Topology::Motor2);
    thick.l_PM1 *= 1e6;
    let report = check_dominance(&build_network(&thick, 0.0, 0.0, Phase::A, Mode::Linear).unwrap());
    assert!(report.pm1.unwrap().vs_rotor > 1e6);
    assert!(report.pass);
}

#[test]
fn disconnected_network_is_rejected() {
    let spec = MotorSpec::preset(Topology::Motor1);
    let mut net = build_lumped_network(&spec, 0.0, 1.0, Phase::A, MagnetModel::Thevenin).unwrap();
    net.branches.clear();
    assert!(matches!(solve_network(&net), Err(SrmError::DegenerateNetwork)));
}

/// Four nodes, five branches, solved through loop equations by hand-rolled
/// elimination rather than the nodal solver.
#[test]
fn random_linear_networks_match_mesh_equations() {
    use proptest::test_runner::{Config, TestRunner};
    let mut runner = TestRunner::new(Config::with_cases(100));
    runner
        .run(&(prop::array::uniform5(1.0f64..100.0), prop::array::uniform5(-50.0f64..50.0)), |(r, f)| {
            // branches: 0:(0->1) 1:(1->2) 2:(2->0) 3:(1->3) 4:(3->2); loops: L1 = 0,1,2 ; L2 = 3,4,-1
            let mut net = build_lumped_network(&MotorSpec::preset(Topology::Motor1), 0.0, 0.0, Phase::A, MagnetModel::Thevenin).unwrap();
            net.nodes = (0..4).map(|k| format!("n{k}")).collect();
            let template = net.branches[0].clone();
            let pairs = [(0, 1), (1, 2), (2, 0), (1, 3), (3, 2)];
            net.branches = pairs
                .iter()
                .enumerate()
                .map(|(k, &(from, to))| {
                    let mut b = template.clone();
                    b.from = from;
                    b.to = to;
                    b.element = Element::Linear { reluctance: r[k] };
                    b.mmf = f[k];
                    b
                })
                .collect();
            net.ground = 0;
            let s = solve_network(&net).unwrap();
            // mesh: (r0+r1+r2) I1 - r1 I2 = f0+f1+f2 ; -r1 I1 + (r1+r3+r4) I2 = f3+f4-f1
            let (a11, a12, a22) = (r[0] + r[1] + r[2], -r[1], r[1] + r[3] + r[4]);
            let (b1, b2) = (f[0] + f[1] + f[2], f[3] + f[4] - f[1]);
            let det = a11 * a22 - a12 * a12;
            let i1 = (b1 * a22 - a12 * b2) / det;
            let i2 = (a11 * b2 - a12 * b1) / det;
            let expected = [i1, i1 - i2, i1, i2, i2];
            for (k, e) in expected.iter().enumerate() {
                prop_assert!((s.branch_flux[k] - e).abs() < 1e-9 * e.abs().max(1.0), "branch {}: {} vs {}", k, s.branch_flux[k], e);
            }
            Ok(())
        })
        .unwrap();
}
