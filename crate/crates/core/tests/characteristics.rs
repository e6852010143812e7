use proptest::prelude::*;
use srm_core::characteristics::{
    analytic_torque_linear, extract_commutation_angles, static_torque, static_torque_with, torque_angle_curve, TorqueAngleCurve,
    TorqueOptions,
};
use srm_core::geometry::{MotorSpec, Topology};
use srm_core::mec::{Mode, Phase};

/// Iron four orders of magnitude more permeable than M19, so the air gap
/// carries the whole loop mmf.
fn air_gap_dominated(top: Topology) -> MotorSpec {
    let mut s = MotorSpec::preset(top);
    for p in s.lamination.points.iter_mut() {
        p.0 *= 1e-4;
    }
    s
}

fn synthetic(f: impl Fn(f64) -> f64, step: f64) -> TorqueAngleCurve {
    let n = (20.0 / step).round() as usize;
    let angles: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    TorqueAngleCurve {
        torque: angles.iter().map(|&a| f(a)).collect(),
        angles,
        current: 6.0,
        topology: Topology::Motor4,
        mode: Mode::Saturable,
        grid_step: step,
        period: 20.0,
        options: TorqueOptions::default(),
        spec_hash: String::new(),
    }
}

/// Positive half-sine lobe on (up, down), negative lobe of a different width
/// and height on the rest of the period.
fn two_lobe(up: f64, down: f64, neg_gain: f64) -> impl Fn(f64) -> f64 {
    let pos = (down - up).rem_euclid(20.0);
    let neg = 20.0 - pos;
    move |a: f64| {
        let x = (a - up).rem_euclid(20.0);
        if x < pos {
            (std::f64::consts::PI * x / pos).sin()
        } else {
            -neg_gain * (std::f64::consts::PI * (x - pos) / neg).sin()
        }
    }
}

#[test]
fn analytic_torque_matches_network_with_air_gap_dominated_iron() {
    let spec = air_gap_dominated(Topology::Motor1);
    let analytic = analytic_torque_linear(&spec, 6.0).unwrap();
    for theta in [-8.0, -7.0, -6.0, -5.0, -4.0] {
        let t = static_torque(&spec, theta, 6.0, Mode::Linear).unwrap();
        assert!(((t - analytic) / analytic).abs() < 0.01, "theta {theta}: {t} vs {analytic}");
    }
}

#[test]
fn lamination_drop_lowers_torque_below_the_air_gap_value() {
    let spec = MotorSpec::preset(Topology::Motor1);
    let analytic = analytic_torque_linear(&spec, 6.0).unwrap();
    for theta in [-8.0, -6.0, -4.0] {
        let t = static_torque(&spec, theta, 6.0, Mode::Linear).unwrap();
        assert!(t < analytic && t > 0.95 * analytic, "theta {theta}: {t} vs {analytic}");
    }
}

#[test]
fn analytic_torque_is_quadratic_in_current() {
    let spec = MotorSpec::preset(Topology::Motor1);
    let a = analytic_torque_linear(&spec, 1.5).unwrap();
    let b = analytic_torque_linear(&spec, 3.0).unwrap();
    assert!((b / a - 4.0).abs() < 1e-12);
    assert_eq!(analytic_torque_linear(&spec, 0.0).unwrap(), 0.0);
}

#[test]
fn zero_current_gives_zero_torque() {
    for top in Topology::ALL {
        let spec = MotorSpec::preset(top);
        assert_eq!(static_torque(&spec, -5.0, 0.0, Mode::Saturable).unwrap(), 0.0);
    }
}

#[test]
fn negative_current_is_rejected() {
    let spec = MotorSpec::preset(Topology::Motor1);
    assert!(static_torque(&spec, 0.0, -1.0, Mode::Linear).is_err());
}

#[test]
fn symmetric_teeth_give_odd_torque_about_alignment() {
    for top in [Topology::Motor1, Topology::Motor4] {
        let spec = MotorSpec::preset(top).symmetric_variant();
        let peak = static_torque(&spec, -5.0, 6.0, Mode::Saturable).unwrap().abs();
        for theta in [1.0, 3.5, 6.0, 9.0] {
            let a = static_torque(&spec, theta, 6.0, Mode::Saturable).unwrap();
            let b = static_torque(&spec, -theta, 6.0, Mode::Saturable).unwrap();
            assert!((a + b).abs() < 1e-4 * peak, "{top:?} theta {theta}: {a} vs {b}");
        }
    }
}

#[test]
fn phase_b_torque_is_phase_a_shifted_half_a_pitch() {
    let spec = MotorSpec::preset(Topology::Motor4);
    let opts = TorqueOptions::default();
    for theta in [-12.0, -3.0] {
        let b = static_torque_with(&spec, theta, 4.0, Phase::B, Mode::Saturable, &opts).unwrap();
        let a = static_torque_with(&spec, theta + 10.0, 4.0, Phase::A, Mode::Saturable, &opts).unwrap();
        assert!((a - b).abs() < 1e-4 * a.abs().max(0.01), "{a} vs {b}");
    }
}

#[test]
fn torque_over_one_period_does_no_net_work() {
    for top in [Topology::Motor1, Topology::Motor4] {
        let spec = MotorSpec::preset(top);
        let curve = &torque_angle_curve(&spec, &[6.0], Mode::Saturable, 0.1).unwrap()[0];
        let max = curve.torque.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        let bound = 1e-3 * max * curve.period.to_radians();
        assert!(curve.net_work() <= bound, "{top:?}: {} > {bound}", curve.net_work());
        assert_eq!(curve.angles.len(), 201);
        assert!((curve.torque[0] - curve.torque[200]).abs() < 1e-6 * max);
    }
}

#[test]
fn curve_samples_agree_with_pointwise_torque() {
    let spec = MotorSpec::preset(Topology::Motor2);
    let curve = &torque_angle_curve(&spec, &[3.0], Mode::Linear, 0.5).unwrap()[0];
    for k in [3, 17, 31] {
        let t = static_torque(&spec, curve.angles[k], 3.0, Mode::Linear).unwrap();
        assert!((curve.torque[k] - t).abs() < 1e-9 * t.abs().max(1e-3), "{} vs {t}", curve.torque[k]);
    }
}

#[test]
fn extraction_recovers_known_crossings() {
    // falling crossing at -0.326, rising at -11.351
    let c = synthetic(two_lobe(-11.351 + 20.0, 20.0 - 0.326, 0.7), 0.1);
    let ang = extract_commutation_angles(&c, 10.0).unwrap();
    assert!((ang.alpha - 1.025).abs() < 0.01, "{ang:?}");
    assert!((ang.beta - 0.326).abs() < 0.01, "{ang:?}");
    assert!((ang.theta_on - 10.699).abs() < 0.02, "{ang:?}");
    assert!((ang.unaligned_angle + 11.351).abs() < 0.01, "{ang:?}");
    assert!(ang.is_self_starting());
    assert!(ang.warning().is_none());
}

#[test]
fn curve_without_crossings_is_an_error() {
    let c = synthetic(|_| 1.0, 0.1);
    assert!(extract_commutation_angles(&c, 10.0).is_err());
}

proptest! {
    #[test]
    fn extraction_is_invariant_under_torque_scaling(scale in 0.01f64..100.0, up in 7.0f64..10.0, width in 9.0f64..12.0) {
        let base = synthetic(two_lobe(up, up + width, 0.6), 0.1);
        let mut scaled = base.clone();
        scaled.torque.iter_mut().for_each(|t| *t *= scale);
        let a = extract_commutation_angles(&base, 10.0).unwrap();
        let b = extract_commutation_angles(&scaled, 10.0).unwrap();
        prop_assert!((a.alpha - b.alpha).abs() < 1e-9);
        prop_assert!((a.beta - b.beta).abs() < 1e-9);
    }

    #[test]
    fn conduction_width_fills_the_period(up in 7.0f64..10.0, width in 9.0f64..12.0) {
        let c = synthetic(two_lobe(up, up + width, 0.6), 0.1);
        let a = extract_commutation_angles(&c, 10.0).unwrap();
        prop_assert!((a.theta_on + a.theta_off - 20.0).abs() < 1e-9);
        prop_assert!((a.theta_on - (10.0 + a.alpha - a.beta)).abs() < 1e-9);
        prop_assert!((c.positive_span() - width).abs() <= 0.2);
    }
}
