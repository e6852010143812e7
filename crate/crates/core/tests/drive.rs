use proptest::prelude::*;
use srm_core::characteristics::CommutationAngles;
use srm_core::drive::{
    commutation_signals, commutation_table, hysteresis_step, phase_voltage, Chopping, Controller, DriveConfig,
};
use srm_core::mec::Phase;

fn cfg(alpha: f64, beta: f64, unaligned: f64) -> DriveConfig {
    DriveConfig::new(CommutationAngles::from_alpha_beta(alpha, beta, 10.0, unaligned, 0.0), 18)
}

/// Fraction of a sampled period where the given signal is on, times the period.
fn measured_width(cfg: &DriveConfig, phase: Phase) -> f64 {
    let n = 200_000;
    let on = (0..n)
        .filter(|&k| {
            let (a, b) = commutation_signals(-20.0 + 20.0 * k as f64 / n as f64, cfg);
            if phase == Phase::A { a } else { b }
        })
        .count();
    20.0 * on as f64 / n as f64
}

#[test]
fn windows_measure_theta_on() {
    let c = cfg(1.025, 0.326, -11.351);
    for phase in [Phase::A, Phase::B] {
        assert!((measured_width(&c, phase) - 10.699).abs() < 1e-3);
    }
}

#[test]
fn windows_overlap_by_alpha_minus_beta() {
    let c = cfg(1.025, 0.326, -11.351);
    let n = 200_000;
    let both = (0..n)
        .filter(|&k| {
            let (a, b) = commutation_signals(20.0 * k as f64 / n as f64, &c);
            a && b
        })
        .count();
    // two overlaps per period, one at each hand-over
    let per_handover = 20.0 * both as f64 / n as f64 / 2.0;
    assert!((per_handover - (1.025 - 0.326)).abs() < 1e-3, "{per_handover}");
}

#[test]
fn conventional_windows_never_overlap() {
    let c = cfg(1.0, 0.2, -11.0).conventional();
    for k in 0..20_000 {
        let (a, b) = commutation_signals(-40.0 + k as f64 * 0.004, &c);
        assert!(!(a && b));
    }
}

#[test]
fn encoder_quantisation_delays_the_edges() {
    let mut c = cfg(0.0, 0.0, -10.0);
    c.encoder_step = Some(0.5);
    assert!(!commutation_signals(-10.2, &c).0);
    assert!(commutation_signals(-10.0, &c).0);
    assert!(commutation_signals(-0.1, &c).0);
    // -0.1 still reads as -0.5; 0.0 reads exactly and is past the window
    assert!(!commutation_signals(0.0, &c).0);
}

#[test]
fn table_lists_both_phases_every_cycle() {
    let c = cfg(1.025, 0.326, -11.351);
    let t = commutation_table(&c, 3);
    assert_eq!(t.len(), 6);
    for e in &t {
        assert!((e.off_angle_mech - e.on_angle_mech - 10.699).abs() < 1e-9);
    }
    assert!((t[2].on_angle_mech - t[0].on_angle_mech - 20.0).abs() < 1e-9);
    assert!((t[1].on_angle_mech - t[0].on_angle_mech - 10.0).abs() < 1e-9);
}

#[test]
fn soft_chopping_freewheels_inside_the_window() {
    let mut c = cfg(1.0, 0.2, -11.0);
    assert_eq!(phase_voltage(false, true, 3.0, &c), -150.0);
    c.chopping = Chopping::Soft;
    assert_eq!(phase_voltage(false, true, 3.0, &c), 0.0);
    assert_eq!(phase_voltage(false, false, 3.0, &c), -150.0);
    assert_eq!(phase_voltage(true, true, 3.0, &c), 150.0);
    assert_eq!(phase_voltage(false, false, 0.0, &c), 0.0);
}

#[test]
fn invalid_configs_are_rejected() {
    let base = cfg(1.0, 0.2, -11.0);
    for broken in [
        DriveConfig { delta: 0.0, ..base },
        DriveConfig { v_dc: -1.0, ..base },
        DriveConfig { i_ref: 0.1, ..base },
        DriveConfig { n_r: 0, ..base },
        DriveConfig { encoder_step: Some(0.0), ..base },
    ] {
        assert!(broken.validate().is_err(), "{broken:?}");
    }
    assert!(base.validate().is_ok());
}

proptest! {
    #[test]
    fn comparator_holds_inside_the_band(i in 0.0f64..12.0, prev in any::<bool>()) {
        let c = cfg(1.0, 0.2, -11.0);
        let s = hysteresis_step(i, &c, prev);
        if i < 5.8 {
            prop_assert!(s);
        } else if i > 6.2 {
            prop_assert!(!s);
        } else {
            prop_assert_eq!(s, prev);
        }
    }

    #[test]
    fn gates_are_switch_and_window(theta in -100.0f64..100.0, i_a in 0.0f64..8.0, i_b in 0.0f64..8.0, warm in prop::collection::vec(0.0f64..8.0, 0..5)) {
        let c = cfg(1.025, 0.326, -11.351);
        let mut ctl = Controller::default();
        for w in warm {
            ctl.step(theta, w, w, &c);
        }
        let g = ctl.step(theta, i_a, i_b, &c);
        prop_assert!(g.consistent());
        let (ca, cb) = commutation_signals(theta, &c);
        prop_assert_eq!((g.c_a, g.c_b), (ca, cb));
    }

    #[test]
    fn windows_are_periodic(theta in -100.0f64..100.0, k in -5i32..5) {
        let c = cfg(1.025, 0.326, -11.351);
        let shifted = theta + 20.0 * k as f64;
        // skip points within rounding of an edge
        let edge = [-11.351, -11.351 + 10.699, -1.351, -1.351 + 10.699]
            .iter()
            .any(|e| (theta - e).rem_euclid(20.0).min((e - theta).rem_euclid(20.0)) < 1e-9);
        prop_assume!(!edge);
        prop_assert_eq!(commutation_signals(theta, &c), commutation_signals(shifted, &c));
    }
}
