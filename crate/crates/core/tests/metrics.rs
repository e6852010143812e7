use proptest::prelude::*;
use srm_core::characteristics::{CommutationAngles, TorqueAngleCurve, TorqueOptions};
use srm_core::drive::{DriveConfig, GateState};
use srm_core::geometry::{MotorSpec, Topology};
use srm_core::mec::Mode;
use srm_core::metrics::{
    comparison_report, compute_metrics, omega, percent_increase, prediction_error, sig4, static_summary, torque_per_pm_volume,
    PerformanceMetrics, ReportEntry, REPORT_COLUMNS,
};
use srm_core::sim::{SimulationTrace, TraceMeta};
use srm_core::SrmError;

/// Mean torque, rms current, copper and core loss of the four motors at 600 rpm.
const OPERATING_POINTS: [(f64, f64, f64, f64); 4] = [
    (0.363, 4.11, 7.37, 0.96),
    (0.801, 4.09, 7.28, 0.88),
    (0.779, 4.02, 6.96, 0.89),
    (1.048, 4.14, 7.51, 0.86),
];

fn metrics(k: usize) -> PerformanceMetrics {
    let (t, i, cu, core) = OPERATING_POINTS[k];
    PerformanceMetrics::from_parts(t, t, 0.0, i, cu, core, 0.320, 600.0).unwrap()
}

#[test]
fn derived_power_figures() {
    // P_d, P_in, density, T/A, efficiency
    let expected = [
        (22.80, 31.13, 1.134, 0.088, 73.24),
        (50.32, 58.48, 2.503, 0.195, 86.04),
        (48.94, 56.79, 2.434, 0.193, 86.17),
        (65.84, 74.21, 3.275, 0.253, 88.72),
    ];
    for (k, e) in expected.iter().enumerate() {
        let m = metrics(k);
        assert!((m.p_d - e.0).abs() <= 0.01, "{k}: {}", m.p_d);
        assert!((m.p_in - e.1).abs() <= 0.01, "{k}: {}", m.p_in);
        assert!((m.torque_density - e.2).abs() <= 0.001, "{k}: {}", m.torque_density);
        assert!((m.torque_per_amp - e.3).abs() <= 0.001, "{k}: {}", m.torque_per_amp);
        assert!((m.efficiency_pct - e.4).abs() <= 0.01, "{k}: {}", m.efficiency_pct);
    }
}

#[test]
fn copper_loss_of_two_phases() {
    let spec = MotorSpec::preset(Topology::Motor1);
    // one resistance for all four windings; the listed losses scatter about it by ~1%
    for (_, i, cu, _) in OPERATING_POINTS {
        let p = 2.0 * i * i * spec.R_phase;
        assert!((p - cu).abs() < 0.015 * cu, "{i}: {p} vs {cu}");
    }
}

#[test]
fn torque_per_magnet_volume() {
    let expected = [None, Some(400.50), Some(194.75), Some(174.66)];
    for (k, top) in Topology::ALL.into_iter().enumerate() {
        let v = MotorSpec::preset(top).pm_volume();
        let got = torque_per_pm_volume(OPERATING_POINTS[k].0, v);
        match (got, expected[k]) {
            (None, None) => assert_eq!(v, 0.0),
            (Some(g), Some(e)) => assert!((g - e).abs() <= 0.01, "{k}: {g}"),
            other => panic!("{k}: {other:?}"),
        }
    }
}

#[test]
fn percent_helpers_reject_bad_baselines() {
    assert!(matches!(percent_increase(0.0, 1.0), Err(SrmError::NonPositiveBaseline(_))));
    assert!(matches!(prediction_error(-1.0, 1.0), Err(SrmError::NonPositiveBaseline(_))));
    assert_eq!(percent_increase(0.5, 0.5).unwrap(), 0.0);
    assert!((prediction_error(0.363, 0.347).unwrap() - 4.41).abs() < 0.01);
}

#[test]
fn non_positive_torque_is_rejected() {
    assert!(matches!(
        PerformanceMetrics::from_parts(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.32, 600.0),
        Err(SrmError::NoPositiveTorque(_))
    ));
    assert!(PerformanceMetrics::from_parts(1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.32, 600.0).is_err());
}

fn entries() -> Vec<ReportEntry> {
    Topology::ALL
        .iter()
        .enumerate()
        .map(|(k, top)| ReportEntry {
            label: top.label(),
            metrics: metrics(k),
            pm_volume: MotorSpec::preset(*top).pm_volume(),
        })
        .collect()
}

#[test]
fn report_against_baseline() {
    let e = entries();
    let r = comparison_report(&e, None).unwrap();
    assert_eq!(r.baseline, e[0].label);
    assert_eq!(r.rows[0].increase_pct, 0.0);
    assert!((r.rows[3].increase_pct - 100.0 * (1.048 - 0.363) / 0.363).abs() < 1e-9);
    assert!(r.rows.iter().all(|row| row.warning.is_none()));

    let by_name = comparison_report(&e, Some(&e[3].label)).unwrap();
    assert_eq!(by_name.rows[3].increase_pct, 0.0);
    assert!(by_name.rows[0].increase_pct < 0.0);
    assert!(comparison_report(&e, Some("nope")).is_err());
}

#[test]
fn report_needs_two_entries() {
    let e = entries();
    assert!(matches!(comparison_report(&e[..1], None), Err(SrmError::TooFewEntries(1))));
}

#[test]
fn report_flags_speed_mismatch() {
    let mut e = entries();
    let (t, i, cu, core) = OPERATING_POINTS[1];
    e[1].metrics = PerformanceMetrics::from_parts(t, t, 0.0, i, cu, core, 0.320, 900.0).unwrap();
    let r = comparison_report(&e, None).unwrap();
    assert!(r.rows[1].warning.is_some());
    assert!(r.rows[2].warning.is_none());
}

#[test]
fn report_renderings() {
    let r = comparison_report(&entries(), None).unwrap();
    let csv = r.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), REPORT_COLUMNS.join(","));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|l| l.split(',').count() == REPORT_COLUMNS.len()));
    assert!(rows[1].contains(&sig4(400.5)));
    let text = r.to_text();
    assert!(text.contains("motor4") || text.contains("Motor4") || text.contains(&entries()[3].label));
}

fn curve(f: impl Fn(f64) -> f64) -> TorqueAngleCurve {
    let angles: Vec<f64> = (0..=200).map(|k| k as f64 * 0.1).collect();
    TorqueAngleCurve {
        torque: angles.iter().map(|&a| f(a)).collect(),
        angles,
        current: 6.0,
        topology: Topology::Motor1,
        mode: Mode::Linear,
        grid_step: 0.1,
        period: 20.0,
        options: TorqueOptions::default(),
        spec_hash: String::new(),
    }
}

#[test]
fn window_mean_of_a_plateau() {
    // 2 N.m on [8, 18] (i.e. -12..-2 when reduced), zero elsewhere
    let c = curve(|a| if (8.0..=18.0).contains(&a) { 2.0 } else { 0.0 });
    let w = CommutationAngles::from_alpha_beta(0.0, 0.0, 10.0, -11.0, -3.0);
    let (mean, peak) = static_summary(&c, &w).unwrap();
    assert!((mean - 2.0).abs() < 1e-12);
    assert_eq!(peak, 2.0);
    let zero = curve(|_| 0.0);
    assert_eq!(static_summary(&zero, &w).unwrap(), (0.0, 0.0));
}

#[test]
fn window_mean_of_a_ramp_is_its_midpoint() {
    let c = curve(|a| a);
    let w = CommutationAngles::from_alpha_beta(0.0, 0.0, 10.0, 2.05, 12.05);
    let (mean, _) = static_summary(&c, &w).unwrap();
    assert!((mean - 7.05).abs() < 1e-9, "{mean}");
}

#[test]
fn empty_window_is_rejected() {
    let c = curve(|_| 1.0);
    let w = CommutationAngles::from_alpha_beta(0.0, 0.0, 10.0, -3.0, -3.0);
    assert!(matches!(static_summary(&c, &w), Err(SrmError::EmptyWindow)));
}

fn flat_trace(i: f64, t: f64, n: usize) -> SimulationTrace {
    let drive = DriveConfig::new(CommutationAngles::conventional(10.0), 18);
    SimulationTrace {
        time: (0..n).map(|k| k as f64 * 1e-6).collect(),
        theta: (0..n).map(|k| k as f64 * 3.6e-3).collect(),
        i_a: vec![i; n],
        i_b: vec![0.0; n],
        v_a: vec![0.0; n],
        v_b: vec![0.0; n],
        gates: vec![GateState::default(); n],
        t_a: vec![t; n],
        t_b: vec![0.0; n],
        t_total: vec![t; n],
        speed_rpm: 600.0,
        period: 20.0,
        meta: TraceMeta {
            spec_hash: String::new(),
            drive,
            dt: 1e-6,
            t_end: (n - 1) as f64 * 1e-6,
            theta_start: 0.0,
            settling_cycles: 3,
            inductance_floor_hits: 0,
            slew_margin: 0.0,
            max_band_excursion: 0.0,
        },
    }
}

#[test]
fn metrics_of_a_flat_trace() {
    let spec = MotorSpec::preset(Topology::Motor1);
    let m = compute_metrics(&flat_trace(4.0, 0.5, 1000), &spec).unwrap();
    // one phase at 4 A, the other idle: per-phase rms is 4 / sqrt(2)
    assert!((m.i_rms - 4.0 / 2f64.sqrt()).abs() < 1e-12);
    assert!((m.p_cu - 2.0 * 8.0 * spec.R_phase).abs() < 1e-12);
    assert_eq!(m.ripple_pct, 0.0);
    assert_eq!(m.t_peak, 0.5);
    assert!((m.p_d - 0.5 * omega(600.0)).abs() < 1e-12);
    assert_eq!(m.p_core, spec.P_core_const);
    assert!(matches!(compute_metrics(&flat_trace(4.0, -0.1, 10), &spec), Err(SrmError::NoPositiveTorque(_))));
}

#[test]
fn serialized_names() {
    let v = serde_json::to_value(metrics(0)).unwrap();
    for key in ["T_mean", "P_d", "P_cu", "P_core", "P_total_loss", "P_in", "I_rms", "efficiency_pct", "power_per_amp"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

proptest! {
    #[test]
    fn derived_figures_satisfy_their_identities(
        t in 0.01f64..10.0, i in 0.1f64..20.0, cu in 0.0f64..50.0, core in 0.0f64..5.0, vol in 0.01f64..5.0, rpm in 10.0f64..10_000.0
    ) {
        let m = PerformanceMetrics::from_parts(t, 1.5 * t, 50.0, i, cu, core, vol, rpm).unwrap();
        prop_assert!(m.identity_residual(vol) < 1e-12);
        prop_assert!(m.efficiency_pct > 0.0 && m.efficiency_pct <= 100.0);
    }

    #[test]
    fn percent_increase_inverts(base in 0.01f64..10.0, other in 0.0f64..10.0) {
        let p = percent_increase(base, other).unwrap();
        prop_assert!((base * (1.0 + p / 100.0) - other).abs() < 1e-12 * base.max(other).max(1.0));
    }
}
