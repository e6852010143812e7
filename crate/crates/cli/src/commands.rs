use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use srm_core::characteristics::{extract_commutation_angles, torque_angle_curve, CommutationAngles, TorqueAngleCurve};
use srm_core::drive::{commutation_table, Chopping, DriveConfig, GateState};
use srm_core::geometry::{load_motor_spec, MotorSpec, Topology};
use srm_core::mec::{
    build_lumped_network, build_network, check_dominance, solve_closed_form, solve_network, FluxSolution, MagnetModel,
    Mode, Phase,
};
use srm_core::metrics::{
    comparison_report, compute_metrics, percent_increase, sig4, torque_per_pm_volume, window_summary, PerformanceMetrics,
    ReportEntry,
};
use srm_core::sim::{
    precompute_maps, simulate as run_simulation, steady_state_window, MapGrid, SimulationTrace, TraceMeta,
    DEFAULT_SETTLING_CYCLES,
};
use srm_core::SrmError;

use crate::plot::{line_chart, Series};
use crate::{CharacterizeArgs, CliError, CompareArgs, DriveArgs, MetricsArgs, MotorArgs, SimulateArgs, VerifyArgs};

type CliResult<T> = Result<T, CliError>;

pub struct Motor {
    pub label: String,
    pub spec: MotorSpec,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn resolve_motors(a: &MotorArgs) -> CliResult<Vec<Motor>> {
    let topologies = a
        .motors
        .iter()
        .filter(|m| !m.trim().is_empty())
        .map(|m| m.parse::<Topology>().map_err(CliError::core("--motors")))
        .collect::<CliResult<Vec<_>>>()?;
    let base = match (&a.spec, &a.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            Some(load_motor_spec(&text).map_err(CliError::core(path.display().to_string()))?)
        }
        (None, Some(name)) => Some(MotorSpec::preset_by_name(name).map_err(CliError::core("--preset"))?),
        (None, None) => None,
    };
    let specs: Vec<MotorSpec> = match (base, topologies.is_empty()) {
        (Some(s), true) => vec![s],
        (Some(s), false) => topologies.iter().map(|&t| s.with_topology(t)).collect(),
        (None, true) => Topology::ALL.iter().map(|&t| MotorSpec::preset(t)).collect(),
        (None, false) => topologies.iter().map(|&t| MotorSpec::preset(t)).collect(),
    };
    let mut seen = BTreeSet::new();
    specs
        .into_iter()
        .map(|spec| {
            let label = format!("motor{}", spec.topology_id.index());
            if !seen.insert(label.clone()) {
                return Err(CliError::Usage(format!("{label} requested twice")));
            }
            spec.validate().map_err(CliError::core(label.clone()))?;
            Ok(Motor { label, spec })
        })
        .collect()
}

fn check_currents(currents: &[f64]) -> CliResult<()> {
    if currents.is_empty() {
        return Err(CliError::Usage("--currents must list at least one current".into()));
    }
    if let Some(bad) = currents.iter().find(|i| !(i.is_finite() && **i >= 0.0)) {
        return Err(CliError::Usage(format!("currents must be non-negative, got {bad}")));
    }
    Ok(())
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_file(path: PathBuf, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(&path, contents).map_err(io_err(&path))
}

fn write_json(path: PathBuf, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    write_file(path, text + "\n")
}

/// Resolved configuration of a run, enough to repeat it exactly.
fn write_manifest(out: &Path, subcommand: &str, config: &impl Serialize, argv: &[String], motors: &[Motor]) -> CliResult<()> {
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "argv": argv,
        "config": config,
        "threads": rayon::current_num_threads(),
        "motors": motors.iter().map(|m| json!({
            "label": m.label,
            "spec_hash": m.spec.spec_hash(),
            "spec": m.spec,
        })).collect::<Vec<_>>(),
    });
    write_json(out.join("manifest.json"), &manifest)
}

fn amp_tag(i: f64) -> String {
    format!("{i}")
}

fn collect_all<T>(results: Vec<CliResult<T>>) -> CliResult<Vec<T>> {
    results.into_iter().collect()
}

fn curve_points(c: &TorqueAngleCurve) -> Vec<(f64, f64)> {
    c.angles.iter().copied().zip(c.torque.iter().copied()).collect()
}

pub fn characterize(a: &CharacterizeArgs, argv: &[String]) -> CliResult<()> {
    let motors = resolve_motors(&a.motor)?;
    check_currents(&a.currents)?;
    let out = &a.motor.out;
    prepare_out(out)?;
    write_manifest(out, "characterize", a, argv, &motors)?;
    let lines = collect_all(motors.par_iter().map(|m| characterize_one(m, a)).collect())?;
    for l in lines {
        println!("{l}");
    }
    Ok(())
}

fn characterize_one(m: &Motor, a: &CharacterizeArgs) -> CliResult<String> {
    let out = &a.motor.out;
    let spec = &m.spec;
    let half = spec.half_pitch();
    let curves = torque_angle_curve(spec, &a.currents, a.motor.mode, a.grid_step)
        .map_err(CliError::core(format!("{} torque curves", m.label)))?;
    for c in &curves {
        write_file(out.join(format!("{}_{}A.csv", m.label, amp_tag(c.current))), c.to_csv())?;
    }
    let selected = curves
        .iter()
        .max_by(|x, y| x.current.total_cmp(&y.current))
        .expect("at least one current");
    let angles = extract_commutation_angles(selected, half)
        .map_err(CliError::core(format!("{} at {} A", m.label, selected.current)))?;
    let per_current: Vec<Value> = curves
        .iter()
        .map(|c| match window_summary(c, half) {
            Ok((w, mean, peak)) => json!({"current_A": c.current, "angles": w, "mean_Nm": mean, "peak_Nm": peak}),
            Err(e) => json!({"current_A": c.current, "error": e.to_string()}),
        })
        .collect();
    let doc = json!({
        "motor": m.label,
        "topology": spec.topology_id,
        "selected_current_A": selected.current,
        "angles": angles,
        "self_starting": angles.is_self_starting(),
        "warning": angles.warning(),
        "per_current": per_current,
        "curves": curves.iter().map(|c| c.sidecar()).collect::<Vec<_>>(),
    });
    write_json(out.join(format!("{}_angles.json", m.label)), &doc)?;
    if a.motor.plots {
        let pts: Vec<Vec<(f64, f64)>> = curves.iter().map(curve_points).collect();
        let series: Vec<Series> = curves
            .iter()
            .zip(&pts)
            .map(|(c, p)| Series {
                name: format!("{} A", c.current),
                points: p,
            })
            .collect();
        let svg = line_chart(&format!("{} static torque", m.label), "rotor angle (mech deg)", "torque (N.m)", &series);
        write_file(out.join(format!("{}_torque.svg", m.label)), svg)?;
    }
    Ok(format!(
        "{}: alpha {:.3} beta {:.3} theta_on {:.3} mech deg{}",
        m.label,
        angles.alpha,
        angles.beta,
        angles.theta_on,
        angles.warning().map_or(String::new(), |w| format!(" ({w})"))
    ))
}

pub struct SimOutcome {
    pub label: String,
    pub metrics: PerformanceMetrics,
    pub pm_volume: f64,
    pub summary: Value,
}

fn steady_window(trace: &SimulationTrace, cycles: Option<usize>) -> Result<SimulationTrace, SrmError> {
    let complete = trace.cycle_boundaries().len().saturating_sub(1);
    let n = cycles.unwrap_or(complete.saturating_sub(DEFAULT_SETTLING_CYCLES));
    steady_state_window(trace, n)
}

fn drive_config(m: &Motor, d: &DriveArgs, mode: Mode) -> CliResult<DriveConfig> {
    let spec = &m.spec;
    let angles = if d.conventional {
        CommutationAngles::conventional(spec.half_pitch())
    } else {
        let curves = torque_angle_curve(spec, &[d.i_ref], mode, d.map_step)
            .map_err(CliError::core(format!("{} torque curve", m.label)))?;
        extract_commutation_angles(&curves[0], spec.half_pitch())
            .map_err(CliError::core(format!("{} commutation angles", m.label)))?
    };
    let cfg = DriveConfig {
        i_ref: d.i_ref,
        delta: d.delta,
        v_dc: d.v_dc,
        chopping: if d.chopping == "soft" { Chopping::Soft } else { Chopping::Hard },
        ..DriveConfig::new(angles, spec.N_r)
    };
    cfg.validate().map_err(CliError::core("drive"))?;
    Ok(cfg)
}

fn simulate_one(m: &Motor, d: &DriveArgs, motor: &MotorArgs) -> CliResult<SimOutcome> {
    let out = &motor.out;
    let spec = &m.spec;
    let drive = drive_config(m, d, motor.mode)?;
    if !(d.speed_rpm > 0.0) {
        return Err(CliError::Usage(format!("--speed-rpm must be positive, got {}", d.speed_rpm)));
    }
    let period_s = spec.rotor_pitch() / (6.0 * d.speed_rpm);
    let t_end = d.t_end.unwrap_or(8.0 * period_s);
    let grid = MapGrid {
        theta_step: d.map_step,
        i_max: MapGrid::default().i_max.max((d.i_ref + d.delta + 1.0).ceil()),
        ..MapGrid::default()
    };
    let ctx = |what: &str| format!("{} {what}", m.label);
    let maps = precompute_maps(spec, motor.mode, grid).map_err(CliError::core(ctx("flux-linkage tables")))?;
    let trace = run_simulation(spec, &maps, &drive, d.speed_rpm, t_end, d.dt).map_err(CliError::core(ctx("simulation")))?;
    let window = steady_window(&trace, d.cycles).map_err(CliError::core(ctx("steady-state window")))?;
    let metrics = compute_metrics(&window, spec).map_err(CliError::core(ctx("metrics")))?;
    let t_min = window.t_total.iter().copied().fold(f64::INFINITY, f64::min);
    let cycles = window.cycle_boundaries().len().saturating_sub(1) + 1;

    let csv_path = out.join(format!("{}_trace.csv", m.label));
    let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    trace
        .write_csv(std::io::BufWriter::new(file))
        .map_err(io_err(&csv_path))?;
    let window_doc = json!({
        "start_s": window.time[0],
        "end_s": window.time[window.len() - 1],
        "cycles": cycles,
        "settling_cycles": DEFAULT_SETTLING_CYCLES,
    });
    write_json(
        out.join(format!("{}_trace.json", m.label)),
        &json!({
            "motor": m.label,
            "speed_rpm": d.speed_rpm,
            "period_mech_deg": trace.period,
            "samples": trace.len(),
            "meta": trace.meta,
            "window": window_doc,
            "map_grid": grid,
            "mode": motor.mode,
        }),
    )?;
    let total_cycles = (t_end / period_s).ceil() as usize;
    write_json(out.join(format!("{}_commutation.json", m.label)), &commutation_table(&drive, total_cycles))?;
    let band_contained = trace.meta.max_band_excursion <= trace.meta.slew_margin;
    let summary = json!({
        "motor": m.label,
        "metrics": metrics,
        "identity_residual": metrics.identity_residual(spec.active_volume),
        "T_min": t_min,
        "positive_torque": t_min >= -0.01 * metrics.t_mean,
        "band_contained": band_contained,
        "max_band_excursion_A": trace.meta.max_band_excursion,
        "slew_margin_A": trace.meta.slew_margin,
        "inductance_floor_hits": trace.meta.inductance_floor_hits,
        "pm_volume_L": spec.pm_volume(),
        "torque_per_pm_volume": torque_per_pm_volume(metrics.t_mean, spec.pm_volume()),
        "commutation": drive.commutation,
        "window": window_doc,
    });
    write_json(out.join(format!("{}_metrics.json", m.label)), &summary)?;
    if motor.plots {
        let t_ms: Vec<f64> = window.time.iter().map(|t| t * 1e3).collect();
        let pair = |v: &[f64]| t_ms.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
        let panels: [(&str, &str, Vec<(&str, &[f64])>); 3] = [
            ("voltage", "phase voltage (V)", vec![("v_A", &window.v_a), ("v_B", &window.v_b)]),
            ("current", "phase current (A)", vec![("i_A", &window.i_a), ("i_B", &window.i_b)]),
            (
                "torque",
                "torque (N.m)",
                vec![("T_A", &window.t_a), ("T_B", &window.t_b), ("T_total", &window.t_total)],
            ),
        ];
        for (name, y_label, cols) in panels {
            let pts: Vec<Vec<(f64, f64)>> = cols.iter().map(|(_, v)| pair(v)).collect();
            let series: Vec<Series> = cols
                .iter()
                .zip(&pts)
                .map(|((n, _), p)| Series {
                    name: n.to_string(),
                    points: p,
                })
                .collect();
            let svg = line_chart(&format!("{} {name}", m.label), "time (ms)", y_label, &series);
            write_file(out.join(format!("{}_{name}.svg", m.label)), svg)?;
        }
    }
    Ok(SimOutcome {
        label: m.label.clone(),
        metrics,
        pm_volume: spec.pm_volume(),
        summary,
    })
}

fn print_metrics(label: &str, m: &PerformanceMetrics) {
    println!(
        "{label}: T_mean {} N.m, ripple {} %, I_rms {} A, P_d {} W, P_in {} W, efficiency {} %",
        sig4(m.t_mean),
        sig4(m.ripple_pct),
        sig4(m.i_rms),
        sig4(m.p_d),
        sig4(m.p_in),
        sig4(m.efficiency_pct)
    );
}

pub fn simulate(a: &SimulateArgs, argv: &[String]) -> CliResult<()> {
    let motors = resolve_motors(&a.motor)?;
    prepare_out(&a.motor.out)?;
    write_manifest(&a.motor.out, "simulate", a, argv, &motors)?;
    let outcomes = collect_all(motors.par_iter().map(|m| simulate_one(m, &a.drive, &a.motor)).collect())?;
    for o in &outcomes {
        print_metrics(&o.label, &o.metrics);
        println!(
            "{}: band contained {}, positive torque {}",
            o.label, o.summary["band_contained"], o.summary["positive_torque"]
        );
    }
    Ok(())
}

pub fn compare(a: &CompareArgs, argv: &[String]) -> CliResult<()> {
    let motors = resolve_motors(&a.motor)?;
    if motors.len() < 2 {
        return Err(CliError::Usage(format!("compare needs at least two motors, got {}", motors.len())));
    }
    check_currents(&a.currents)?;
    if let Some(b) = &a.baseline {
        if !motors.iter().any(|m| &m.label == b) {
            return Err(CliError::Usage(format!("baseline {b} is not among the motors")));
        }
    }
    let out = &a.motor.out;
    prepare_out(out)?;
    write_manifest(out, "compare", a, argv, &motors)?;
    let outcomes = collect_all(motors.par_iter().map(|m| simulate_one(m, &a.drive, &a.motor)).collect())?;
    let entries: Vec<ReportEntry> = outcomes
        .iter()
        .map(|o| ReportEntry {
            label: o.label.clone(),
            metrics: o.metrics,
            pm_volume: o.pm_volume,
        })
        .collect();
    let report = comparison_report(&entries, a.baseline.as_deref()).map_err(CliError::core("comparison"))?;
    write_file(out.join("comparison.csv"), report.to_csv())?;
    write_file(out.join("comparison.txt"), report.to_text())?;
    print!("{}", report.to_text());

    // static mean/peak per current, Table-II style
    let statics = collect_all(
        motors
            .par_iter()
            .map(|m| {
                let curves = torque_angle_curve(&m.spec, &a.currents, a.motor.mode, a.grid_step)
                    .map_err(CliError::core(format!("{} torque curves", m.label)))?;
                curves
                    .iter()
                    .map(|c| {
                        window_summary(c, m.spec.half_pitch())
                            .map(|(_, mean, peak)| (mean, peak))
                            .map_err(CliError::core(format!("{} at {} A", m.label, c.current)))
                    })
                    .collect::<CliResult<Vec<_>>>()
            })
            .collect(),
    )?;
    let base = motors
        .iter()
        .position(|m| Some(&m.label) == a.baseline.as_ref())
        .unwrap_or(0);
    let mut header = vec!["current_A".to_string()];
    for m in &motors {
        header.push(format!("{}_mean_Nm", m.label));
        header.push(format!("{}_peak_Nm", m.label));
    }
    for (k, m) in motors.iter().enumerate() {
        if k != base {
            header.push(format!("{}_vs_{}_pct", m.label, motors[base].label));
        }
    }
    let mut rows = vec![header];
    for (j, &i) in a.currents.iter().enumerate() {
        let mut row = vec![sig4(i)];
        for s in &statics {
            row.push(sig4(s[j].0));
            row.push(sig4(s[j].1));
        }
        for (k, s) in statics.iter().enumerate() {
            if k != base {
                row.push(percent_increase(statics[base][j].0, s[j].0).map_or_else(|_| "n/a".into(), sig4));
            }
        }
        rows.push(row);
    }
    let csv: String = rows.iter().map(|r| r.join(",") + "\n").collect();
    write_file(out.join("static_torque.csv"), csv)?;
    let widths: Vec<usize> = (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let text: String = rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                + "\n"
        })
        .collect();
    write_file(out.join("static_torque.txt"), &text)?;
    print!("{text}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct CheckResult {
    motor: String,
    check: &'static str,
    pass: bool,
    detail: Value,
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-15)
}

fn decomposition_gap(s: &FluxSolution) -> f64 {
    let d = &s.decomposition;
    let sum = |f: fn(&srm_core::mec::FluxTriple) -> f64, total: f64| {
        rel_diff(f(&d.phi_prime) + f(&d.phi_dprime) + f(&d.phi_tprime), total)
    };
    sum(|t| t.phi_sy, s.phi_sy)
        .max(sum(|t| t.phi_sp, s.phi_sp))
        .max(sum(|t| t.phi_g, s.phi_g))
}

fn equivalence_check(m: &Motor, positions: usize) -> CliResult<CheckResult> {
    let spec = &m.spec;
    let p = spec.rotor_pitch();
    let (mut worst, mut worst_decomp, mut points) = (0.0f64, 0.0f64, 0usize);
    for k in 0..positions.max(1) {
        let theta = -p / 2.0 + p * k as f64 / positions.max(1) as f64;
        for i in [0.0, 2.0, 4.0, 6.0, 8.0] {
            for phase in [Phase::A, Phase::B] {
                let ctx = || format!("{} closed form at {theta} deg, {i} A", m.label);
                let cf = solve_closed_form(spec, theta, i, phase, Mode::Linear).map_err(CliError::core(ctx()))?;
                let net = build_lumped_network(spec, theta, i, phase, MagnetModel::IdealFlux).map_err(CliError::core(ctx()))?;
                let ns = solve_network(&net).map_err(CliError::core(ctx()))?;
                worst = worst
                    .max(rel_diff(cf.phi_sy, ns.phi_sy))
                    .max(rel_diff(cf.phi_sp, ns.phi_sp))
                    .max(rel_diff(cf.phi_g, ns.phi_g));
                worst_decomp = worst_decomp.max(decomposition_gap(&cf)).max(decomposition_gap(&ns));
                points += 1;
            }
        }
    }
    Ok(CheckResult {
        motor: m.label.clone(),
        check: "closed_form_equivalence",
        pass: worst <= 1e-9 && worst_decomp <= 1e-9,
        detail: json!({"points": points, "max_rel_diff": worst, "max_decomposition_gap": worst_decomp, "tolerance": 1e-9}),
    })
}

fn dominance_check(m: &Motor) -> CliResult<CheckResult> {
    let net = build_network(&m.spec, 0.0, 0.0, Phase::A, Mode::Linear).map_err(CliError::core(format!("{} network", m.label)))?;
    let report = check_dominance(&net);
    Ok(CheckResult {
        motor: m.label.clone(),
        check: "magnet_dominance",
        pass: report.pass,
        detail: serde_json::to_value(report).expect("plain data"),
    })
}

fn net_work_checks(m: &Motor, a: &VerifyArgs) -> CliResult<Vec<CheckResult>> {
    let curves = torque_angle_curve(&m.spec, &a.currents, a.motor.mode, a.grid_step)
        .map_err(CliError::core(format!("{} torque curves", m.label)))?;
    Ok(curves
        .iter()
        .map(|c| {
            let scale = c.torque.iter().fold(0.0f64, |acc, t| acc.max(t.abs())) * c.period.to_radians();
            let limit = 1e-3 * scale;
            CheckResult {
                motor: m.label.clone(),
                check: "net_zero_work",
                pass: c.net_work() <= limit,
                detail: json!({"current_A": c.current, "net_work_J": c.net_work(), "limit_J": limit}),
            }
        })
        .collect())
}

pub fn verify(a: &VerifyArgs, argv: &[String]) -> CliResult<()> {
    let motors = resolve_motors(&a.motor)?;
    check_currents(&a.currents)?;
    prepare_out(&a.motor.out)?;
    write_manifest(&a.motor.out, "verify", a, argv, &motors)?;
    let per_motor = collect_all(
        motors
            .par_iter()
            .map(|m| {
                let mut v = vec![equivalence_check(m, a.positions)?, dominance_check(m)?];
                v.extend(net_work_checks(m, a)?);
                Ok(v)
            })
            .collect(),
    )?;
    let checks: Vec<CheckResult> = per_motor.into_iter().flatten().collect();
    let all_pass = checks.iter().all(|c| c.pass);
    write_json(a.motor.out.join("verify.json"), &json!({"pass": all_pass, "checks": checks}))?;
    for c in &checks {
        println!("{:<8} {:<24} {}  {}", c.motor, c.check, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    if all_pass {
        Ok(())
    } else {
        let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| format!("{} {}", c.motor, c.check)).collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Deserialize)]
struct TraceRow {
    t_s: f64,
    theta_mech_deg: f64,
    i_A: f64,
    i_B: f64,
    v_A: f64,
    v_B: f64,
    G_A: u8,
    G_B: u8,
    T_A: f64,
    T_B: f64,
    T_total: f64,
}

fn read_trace(path: &Path, spec: &MotorSpec) -> CliResult<SimulationTrace> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let rows = reader
        .deserialize::<TraceRow>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if rows.len() < 2 {
        return Err(CliError::Usage(format!("{}: trace has fewer than two samples", path.display())));
    }
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    // the speed is constant; rounding removes the last-bit noise of the slope
    let slope = (last.theta_mech_deg - first.theta_mech_deg) / (last.t_s - first.t_s) / 6.0;
    let speed_rpm = (slope * 1e6).round() / 1e6;
    let dt = rows[1].t_s - rows[0].t_s;
    let placeholder = DriveConfig::new(CommutationAngles::conventional(spec.half_pitch()), spec.N_r);
    Ok(SimulationTrace {
        time: rows.iter().map(|r| r.t_s).collect(),
        theta: rows.iter().map(|r| r.theta_mech_deg).collect(),
        i_a: rows.iter().map(|r| r.i_A).collect(),
        i_b: rows.iter().map(|r| r.i_B).collect(),
        v_a: rows.iter().map(|r| r.v_A).collect(),
        v_b: rows.iter().map(|r| r.v_B).collect(),
        gates: rows
            .iter()
            .map(|r| GateState {
                g_a: r.G_A != 0,
                g_b: r.G_B != 0,
                ..GateState::default()
            })
            .collect(),
        t_a: rows.iter().map(|r| r.T_A).collect(),
        t_b: rows.iter().map(|r| r.T_B).collect(),
        t_total: rows.iter().map(|r| r.T_total).collect(),
        speed_rpm,
        period: spec.rotor_pitch(),
        meta: TraceMeta {
            spec_hash: spec.spec_hash(),
            drive: placeholder,
            dt,
            t_end: last.t_s,
            theta_start: first.theta_mech_deg,
            settling_cycles: DEFAULT_SETTLING_CYCLES,
            inductance_floor_hits: 0,
            slew_margin: 0.0,
            max_band_excursion: 0.0,
        },
    })
}

pub fn metrics(a: &MetricsArgs, argv: &[String]) -> CliResult<()> {
    let motors = resolve_motors(&a.motor)?;
    let [m] = motors.as_slice() else {
        return Err(CliError::Usage(format!(
            "metrics needs exactly one motor (use --preset, --spec or a single --motors entry), got {}",
            motors.len()
        )));
    };
    prepare_out(&a.motor.out)?;
    write_manifest(&a.motor.out, "metrics", a, argv, &motors)?;
    let trace = read_trace(&a.trace, &m.spec)?;
    let window = steady_window(&trace, a.cycles).map_err(CliError::core("steady-state window"))?;
    let metrics = compute_metrics(&window, &m.spec).map_err(CliError::core("metrics"))?;
    write_json(
        a.motor.out.join("metrics.json"),
        &json!({
            "motor": m.label,
            "trace": a.trace,
            "metrics": metrics,
            "identity_residual": metrics.identity_residual(m.spec.active_volume),
        }),
    )?;
    print_metrics(&m.label, &metrics);
    Ok(())
}
