//! Performance figures from steady-state traces and static curves, and
//! side-by-side comparison reports.

use serde::{Deserialize, Serialize};

use crate::characteristics::{extract_commutation_angles, CommutationAngles, TorqueAngleCurve};
use crate::error::{Result, SrmError};
use crate::geometry::MotorSpec;
use crate::sim::SimulationTrace;

/// Conducting phases counted in the copper loss.
pub const N_PHASES: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceMetrics {
    #[serde(rename = "T_mean")]
    pub t_mean: f64,
    #[serde(rename = "T_peak")]
    pub t_peak: f64,
    pub ripple_pct: f64,
    /// Per phase.
    #[serde(rename = "I_rms")]
    pub i_rms: f64,
    #[serde(rename = "P_d")]
    pub p_d: f64,
    #[serde(rename = "P_cu")]
    pub p_cu: f64,
    #[serde(rename = "P_core")]
    pub p_core: f64,
    #[serde(rename = "P_total_loss")]
    pub p_total_loss: f64,
    #[serde(rename = "P_in")]
    pub p_in: f64,
    pub efficiency_pct: f64,
    /// N.m/L
    pub torque_density: f64,
    pub torque_per_amp: f64,
    pub power_per_amp: f64,
    /// rpm
    pub speed: f64,
}

pub fn omega(speed_rpm: f64) -> f64 {
    speed_rpm * std::f64::consts::TAU / 60.0
}

impl PerformanceMetrics {
    /// Derive the remaining figures from torque, current and losses.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        t_mean: f64,
        t_peak: f64,
        ripple_pct: f64,
        i_rms: f64,
        p_cu: f64,
        p_core: f64,
        volume_l: f64,
        speed_rpm: f64,
    ) -> Result<Self> {
        if !(t_mean > 0.0) {
            return Err(SrmError::NoPositiveTorque(t_mean));
        }
        if !(i_rms > 0.0 && volume_l > 0.0 && speed_rpm > 0.0 && p_cu >= 0.0 && p_core >= 0.0) {
            return Err(SrmError::InvalidArgument(format!(
                "need positive current {i_rms}, volume {volume_l}, speed {speed_rpm} and non-negative losses"
            )));
        }
        let p_d = t_mean * omega(speed_rpm);
        let p_total_loss = p_cu + p_core;
        let p_in = p_d + p_total_loss;
        Ok(PerformanceMetrics {
            t_mean,
            t_peak,
            ripple_pct,
            i_rms,
            p_d,
            p_cu,
            p_core,
            p_total_loss,
            p_in,
            efficiency_pct: 100.0 * p_d / p_in,
            torque_density: t_mean / volume_l,
            torque_per_amp: t_mean / i_rms,
            power_per_amp: p_d / i_rms,
            speed: speed_rpm,
        })
    }

    /// Largest relative violation of the defining identities.
    pub fn identity_residual(&self, volume_l: f64) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        [
            rel(self.p_in, self.p_d + self.p_cu + self.p_core),
            rel(self.p_total_loss, self.p_cu + self.p_core),
            rel(self.p_d, self.t_mean * omega(self.speed)),
            rel(self.efficiency_pct, 100.0 * self.p_d / self.p_in),
            rel(self.torque_density, self.t_mean / volume_l),
            rel(self.torque_per_amp, self.t_mean / self.i_rms),
            rel(self.power_per_amp, self.p_d / self.i_rms),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Metrics of a steady-state trace slice.
pub fn compute_metrics(trace: &SimulationTrace, spec: &MotorSpec) -> Result<PerformanceMetrics> {
    if trace.is_empty() {
        return Err(SrmError::EmptyWindow);
    }
    let n = trace.len() as f64;
    let t_mean = trace.mean_torque();
    let t_max = trace.t_total.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t_min = trace.t_total.iter().copied().fold(f64::INFINITY, f64::min);
    if !(t_mean > 0.0) {
        return Err(SrmError::NoPositiveTorque(t_mean));
    }
    let sq: f64 = trace.i_a.iter().zip(&trace.i_b).map(|(a, b)| 0.5 * (a * a + b * b)).sum();
    let i_rms = (sq / n).sqrt();
    let p_cu = N_PHASES * i_rms * i_rms * spec.R_phase;
    PerformanceMetrics::from_parts(
        t_mean,
        t_max,
        100.0 * (t_max - t_min) / t_mean,
        i_rms,
        p_cu,
        spec.P_core_const,
        spec.active_volume,
        trace.speed_rpm,
    )
}

/// Mean and peak torque over the conduction window `[unaligned, aligned]`.
pub fn static_summary(curve: &TorqueAngleCurve, window: &CommutationAngles) -> Result<(f64, f64)> {
    let (lo, hi) = (window.unaligned_angle, window.aligned_angle);
    let width = hi - lo;
    if !(width > 0.0) || curve.torque.is_empty() {
        return Err(SrmError::EmptyWindow);
    }
    let step = curve.grid_step;
    let origin = curve.angles[0];
    let mut pts = vec![lo];
    let mut k = ((lo - origin) / step).floor() as i64 + 1;
    loop {
        let a = origin + k as f64 * step;
        if a >= hi - 1e-9 * step {
            break;
        }
        if a > lo + 1e-9 * step {
            pts.push(a);
        }
        k += 1;
    }
    pts.push(hi);
    let vals: Vec<f64> = pts.iter().map(|&a| curve.at(a)).collect();
    let area: f64 = pts.windows(2).zip(vals.windows(2)).map(|(a, v)| 0.5 * (v[0] + v[1]) * (a[1] - a[0])).sum();
    let peak = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((area / width, peak))
}

/// Conduction window from the curve's own zero crossings, with its mean and peak.
pub fn window_summary(curve: &TorqueAngleCurve, half_pitch: f64) -> Result<(CommutationAngles, f64, f64)> {
    let window = extract_commutation_angles(curve, half_pitch)?;
    let (mean, peak) = static_summary(curve, &window)?;
    Ok((window, mean, peak))
}

pub fn percent_increase(base: f64, other: f64) -> Result<f64> {
    if !(base > 0.0) {
        return Err(SrmError::NonPositiveBaseline(base));
    }
    Ok(100.0 * (other - base) / base)
}

pub fn prediction_error(predicted: f64, measured: f64) -> Result<f64> {
    if !(predicted > 0.0) {
        return Err(SrmError::NonPositiveBaseline(predicted));
    }
    Ok(100.0 * (predicted - measured).abs() / predicted)
}

/// Fixed significant-digit rendering used in every report.
pub fn sig4(x: f64) -> String {
    sig(x, 4)
}

pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let mag = x.abs().log10().floor() as i64 + 1;
    let decimals = (digits as i64 - mag).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    // rounding may have carried into a new digit, e.g. 9.9996 -> 10.000
    let again = s.trim_start_matches('-').split('.').next().map_or(0, |i| i.trim_start_matches('0').len());
    if decimals > 0 && again as i64 > mag {
        format!("{:.*}", decimals - 1, x)
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub label: String,
    pub metrics: PerformanceMetrics,
    /// Liters; zero for motors without magnets.
    pub pm_volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub metrics: PerformanceMetrics,
    /// N.m/L
    pub torque_per_pm_volume: Option<f64>,
    /// Mean-torque increase versus the baseline, %.
    pub increase_pct: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline: String,
    pub rows: Vec<ReportRow>,
}

pub const REPORT_COLUMNS: [&str; 19] = [
    "label",
    "T_mean",
    "T_peak",
    "ripple_pct",
    "I_rms",
    "P_d",
    "P_cu",
    "P_core",
    "P_total_loss",
    "P_in",
    "efficiency_pct",
    "torque_density",
    "torque_per_amp",
    "power_per_amp",
    "speed",
    "torque_per_pm_volume",
    "increase_vs_baseline_pct",
    "baseline",
    "warning",
];

pub fn torque_per_pm_volume(t_mean: f64, pm_volume_l: f64) -> Option<f64> {
    (pm_volume_l > 0.0).then(|| t_mean / pm_volume_l)
}

/// Compare entries against the one labelled `baseline` (the first entry if `None`).
pub fn comparison_report(entries: &[ReportEntry], baseline: Option<&str>) -> Result<ComparisonReport> {
    if entries.len() < 2 {
        return Err(SrmError::TooFewEntries(entries.len()));
    }
    let base = match baseline {
        None => &entries[0],
        Some(name) => entries
            .iter()
            .find(|e| e.label == name)
            .ok_or_else(|| SrmError::InvalidArgument(format!("baseline {name:?} is not among the entries")))?,
    };
    let rows = entries
        .iter()
        .map(|e| {
            let warning = ((e.metrics.speed - base.metrics.speed).abs() > 1e-9 * base.metrics.speed.abs().max(1.0)).then(|| {
                format!("speed {} rpm differs from baseline {} rpm", e.metrics.speed, base.metrics.speed)
            });
            Ok(ReportRow {
                label: e.label.clone(),
                metrics: e.metrics,
                torque_per_pm_volume: torque_per_pm_volume(e.metrics.t_mean, e.pm_volume),
                increase_pct: percent_increase(base.metrics.t_mean, e.metrics.t_mean)?,
                warning,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonReport {
        baseline: base.label.clone(),
        rows,
    })
}

impl ComparisonReport {
    fn cells(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let m = &r.metrics;
                let mut v = vec![r.label.clone()];
                v.extend(
                    [
                        m.t_mean,
                        m.t_peak,
                        m.ripple_pct,
                        m.i_rms,
                        m.p_d,
                        m.p_cu,
                        m.p_core,
                        m.p_total_loss,
                        m.p_in,
                        m.efficiency_pct,
                        m.torque_density,
                        m.torque_per_amp,
                        m.power_per_amp,
                        m.speed,
                    ]
                    .map(sig4),
                );
                v.push(r.torque_per_pm_volume.map_or(String::new(), sig4));
                v.push(sig4(r.increase_pct));
                v.push(self.baseline.clone());
                v.push(r.warning.clone().unwrap_or_default());
                v
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let quote = |s: &str| {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        let mut out = REPORT_COLUMNS.join(",");
        out.push('\n');
        for row in self.cells() {
            out.push_str(&row.iter().map(|c| quote(c)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    /// Width-aligned table with one metric per line and one column per entry.
    pub fn to_text(&self) -> String {
        let cells = self.cells();
        let mut lines: Vec<Vec<String>> = Vec::new();
        for (c, name) in REPORT_COLUMNS.iter().enumerate() {
            if *name == "warning" && cells.iter().all(|r| r[c].is_empty()) {
                continue;
            }
            let mut line = vec![name.to_string()];
            line.extend(cells.iter().map(|r| if r[c].is_empty() { "-".into() } else { r[c].clone() }));
            lines.push(line);
        }
        let ncol = lines[0].len();
        let widths: Vec<usize> = (0..ncol).map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for l in lines {
            let row: Vec<String> = l
                .iter()
                .enumerate()
                .map(|(c, s)| if c == 0 { format!("{:<w$}", s, w = widths[c]) } else { format!("{:>w$}", s, w = widths[c]) })
                .collect();
            out.push_str(row.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig4(400.5), "400.5");
        assert_eq!(sig4(0.36284), "0.3628");
        assert_eq!(sig4(22.808), "22.81");
        assert_eq!(sig4(9.99996), "10.00");
        assert_eq!(sig4(-29.2857), "-29.29");
        assert_eq!(sig4(0.0), "0");
        assert_eq!(sig4(12345.0), "12345");
    }

    #[test]
    fn percent_helpers() {
        assert!((percent_increase(0.363, 0.858).unwrap() - 136.36).abs() < 0.01);
        assert_eq!(percent_increase(2.0, 2.0).unwrap(), 0.0);
        assert!(percent_increase(0.0, 1.0).is_err());
        assert!((prediction_error(0.363, 0.347).unwrap() - 4.40).abs() < 0.01);
        assert!(prediction_error(-1.0, 1.0).is_err());
    }

    #[test]
    fn zero_torque_is_rejected() {
        assert!(matches!(
            PerformanceMetrics::from_parts(0.0, 0.0, 0.0, 4.0, 7.0, 0.9, 0.32, 600.0),
            Err(SrmError::NoPositiveTorque(_))
        ));
    }
}
