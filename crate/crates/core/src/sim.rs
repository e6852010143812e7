//! Fixed-speed time-domain simulation of both phases.
//!
//! Each phase current follows `dlambda/dt = v - R i` with the flux linkage
//! read from a precomputed `(theta, i)` table, so
//! `di/dt = (v - R i - omega dlambda/dtheta) / (dlambda/di)`.
//! Torque is read from the static torque table of the same grid.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristics::at_point;
use crate::drive::{phase_voltage, Controller, DriveConfig, GateState};
use crate::error::{Result, SrmError};
use crate::geometry::MotorSpec;
use crate::mec::{flux_linkage, Mode, Phase};

/// Smallest incremental inductance used in the current derivative, H.
pub const INDUCTANCE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapGrid {
    pub theta_step: f64,
    pub i_step: f64,
    pub i_max: f64,
}

impl Default for MapGrid {
    fn default() -> Self {
        MapGrid {
            theta_step: 0.1,
            i_step: 0.1,
            i_max: 8.0,
        }
    }
}

/// Phase-A flux-linkage and torque tables over one rotor pitch. Phase B reads
/// them half a pitch ahead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagneticMaps {
    pub grid: MapGrid,
    pub period: f64,
    pub n_theta: usize,
    pub n_i: usize,
    /// Row-major `[i][theta]`, Wb-turns.
    pub lambda: Vec<f64>,
    /// N.m
    pub torque: Vec<f64>,
    /// Per mechanical radian.
    pub dlambda_dtheta: Vec<f64>,
    /// H
    pub dlambda_di: Vec<f64>,
    pub mode: Mode,
    pub spec_hash: String,
}

impl MagneticMaps {
    fn idx(&self, row: usize, col: usize) -> usize {
        row * self.n_theta + col
    }

    pub fn lambda_at_node(&self, row: usize, col: usize) -> f64 {
        self.lambda[self.idx(row, col)]
    }

    pub fn torque_at_node(&self, row: usize, col: usize) -> f64 {
        self.torque[self.idx(row, col)]
    }

    fn bilinear(&self, table: &[f64], theta: f64, i: f64) -> f64 {
        let x = theta.rem_euclid(self.period) / self.grid.theta_step;
        let c0 = (x.floor() as usize).min(self.n_theta - 1);
        let fx = x - c0 as f64;
        let c1 = (c0 + 1) % self.n_theta;
        let y = (i.max(0.0) / self.grid.i_step).min((self.n_i - 1) as f64);
        let r0 = (y.floor() as usize).min(self.n_i - 2);
        let fy = y - r0 as f64;
        let r1 = r0 + 1;
        let v00 = table[self.idx(r0, c0)];
        let v01 = table[self.idx(r0, c1)];
        let v10 = table[self.idx(r1, c0)];
        let v11 = table[self.idx(r1, c1)];
        (v00 * (1.0 - fx) + v01 * fx) * (1.0 - fy) + (v10 * (1.0 - fx) + v11 * fx) * fy
    }

    fn shift(&self, phase: Phase) -> f64 {
        match phase {
            Phase::A => 0.0,
            Phase::B => self.period / 2.0,
        }
    }

    pub fn lambda(&self, phase: Phase, theta: f64, i: f64) -> f64 {
        self.bilinear(&self.lambda, theta + self.shift(phase), i)
    }

    pub fn torque(&self, phase: Phase, theta: f64, i: f64) -> f64 {
        self.bilinear(&self.torque, theta + self.shift(phase), i)
    }

    pub fn dlambda_dtheta(&self, phase: Phase, theta: f64, i: f64) -> f64 {
        self.bilinear(&self.dlambda_dtheta, theta + self.shift(phase), i)
    }

    pub fn dlambda_di(&self, phase: Phase, theta: f64, i: f64) -> f64 {
        self.bilinear(&self.dlambda_di, theta + self.shift(phase), i)
    }

    fn rows_in(&self, lo: f64, hi: f64) -> impl Iterator<Item = usize> + '_ {
        let step = self.grid.i_step;
        (0..self.n_i).filter(move |&r| {
            let i = r as f64 * step;
            i >= lo - 1e-12 && i <= hi + 1e-12
        })
    }

    /// Smallest floored incremental inductance among rows in `[lo, hi]` A.
    pub fn min_inductance(&self, lo: f64, hi: f64) -> f64 {
        self.rows_in(lo, hi)
            .flat_map(|r| (0..self.n_theta).map(move |c| (r, c)))
            .map(|(r, c)| self.dlambda_di[self.idx(r, c)].max(INDUCTANCE_FLOOR))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `|dlambda/dtheta|` among rows in `[lo, hi]` A, per radian.
    pub fn max_speed_voltage_coefficient(&self, lo: f64, hi: f64) -> f64 {
        self.rows_in(lo, hi)
            .flat_map(|r| (0..self.n_theta).map(move |c| (r, c)))
            .map(|(r, c)| self.dlambda_dtheta[self.idx(r, c)].abs())
            .fold(0.0, f64::max)
    }
}

/// Tabulate flux linkage and torque for phase A.
///
/// Torque at each node is the central difference of co-energy taken half a
/// grid step either side, with co-energy integrated along the current rows.
pub fn precompute_maps(spec: &MotorSpec, mode: Mode, grid: MapGrid) -> Result<MagneticMaps> {
    let period = spec.rotor_pitch();
    let nt = period / grid.theta_step;
    let ni = grid.i_max / grid.i_step;
    if !(grid.theta_step > 0.0 && grid.i_step > 0.0) || (nt - nt.round()).abs() > 1e-9 || (ni - ni.round()).abs() > 1e-9 {
        return Err(SrmError::InvalidArgument(format!(
            "map grid {grid:?} must evenly divide the rotor pitch {period} and the current range"
        )));
    }
    let n_theta = nt.round() as usize;
    let n_i = ni.round() as usize + 1;
    if n_theta < 4 || n_i < 2 {
        return Err(SrmError::InvalidArgument(format!("map grid {grid:?} is too coarse")));
    }
    let step = grid.theta_step;
    // columns 0..n_theta are the nodes, n_theta..2*n_theta the half-step points before them
    let columns: Vec<f64> = (0..n_theta)
        .map(|k| k as f64 * step)
        .chain((0..n_theta).map(|k| (k as f64 - 0.5) * step))
        .collect();
    let cells: Vec<(usize, usize)> = (0..n_i).flat_map(|r| (0..2 * n_theta).map(move |c| (r, c))).collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(r, c)| {
            let (th, i) = (columns[c], r as f64 * grid.i_step);
            flux_linkage(spec, th, i, Phase::A, mode).map_err(|e| at_point(th, i, e))
        })
        .collect::<Result<_>>()?;
    let node = |r: usize, c: usize| values[r * 2 * n_theta + c];
    let mid = |r: usize, c: usize| values[r * 2 * n_theta + n_theta + c % n_theta];

    let mut lambda = vec![0.0; n_i * n_theta];
    let mut torque = vec![0.0; n_i * n_theta];
    let mut dth = vec![0.0; n_i * n_theta];
    let mut di = vec![0.0; n_i * n_theta];
    let h = step.to_radians();
    // cumulative co-energy at the half-step columns
    let mut w_mid = vec![0.0; n_theta];
    for r in 0..n_i {
        if r > 0 {
            for (c, w) in w_mid.iter_mut().enumerate() {
                *w += 0.5 * (mid(r - 1, c) + mid(r, c)) * grid.i_step;
            }
        }
        for c in 0..n_theta {
            let k = r * n_theta + c;
            lambda[k] = node(r, c);
            torque[k] = (w_mid[(c + 1) % n_theta] - w_mid[c]) / h;
            dth[k] = (mid(r, c + 1) - mid(r, c)) / h;
        }
    }
    for r in 0..n_i {
        for c in 0..n_theta {
            let (lo, hi) = (r.saturating_sub(1), (r + 1).min(n_i - 1));
            di[r * n_theta + c] = (lambda[hi * n_theta + c] - lambda[lo * n_theta + c]) / ((hi - lo) as f64 * grid.i_step);
        }
    }
    Ok(MagneticMaps {
        grid,
        period,
        n_theta,
        n_i,
        lambda,
        torque,
        dlambda_dtheta: dth,
        dlambda_di: di,
        mode,
        spec_hash: spec.spec_hash(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub spec_hash: String,
    pub drive: DriveConfig,
    pub dt: f64,
    pub t_end: f64,
    pub theta_start: f64,
    pub settling_cycles: usize,
    /// Steps where the incremental inductance floor was applied.
    pub inductance_floor_hits: usize,
    /// Allowed excursion beyond the band while regulating, A.
    pub slew_margin: f64,
    /// Largest excursion beyond `i_ref +/- delta` while regulating, A.
    pub max_band_excursion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub time: Vec<f64>,
    /// Unwrapped mechanical angle, deg.
    pub theta: Vec<f64>,
    pub i_a: Vec<f64>,
    pub i_b: Vec<f64>,
    pub v_a: Vec<f64>,
    pub v_b: Vec<f64>,
    pub gates: Vec<GateState>,
    pub t_a: Vec<f64>,
    pub t_b: Vec<f64>,
    pub t_total: Vec<f64>,
    pub speed_rpm: f64,
    pub period: f64,
    pub meta: TraceMeta,
}

pub const TRACE_HEADER: &str = "t_s,theta_mech_deg,i_A,i_B,v_A,v_B,G_A,G_B,T_A,T_B,T_total";

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for k in 0..self.len() {
            let g = &self.gates[k];
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.time[k],
                self.theta[k],
                self.i_a[k],
                self.i_b[k],
                self.v_a[k],
                self.v_b[k],
                g.g_a as u8,
                g.g_b as u8,
                self.t_a[k],
                self.t_b[k],
                self.t_total[k]
            )?;
        }
        Ok(())
    }

    pub fn mean_torque(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.t_total.iter().sum::<f64>() / self.len() as f64
    }

    fn slice(&self, lo: usize, hi: usize) -> SimulationTrace {
        SimulationTrace {
            time: self.time[lo..hi].to_vec(),
            theta: self.theta[lo..hi].to_vec(),
            i_a: self.i_a[lo..hi].to_vec(),
            i_b: self.i_b[lo..hi].to_vec(),
            v_a: self.v_a[lo..hi].to_vec(),
            v_b: self.v_b[lo..hi].to_vec(),
            gates: self.gates[lo..hi].to_vec(),
            t_a: self.t_a[lo..hi].to_vec(),
            t_b: self.t_b[lo..hi].to_vec(),
            t_total: self.t_total[lo..hi].to_vec(),
            speed_rpm: self.speed_rpm,
            period: self.period,
            meta: self.meta.clone(),
        }
    }

    /// Sample indices that start each electrical cycle, counted from the first sample.
    pub fn cycle_boundaries(&self) -> Vec<usize> {
        let Some(&theta0) = self.theta.first() else {
            return Vec::new();
        };
        let mut out = vec![0];
        let mut next = 1.0;
        for (k, &th) in self.theta.iter().enumerate() {
            if (th - theta0) / self.period >= next - 1e-9 {
                out.push(k);
                next += 1.0;
            }
        }
        out
    }
}

/// Integrate both phases at constant speed from zero current.
pub fn simulate(spec: &MotorSpec, maps: &MagneticMaps, drive: &DriveConfig, speed_rpm: f64, t_end: f64, dt: f64) -> Result<SimulationTrace> {
    simulate_from(spec, maps, drive, speed_rpm, t_end, dt, 0.0)
}

pub fn simulate_from(
    spec: &MotorSpec,
    maps: &MagneticMaps,
    drive: &DriveConfig,
    speed_rpm: f64,
    t_end: f64,
    dt: f64,
    theta_start: f64,
) -> Result<SimulationTrace> {
    drive.validate()?;
    if !(speed_rpm > 0.0 && speed_rpm.is_finite()) {
        return Err(SrmError::InvalidArgument(format!("speed must be positive, got {speed_rpm}")));
    }
    if !(dt > 0.0 && t_end > 0.0 && dt <= t_end) {
        return Err(SrmError::InvalidArgument(format!("need 0 < dt <= t_end, got dt {dt}, t_end {t_end}")));
    }
    let steps = (t_end / dt).round() as usize;
    let omega_deg = speed_rpm * 6.0;
    let omega = speed_rpm * std::f64::consts::TAU / 60.0;
    let r = spec.R_phase;
    let band_lo = drive.i_ref - drive.delta;
    let band_hi = drive.i_ref + drive.delta;
    // worst single-step change: full bus plus resistive and motional voltage
    let slew = (drive.v_dc + r * band_hi + omega * maps.max_speed_voltage_coefficient(band_lo, band_hi)) * dt
        / maps.min_inductance(band_lo, band_hi);

    let mut floor_hits = 0usize;
    let mut deriv = |phase: Phase, theta: f64, i: f64, v: f64| {
        let l_inc = maps.dlambda_di(phase, theta, i);
        let l = if l_inc < INDUCTANCE_FLOOR {
            floor_hits += 1;
            INDUCTANCE_FLOOR
        } else {
            l_inc
        };
        (v - r * i - omega * maps.dlambda_dtheta(phase, theta, i)) / l
    };

    let n = steps + 1;
    let mut tr = SimulationTrace {
        time: Vec::with_capacity(n),
        theta: Vec::with_capacity(n),
        i_a: Vec::with_capacity(n),
        i_b: Vec::with_capacity(n),
        v_a: Vec::with_capacity(n),
        v_b: Vec::with_capacity(n),
        gates: Vec::with_capacity(n),
        t_a: Vec::with_capacity(n),
        t_b: Vec::with_capacity(n),
        t_total: Vec::with_capacity(n),
        speed_rpm,
        period: maps.period,
        meta: TraceMeta {
            spec_hash: maps.spec_hash.clone(),
            drive: *drive,
            dt,
            t_end,
            theta_start,
            settling_cycles: DEFAULT_SETTLING_CYCLES,
            inductance_floor_hits: 0,
            slew_margin: slew,
            max_band_excursion: 0.0,
        },
    };

    let mut ctrl = Controller::default();
    let mut current = [0.0f64; 2];
    let mut regulating = [false; 2];
    let mut excursion = 0.0f64;
    for k in 0..=steps {
        let t = k as f64 * dt;
        let theta = theta_start + omega_deg * t;
        let gs = ctrl.step(theta, current[0], current[1], drive);
        debug_assert!(gs.consistent());
        let gates = [(gs.g_a, gs.c_a), (gs.g_b, gs.c_b)];
        let mut volts = [0.0; 2];
        for (p, phase) in [Phase::A, Phase::B].into_iter().enumerate() {
            let (g, c) = gates[p];
            volts[p] = phase_voltage(g, c, current[p], drive);
            if !c {
                regulating[p] = false;
            } else if current[p] >= band_lo {
                regulating[p] = true;
            }
            if regulating[p] {
                let over = (current[p] - band_hi).max(band_lo - current[p]).max(0.0);
                excursion = excursion.max(over);
                if over > slew + 1e-12 {
                    return Err(SrmError::BandViolation {
                        phase: phase.as_char(),
                        current: current[p],
                        lower: band_lo - slew,
                        upper: band_hi + slew,
                        time: t,
                    });
                }
            }
        }
        let ta = maps.torque(Phase::A, theta, current[0]);
        let tb = maps.torque(Phase::B, theta, current[1]);
        tr.time.push(t);
        tr.theta.push(theta);
        tr.i_a.push(current[0]);
        tr.i_b.push(current[1]);
        tr.v_a.push(volts[0]);
        tr.v_b.push(volts[1]);
        tr.gates.push(gs);
        tr.t_a.push(ta);
        tr.t_b.push(tb);
        tr.t_total.push(ta + tb);
        if k == steps {
            break;
        }
        let half = 0.5 * dt * omega_deg;
        for (p, phase) in [Phase::A, Phase::B].into_iter().enumerate() {
            let (g, _) = gates[p];
            let i0 = current[p];
            if !g && i0 <= 0.0 {
                current[p] = 0.0;
                continue;
            }
            let v = volts[p];
            let k1 = deriv(phase, theta, i0, v);
            let k2 = deriv(phase, theta + half, i0 + 0.5 * dt * k1, v);
            let k3 = deriv(phase, theta + half, i0 + 0.5 * dt * k2, v);
            let k4 = deriv(phase, theta + 2.0 * half, i0 + dt * k3, v);
            let next = i0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            current[p] = next.max(0.0);
        }
    }
    tr.meta.inductance_floor_hits = floor_hits;
    tr.meta.max_band_excursion = excursion;
    Ok(tr)
}

pub const DEFAULT_SETTLING_CYCLES: usize = 3;

/// The last `n_cycles` complete electrical cycles, after discarding at least
/// the settling cycles.
pub fn steady_state_window(trace: &SimulationTrace, n_cycles: usize) -> Result<SimulationTrace> {
    steady_state_window_with(trace, n_cycles, DEFAULT_SETTLING_CYCLES)
}

pub fn steady_state_window_with(trace: &SimulationTrace, n_cycles: usize, settling: usize) -> Result<SimulationTrace> {
    let b = trace.cycle_boundaries();
    let complete = b.len().saturating_sub(1);
    let per_cycle = if complete > 0 { b[1] - b[0] } else { trace.len() };
    if n_cycles == 0 || complete < n_cycles + settling {
        return Err(SrmError::TraceTooShort {
            needed: (n_cycles + settling) * per_cycle.max(1) + 1,
            available: trace.len(),
        });
    }
    let hi = b[complete];
    let lo = b[complete - n_cycles];
    Ok(trace.slice(lo, hi))
}
