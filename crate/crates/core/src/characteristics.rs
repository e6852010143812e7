//! Static torque by virtual work, torque-angle curves and commutation angles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrmError};
use crate::geometry::{bore_diameter, reduce_angle, MotorSpec, Topology};
use crate::mec::{flux_linkage, Mode, Phase};
use crate::MU0;

/// Quadrature and finite-difference settings for virtual-work torque.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorqueOptions {
    /// Trapezoid steps of the co-energy integral from 0 to `i`.
    pub current_steps: usize,
    /// Half-width of the central angle difference, mech deg.
    pub delta_deg: f64,
}

impl Default for TorqueOptions {
    fn default() -> Self {
        TorqueOptions {
            current_steps: 60,
            delta_deg: 0.05,
        }
    }
}

/// Co-energy `W'(theta, i) = int_0^i lambda di`, J.
pub fn coenergy(spec: &MotorSpec, theta: f64, i: f64, phase: Phase, mode: Mode, steps: usize) -> Result<f64> {
    if i == 0.0 {
        return Ok(0.0);
    }
    let h = i / steps as f64;
    let mut sum = 0.0;
    for k in 0..=steps {
        let lam = flux_linkage(spec, theta, h * k as f64, phase, mode)?;
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        sum += w * lam;
    }
    Ok(sum * h)
}

/// Phase A static torque, N.m, with the default quadrature.
pub fn static_torque(spec: &MotorSpec, theta: f64, i: f64, mode: Mode) -> Result<f64> {
    static_torque_with(spec, theta, i, Phase::A, mode, &TorqueOptions::default())
}

pub fn static_torque_with(
    spec: &MotorSpec,
    theta: f64,
    i: f64,
    phase: Phase,
    mode: Mode,
    opts: &TorqueOptions,
) -> Result<f64> {
    if i < 0.0 {
        return Err(SrmError::InvalidArgument(format!("current must be non-negative, got {i}")));
    }
    let d = opts.delta_deg;
    let plus = coenergy(spec, theta + d, i, phase, mode, opts.current_steps)?;
    let minus = coenergy(spec, theta - d, i, phase, mode, opts.current_steps)?;
    Ok((plus - minus) / (2.0 * d.to_radians()))
}

/// Air-gap-only torque while both teeth of every pole gain overlap.
///
/// Per C-core loop the inductance rises as `(2 N_pole)^2 mu0 m (D/2) theta L / (2 l_g)`;
/// the phase torque is the sum over its C-cores.
pub fn analytic_torque_linear(spec: &MotorSpec, i: f64) -> Result<f64> {
    let d = bore_diameter(spec)? * 1e-3;
    let l = spec.L_stack * 1e-3;
    let lg = spec.l_g * 1e-3;
    let loop_turns = 2.0 * spec.N_pole as f64;
    let per_loop = spec.m_teeth as f64 * loop_turns.powi(2) * MU0 * d * l * i * i / (8.0 * lg);
    Ok(per_loop * spec.ccores_per_phase() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorqueAngleCurve {
    /// Uniform grid over one electrical period, both ends included.
    pub angles: Vec<f64>,
    pub torque: Vec<f64>,
    pub current: f64,
    pub topology: Topology,
    pub mode: Mode,
    pub grid_step: f64,
    pub period: f64,
    pub options: TorqueOptions,
    pub spec_hash: String,
}

impl TorqueAngleCurve {
    /// Samples of one period without the repeated end point.
    fn cyclic(&self) -> (&[f64], &[f64]) {
        let n = self.angles.len() - 1;
        (&self.angles[..n], &self.torque[..n])
    }

    pub fn peak(&self) -> f64 {
        self.torque.iter().fold(f64::NEG_INFINITY, |a, &t| a.max(t))
    }

    /// `|int T dtheta|` over one period (trapezoid, radians).
    pub fn net_work(&self) -> f64 {
        let h = self.grid_step.to_radians();
        let (_, t) = self.cyclic();
        (t.iter().sum::<f64>() * h).abs()
    }

    /// Span of angles with positive torque, mech deg.
    pub fn positive_span(&self) -> f64 {
        let (_, t) = self.cyclic();
        t.iter().filter(|&&x| x > 0.0).count() as f64 * self.grid_step
    }

    /// Torque at an arbitrary angle by periodic linear interpolation.
    pub fn at(&self, theta: f64) -> f64 {
        let (a, t) = self.cyclic();
        let n = t.len();
        let x = (theta - a[0]).rem_euclid(self.period) / self.grid_step;
        let k = (x.floor() as usize).min(n - 1);
        let f = x - k as f64;
        t[k] * (1.0 - f) + t[(k + 1) % n] * f
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("angle_mech_deg,torque_Nm\n");
        for (a, t) in self.angles.iter().zip(&self.torque) {
            out.push_str(&format!("{a},{t}\n"));
        }
        out
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "topology": self.topology,
            "current_A": self.current,
            "mode": self.mode,
            "grid_step_deg": self.grid_step,
            "period_deg": self.period,
            "current_steps": self.options.current_steps,
            "delta_deg": self.options.delta_deg,
            "spec_hash": self.spec_hash,
            "averaging_window": "conduction window [effective unaligned, effective aligned] of the excited phase",
        })
    }
}

fn grid_count(period: f64, step: f64) -> Result<usize> {
    let n = period / step;
    if !(step > 0.0) || (n - n.round()).abs() > 1e-9 || n.round() < 4.0 {
        return Err(SrmError::InvalidArgument(format!(
            "grid step {step} must evenly divide the electrical period {period}"
        )));
    }
    Ok(n.round() as usize)
}

/// One phase-A curve per current over one electrical period.
pub fn torque_angle_curve(spec: &MotorSpec, currents: &[f64], mode: Mode, grid_step: f64) -> Result<Vec<TorqueAngleCurve>> {
    torque_angle_curve_with(spec, currents, mode, grid_step, &TorqueOptions::default())
}

pub fn torque_angle_curve_with(
    spec: &MotorSpec,
    currents: &[f64],
    mode: Mode,
    grid_step: f64,
    opts: &TorqueOptions,
) -> Result<Vec<TorqueAngleCurve>> {
    let period = spec.rotor_pitch();
    let n = grid_count(period, grid_step)?;
    let angles: Vec<f64> = (0..=n).map(|k| k as f64 * grid_step).collect();
    // With the difference half-width at half a grid step, neighbouring points
    // share co-energy evaluations at the mid-points.
    let shared = (opts.delta_deg - grid_step / 2.0).abs() < 1e-12;
    let hash = spec.spec_hash();
    currents
        .iter()
        .map(|&i| {
            if i < 0.0 {
                return Err(SrmError::InvalidArgument(format!("current must be non-negative, got {i}")));
            }
            let torque = if shared {
                let mids: Vec<f64> = (0..=n + 1).map(|k| (k as f64 - 0.5) * grid_step).collect();
                let w: Vec<f64> = mids
                    .par_iter()
                    .map(|&th| {
                        coenergy(spec, th, i, Phase::A, mode, opts.current_steps).map_err(|e| at_point(th, i, e))
                    })
                    .collect::<Result<_>>()?;
                let dd = 2.0 * opts.delta_deg.to_radians();
                (0..=n).map(|k| (w[k + 1] - w[k]) / dd).collect()
            } else {
                angles
                    .par_iter()
                    .map(|&th| static_torque_with(spec, th, i, Phase::A, mode, opts).map_err(|e| at_point(th, i, e)))
                    .collect::<Result<Vec<_>>>()?
            };
            Ok(TorqueAngleCurve {
                angles: angles.clone(),
                torque,
                current: i,
                topology: spec.topology_id,
                mode,
                grid_step,
                period,
                options: *opts,
                spec_hash: hash.clone(),
            })
        })
        .collect()
}

pub(crate) fn at_point(theta: f64, current: f64, e: SrmError) -> SrmError {
    SrmError::AtGridPoint {
        theta,
        current,
        source: Box::new(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutationAngles {
    pub alpha: f64,
    pub beta: f64,
    /// Conduction width per electrical period, mech deg.
    pub theta_on: f64,
    /// Non-conducting remainder of the period, mech deg.
    pub theta_off: f64,
    /// Positive-to-negative torque crossing of the excited phase.
    pub aligned_angle: f64,
    /// Negative-to-positive torque crossing of the excited phase; conduction starts here.
    pub unaligned_angle: f64,
}

impl CommutationAngles {
    /// Angles from given `alpha`, `beta` with the window anchored at `unaligned_angle`.
    pub fn from_alpha_beta(alpha: f64, beta: f64, half_pitch: f64, unaligned_angle: f64, aligned_angle: f64) -> Self {
        let theta_on = half_pitch + alpha - beta;
        CommutationAngles {
            alpha,
            beta,
            theta_on,
            theta_off: 2.0 * half_pitch - theta_on,
            aligned_angle,
            unaligned_angle,
        }
    }

    /// Half-pitch window between the geometric unaligned and aligned positions.
    pub fn conventional(half_pitch: f64) -> Self {
        Self::from_alpha_beta(0.0, 0.0, half_pitch, -half_pitch, 0.0)
    }

    pub fn is_self_starting(&self) -> bool {
        self.alpha > self.beta
    }

    pub fn warning(&self) -> Option<&'static str> {
        (self.alpha <= 0.0).then_some("not self-starting")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Crossing {
    angle: f64,
    rising: bool,
}

/// Zero crossings of a periodic sampled curve. Samples within `eps` of zero
/// are treated as zero; a crossing sits midway between where the curve passes
/// `+eps` and `-eps`, which is the zero itself on a straight segment.
fn zero_crossings(angles: &[f64], torque: &[f64], period: f64, eps: f64) -> Vec<Crossing> {
    let n = torque.len();
    let sign = |t: f64| {
        if t > eps {
            1
        } else if t < -eps {
            -1
        } else {
            0
        }
    };
    let angle = |k: usize| angles[k % n] + (k / n) as f64 * period;
    let level = |k: usize, lvl: f64| {
        let (t0, t1) = (torque[k % n], torque[(k + 1) % n]);
        let f = if t1 == t0 { 0.5 } else { (lvl - t0) / (t1 - t0) };
        angle(k) + f * (angle(k + 1) - angle(k))
    };
    let Some(start) = (0..n).find(|&k| sign(torque[k]) != 0) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut last = start;
    for step in 1..=n {
        let k = start + step;
        let s = sign(torque[k % n]);
        if s == 0 {
            continue;
        }
        let prev = sign(torque[last % n]);
        if s != prev {
            let rising = s > 0;
            let (leave, enter) = if rising { (-eps, eps) } else { (eps, -eps) };
            let a = level(last, leave);
            let b = level(k - 1, enter);
            out.push(Crossing {
                angle: reduce_angle(0.5 * (a + b), period),
                rising,
            });
        }
        last = k;
    }
    out
}

/// Pick the crossing of the given direction closest to `target` (cyclic).
fn nearest(crossings: &[Crossing], rising: bool, target: f64, period: f64) -> Option<f64> {
    crossings
        .iter()
        .filter(|c| c.rising == rising)
        .map(|c| c.angle)
        .min_by(|a, b| {
            let da = reduce_angle(a - target, period).abs();
            let db = reduce_angle(b - target, period).abs();
            da.total_cmp(&db)
        })
}

/// Commutation angles with the nominal window ending at the geometric aligned
/// position `theta = 0`.
pub fn extract_commutation_angles(curve: &TorqueAngleCurve, phase_shift: f64) -> Result<CommutationAngles> {
    extract_commutation_angles_anchored(curve, phase_shift, 0.0)
}

/// Commutation angles with an explicit end of the nominal conduction window,
/// e.g. the aligned crossing of the symmetric-tooth variant.
pub fn extract_commutation_angles_anchored(
    curve: &TorqueAngleCurve,
    phase_shift: f64,
    nominal_end: f64,
) -> Result<CommutationAngles> {
    if curve.angles.len() < 3 {
        return Err(SrmError::NoZeroCrossing);
    }
    let period = curve.period;
    let (angles, torque) = curve.cyclic();
    let peak = torque.iter().fold(0.0f64, |a, &t| a.max(t.abs()));
    let crossings = zero_crossings(angles, torque, period, 0.01 * peak);
    let down = nearest(&crossings, false, nominal_end, period).ok_or(SrmError::NoZeroCrossing)?;
    let up = nearest(&crossings, true, nominal_end - phase_shift, period).ok_or(SrmError::NoZeroCrossing)?;
    // the other phase's curve is this one advanced by `phase_shift`
    let next_up = up - phase_shift;
    let alpha = reduce_angle(down - next_up, period);
    let beta = reduce_angle(nominal_end - down, period);
    let unaligned = down - reduce_angle(down - up, period).rem_euclid(period);
    Ok(CommutationAngles::from_alpha_beta(alpha, beta, phase_shift, unaligned, down))
}

/// Aligned crossing of the symmetric-tooth variant, the anchor for `beta`.
pub fn nominal_aligned_angle(curve: &TorqueAngleCurve) -> Result<f64> {
    let (angles, torque) = curve.cyclic();
    let peak = torque.iter().fold(0.0f64, |a, &t| a.max(t.abs()));
    let crossings = zero_crossings(angles, torque, curve.period, 0.01 * peak);
    nearest(&crossings, false, 0.0, curve.period).ok_or(SrmError::NoZeroCrossing)
}
