//! Hysteresis current control with position-based commutation.

use serde::{Deserialize, Serialize};

use crate::characteristics::CommutationAngles;
use crate::error::{Result, SrmError};
use crate::mec::Phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chopping {
    /// Off-state drives the phase at `-V_dc` through the diodes.
    #[default]
    Hard,
    /// Inside the commutation window the off-state freewheels at zero volts.
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub i_ref: f64,
    /// Half-width of the hysteresis band, A.
    pub delta: f64,
    pub v_dc: f64,
    pub commutation: CommutationAngles,
    pub n_r: u32,
    pub device_drop: f64,
    pub chopping: Chopping,
    /// Encoder resolution, mech deg; `None` reads the exact position.
    pub encoder_step: Option<f64>,
}

impl DriveConfig {
    /// 6 A reference, 0.2 A band, 150 V bus.
    pub fn new(commutation: CommutationAngles, n_r: u32) -> Self {
        DriveConfig {
            i_ref: 6.0,
            delta: 0.2,
            v_dc: 150.0,
            commutation,
            n_r,
            device_drop: 0.0,
            chopping: Chopping::Hard,
            encoder_step: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(SrmError::InvalidArgument(format!("hysteresis band must be positive, got {}", self.delta)));
        }
        if !(self.v_dc >= 0.0 && self.v_dc.is_finite()) {
            return Err(SrmError::InvalidArgument(format!("bus voltage must be non-negative, got {}", self.v_dc)));
        }
        if !(self.i_ref > self.delta) {
            return Err(SrmError::InvalidArgument(format!(
                "reference current {} must exceed the band {}",
                self.i_ref, self.delta
            )));
        }
        if self.n_r == 0 {
            return Err(SrmError::InvalidArgument("rotor tooth count must be positive".into()));
        }
        if let Some(q) = self.encoder_step {
            if !(q > 0.0) {
                return Err(SrmError::InvalidArgument(format!("encoder step must be positive, got {q}")));
            }
        }
        Ok(())
    }

    pub fn pitch(&self) -> f64 {
        360.0 / self.n_r as f64
    }

    /// Same drive with the conventional half-pitch window.
    pub fn conventional(&self) -> Self {
        DriveConfig {
            commutation: CommutationAngles::conventional(self.pitch() / 2.0),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GateState {
    pub s_a: bool,
    pub s_b: bool,
    pub c_a: bool,
    pub c_b: bool,
    pub g_a: bool,
    pub g_b: bool,
}

impl GateState {
    pub fn consistent(&self) -> bool {
        self.g_a == (self.s_a && self.c_a) && self.g_b == (self.s_b && self.c_b)
    }
}

/// Comparator with memory inside `i_ref +/- delta`.
pub fn hysteresis_step(i_meas: f64, cfg: &DriveConfig, prev_s: bool) -> bool {
    if i_meas < cfg.i_ref - cfg.delta {
        true
    } else if i_meas > cfg.i_ref + cfg.delta {
        false
    } else {
        prev_s
    }
}

fn quantize(theta: f64, cfg: &DriveConfig) -> f64 {
    match cfg.encoder_step {
        Some(q) => (theta / q).floor() * q,
        None => theta,
    }
}

/// Start of a phase's conduction window, mech deg.
pub fn window_start(phase: Phase, cfg: &DriveConfig) -> f64 {
    let start = cfg.commutation.unaligned_angle;
    match phase {
        Phase::A => start,
        Phase::B => start + cfg.pitch() / 2.0,
    }
}

fn in_window(theta: f64, phase: Phase, cfg: &DriveConfig) -> bool {
    (theta - window_start(phase, cfg)).rem_euclid(cfg.pitch()) < cfg.commutation.theta_on
}

/// `(C_A, C_B)` at rotor position `theta`.
pub fn commutation_signals(theta: f64, cfg: &DriveConfig) -> (bool, bool) {
    let th = quantize(theta, cfg);
    (in_window(th, Phase::A, cfg), in_window(th, Phase::B, cfg))
}

pub fn gate(s: bool, c: bool) -> bool {
    s && c
}

/// Hard-chopping terminal voltage.
pub fn inverter_voltage(g: bool, i: f64, cfg: &DriveConfig) -> f64 {
    if g {
        cfg.v_dc - cfg.device_drop
    } else if i > 0.0 {
        -cfg.v_dc - cfg.device_drop
    } else {
        0.0
    }
}

/// Terminal voltage for the configured chopping style.
pub fn phase_voltage(g: bool, c: bool, i: f64, cfg: &DriveConfig) -> f64 {
    match cfg.chopping {
        Chopping::Soft if !g && c && i > 0.0 => -cfg.device_drop,
        _ => inverter_voltage(g, i, cfg),
    }
}

/// Controller state advanced once per time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Controller {
    s_a: bool,
    s_b: bool,
}

impl Controller {
    pub fn step(&mut self, theta: f64, i_a: f64, i_b: f64, cfg: &DriveConfig) -> GateState {
        self.s_a = hysteresis_step(i_a, cfg, self.s_a);
        self.s_b = hysteresis_step(i_b, cfg, self.s_b);
        let (c_a, c_b) = commutation_signals(theta, cfg);
        GateState {
            s_a: self.s_a,
            s_b: self.s_b,
            c_a,
            c_b,
            g_a: gate(self.s_a, c_a),
            g_b: gate(self.s_b, c_b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutationEntry {
    pub phase: Phase,
    pub cycle: usize,
    pub on_angle_mech: f64,
    pub off_angle_mech: f64,
}

/// Turn-on and turn-off angles of both phases for `cycles` electrical periods.
pub fn commutation_table(cfg: &DriveConfig, cycles: usize) -> Vec<CommutationEntry> {
    let p = cfg.pitch();
    let mut out = Vec::with_capacity(2 * cycles);
    for cycle in 0..cycles {
        for phase in [Phase::A, Phase::B] {
            let on = window_start(phase, cfg).rem_euclid(p) + cycle as f64 * p;
            out.push(CommutationEntry {
                phase,
                cycle,
                on_angle_mech: on,
                off_angle_mech: on + cfg.commutation.theta_on,
            });
        }
    }
    out
}
