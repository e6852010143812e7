//! Motor specification, presets and the angle-dependent air-gap primitives.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Result, SrmError};
use crate::materials::{BhCurve, PmSpec};
use crate::MU0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Topology {
    Motor1,
    Motor2,
    Motor3,
    Motor4,
}

impl Topology {
    pub const ALL: [Topology; 4] = [Topology::Motor1, Topology::Motor2, Topology::Motor3, Topology::Motor4];

    pub fn has_pm1(self) -> bool {
        matches!(self, Topology::Motor2 | Topology::Motor4)
    }

    pub fn has_pm2(self) -> bool {
        matches!(self, Topology::Motor3 | Topology::Motor4)
    }

    pub fn index(self) -> usize {
        self as usize + 1
    }

    pub fn from_index(k: usize) -> Option<Self> {
        Self::ALL.get(k.checked_sub(1)?).copied()
    }

    pub fn preset_name(self) -> String {
        format!("table1-motor{}", self.index())
    }

    pub fn label(self) -> String {
        format!("Motor{}", self.index())
    }
}

impl std::str::FromStr for Topology {
    type Err = SrmError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let digits = t
            .strip_prefix("table1-motor")
            .or_else(|| t.strip_prefix("motor"))
            .unwrap_or(&t);
        digits
            .parse::<usize>()
            .ok()
            .and_then(Topology::from_index)
            .ok_or_else(|| SrmError::UnknownPreset(s.to_string()))
    }
}

/// Which tooth of each stator pole carries the extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WidenedTooth {
    #[default]
    Outer,
    Inner,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorSpec {
    pub topology_id: Topology,
    /// Radial and axial lengths in mm.
    pub D_o: f64,
    pub b_sy: f64,
    pub h_s: f64,
    pub b_ty: f64,
    pub h_t: f64,
    pub l_g: f64,
    pub h_r: f64,
    /// Arcs in mechanical degrees.
    pub lambda_pole: f64,
    pub beta_s: f64,
    pub beta_s_wide: f64,
    pub a_ext: f64,
    pub beta_r: f64,
    pub L_stack: f64,
    pub W_PM: f64,
    pub l_PM1: f64,
    pub l_PM2: f64,
    pub N_pole: u32,
    pub N_r: u32,
    pub n_ccores: u32,
    pub m_teeth: u32,
    pub lamination: BhCurve,
    pub pm_material: PmSpec,
    pub R_phase: f64,
    pub P_core_const: f64,
    /// Liters.
    pub active_volume: f64,
    #[serde(default)]
    pub widened_tooth: WidenedTooth,
    /// Air path length of the unaligned permeance floor, mm. Defaults to `l_g + h_r`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fringing_length: Option<f64>,
    /// Radial depth of the rotor back iron, mm. Defaults to `2 * b_sy`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotor_yoke_depth: Option<f64>,
}

impl MotorSpec {
    pub fn preset(topology: Topology) -> Self {
        MotorSpec {
            topology_id: topology,
            D_o: 94.0,
            b_sy: 4.6,
            h_s: 10.8,
            b_ty: 3.2,
            h_t: 2.8,
            l_g: 0.3,
            h_r: 4.64,
            lambda_pole: 10.0,
            beta_s: 8.4,
            beta_s_wide: 11.9,
            a_ext: 3.5,
            beta_r: 8.8,
            L_stack: 20.0,
            W_PM: 5.0,
            l_PM1: 5.0,
            l_PM2: 10.0,
            N_pole: 90,
            N_r: 18,
            n_ccores: 4,
            m_teeth: 2,
            lamination: BhCurve::m19_24g(),
            pm_material: PmSpec::ndfeb_n35(),
            R_phase: 0.218,
            P_core_const: 0.9,
            active_volume: 0.320,
            widened_tooth: WidenedTooth::Outer,
            fringing_length: None,
            rotor_yoke_depth: None,
        }
    }

    pub fn preset_by_name(name: &str) -> Result<Self> {
        let t = name.trim().to_ascii_lowercase();
        match t.strip_prefix("table1-motor").and_then(|d| d.parse().ok()).and_then(Topology::from_index) {
            Some(top) => Ok(Self::preset(top)),
            None => Err(SrmError::UnknownPreset(name.to_string())),
        }
    }

    /// Same motor with both teeth narrow; the reference for nominal commutation.
    pub fn symmetric_variant(&self) -> Self {
        MotorSpec {
            beta_s_wide: self.beta_s,
            a_ext: 0.0,
            ..self.clone()
        }
    }

    pub fn with_topology(&self, topology: Topology) -> Self {
        MotorSpec {
            topology_id: topology,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("D_o", self.D_o),
            ("b_sy", self.b_sy),
            ("h_s", self.h_s),
            ("b_ty", self.b_ty),
            ("h_t", self.h_t),
            ("h_r", self.h_r),
            ("lambda_pole", self.lambda_pole),
            ("beta_s", self.beta_s),
            ("beta_s_wide", self.beta_s_wide),
            ("beta_r", self.beta_r),
            ("L_stack", self.L_stack),
            ("W_PM", self.W_PM),
            ("l_PM1", self.l_PM1),
            ("l_PM2", self.l_PM2),
            ("active_volume", self.active_volume),
        ];
        if !(self.l_g > 0.0 && self.l_g.is_finite()) {
            return Err(SrmError::invalid("l_g", "air-gap length must be positive", self.l_g));
        }
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SrmError::invalid(field, "must be positive", v));
            }
        }
        if !(self.a_ext >= 0.0 && self.a_ext.is_finite()) {
            return Err(SrmError::invalid("a_ext", "must be non-negative", self.a_ext));
        }
        if (self.beta_s_wide - (self.beta_s + self.a_ext)).abs() > 1e-9 {
            return Err(SrmError::invalid(
                "beta_s_wide",
                format!("must equal beta_s + a_ext = {}", self.beta_s + self.a_ext),
                self.beta_s_wide,
            ));
        }
        for (field, v) in [("N_pole", self.N_pole), ("N_r", self.N_r)] {
            if v == 0 {
                return Err(SrmError::invalid(field, "must be positive", v));
            }
        }
        if self.n_ccores < 2 || self.n_ccores % 2 != 0 {
            return Err(SrmError::invalid("n_ccores", "must be a positive even count (two phases)", self.n_ccores));
        }
        if self.m_teeth != 2 {
            return Err(SrmError::invalid("m_teeth", "only double-tooth poles are supported", self.m_teeth));
        }
        let pitch = self.rotor_pitch();
        if self.beta_r >= pitch {
            return Err(SrmError::invalid("beta_r", format!("must be below the rotor pitch {pitch}"), self.beta_r));
        }
        if self.beta_s_wide >= pitch {
            return Err(SrmError::invalid(
                "beta_s_wide",
                format!("must be below the rotor pitch {pitch}"),
                self.beta_s_wide,
            ));
        }
        for (field, v) in [("R_phase", self.R_phase), ("P_core_const", self.P_core_const)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SrmError::invalid(field, "must be non-negative", v));
            }
        }
        if let Some(f) = self.fringing_length {
            if !(f > 0.0 && f.is_finite()) {
                return Err(SrmError::invalid("fringing_length", "must be positive", f));
            }
        }
        if let Some(d) = self.rotor_yoke_depth {
            if !(d > 0.0 && d.is_finite()) {
                return Err(SrmError::invalid("rotor_yoke_depth", "must be positive", d));
            }
        }
        self.lamination.validate()?;
        self.pm_material.validate()?;
        let bore = bore_diameter(self)?;
        if self.rotor_yoke_inner_radius(bore) <= 0.0 {
            return Err(SrmError::invalid(
                "rotor_yoke_depth",
                "rotor stack-up must leave a positive inner radius",
                self.rotor_yoke_depth_mm(),
            ));
        }
        Ok(())
    }

    /// Rotor pitch, mech deg; one electrical period.
    pub fn rotor_pitch(&self) -> f64 {
        360.0 / self.N_r as f64
    }

    pub fn half_pitch(&self) -> f64 {
        self.rotor_pitch() / 2.0
    }

    pub fn ccores_per_phase(&self) -> u32 {
        self.n_ccores / 2
    }

    /// Winding turns linked by one phase: two poles per C-core, in series.
    pub fn turns_per_phase(&self) -> f64 {
        (self.ccores_per_phase() * 2 * self.N_pole) as f64
    }

    pub fn fringing_length_mm(&self) -> f64 {
        self.fringing_length.unwrap_or(self.l_g + self.h_r)
    }

    pub fn rotor_yoke_depth_mm(&self) -> f64 {
        self.rotor_yoke_depth.unwrap_or(2.0 * self.b_sy)
    }

    fn rotor_yoke_inner_radius(&self, bore: f64) -> f64 {
        bore / 2.0 - self.l_g - self.h_r - self.rotor_yoke_depth_mm()
    }

    /// Tooth arcs `(inner, outer)` of each pole.
    pub fn tooth_arcs(&self) -> (f64, f64) {
        match self.widened_tooth {
            WidenedTooth::Outer => (self.beta_s, self.beta_s_wide),
            WidenedTooth::Inner => (self.beta_s_wide, self.beta_s),
        }
    }

    /// Total magnet volume, liters: `n_ccores` magnets per present set.
    pub fn pm_volume(&self) -> f64 {
        let per = |l: f64| self.n_ccores as f64 * self.W_PM * self.L_stack * l * 1e-6;
        let mut v = 0.0;
        if self.topology_id.has_pm1() {
            v += per(self.l_PM1);
        }
        if self.topology_id.has_pm2() {
            v += per(self.l_PM2);
        }
        v
    }

    /// SHA-256 over the canonical JSON serialization.
    pub fn spec_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        hex_digest(&json)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse a motor spec document. A `"preset"` key selects a built-in motor whose
/// fields the remaining keys override.
pub fn load_motor_spec(text: &str) -> Result<MotorSpec> {
    let doc: Value = serde_json::from_str(text).map_err(|e| SrmError::Parse(e.to_string()))?;
    let Value::Object(mut map) = doc else {
        return Err(SrmError::Parse("expected a JSON object".into()));
    };
    let merged = match map.remove("preset") {
        Some(Value::String(name)) => {
            let base = MotorSpec::preset_by_name(&name)?;
            let Value::Object(mut base_map) = serde_json::to_value(&base).expect("spec serializes") else {
                unreachable!("spec serializes to an object")
            };
            base_map.extend(map);
            Value::Object(base_map)
        }
        Some(other) => return Err(SrmError::Parse(format!("`preset` must be a string, got {other}"))),
        None => Value::Object(map),
    };
    let spec: MotorSpec = serde_json::from_value(merged).map_err(|e| SrmError::Parse(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

/// Stator bore diameter, mm.
pub fn bore_diameter(spec: &MotorSpec) -> Result<f64> {
    let d = spec.D_o - 2.0 * (spec.b_sy + spec.h_s + spec.b_ty + spec.h_t);
    if d > 0.0 {
        Ok(d)
    } else {
        Err(SrmError::InconsistentRadialDimensions(d))
    }
}

/// Angular overlap between a stator tooth and the rotor poles, mech deg.
///
/// `displacement` is the angle from the tooth center to a rotor pole center.
/// Teeth wider than `pitch - beta_r` can face two poles at once, so the
/// neighbouring poles are included.
pub fn overlap_arc(displacement: f64, tooth_arc: f64, spec: &MotorSpec) -> f64 {
    let pitch = spec.rotor_pitch();
    let d = reduce_angle(displacement, pitch);
    let half_sum = (tooth_arc + spec.beta_r) / 2.0;
    let cap = tooth_arc.min(spec.beta_r);
    [-pitch, 0.0, pitch]
        .iter()
        .map(|k| (half_sum - (d + k).abs()).clamp(0.0, cap))
        .sum()
}

/// Reduce an angle into `[-period/2, period/2)`.
pub fn reduce_angle(angle: f64, period: f64) -> f64 {
    (angle + period / 2.0).rem_euclid(period) - period / 2.0
}

/// Air-gap reluctance of one tooth, A/Wb, with the unaligned permeance floor.
pub fn airgap_reluctance(theta_ov: f64, tooth_arc: f64, spec: &MotorSpec) -> Result<f64> {
    let r = bore_diameter(spec)? / 2.0 * 1e-3;
    let l = spec.L_stack * 1e-3;
    let permeance = MU0 * r * theta_ov.max(0.0).to_radians() * l / (spec.l_g * 1e-3);
    let floor = MU0 * r * tooth_arc.to_radians() * l / (spec.fringing_length_mm() * 1e-3);
    Ok(1.0 / permeance.max(floor))
}

/// A mean flux path through iron: length and cross-section, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IronPath {
    pub length: f64,
    pub area: f64,
}

impl IronPath {
    fn mm(length: f64, area: f64) -> Self {
        IronPath {
            length: length * 1e-3,
            area: area * 1e-6,
        }
    }
}

/// Iron path dimensions along the mean flux lines of one C-core and the rotor
/// section beneath it.
///
/// * stator yoke: arc between the two pole axes at mid-yoke radius, `b_sy` deep;
/// * stator pole: radial length `h_s` plus half of each adjoining yoke, `lambda_pole`
///   wide at mid-pole radius;
/// * tooth yoke: half a rotor pitch along the mid tooth-yoke radius, `b_ty` deep;
/// * tooth: radial `h_t`, tooth arc wide at the bore;
/// * rotor pole: radial `h_r`, `beta_r` wide at mid-pole radius;
/// * rotor yoke: two rotor pitches at mid-depth, `rotor_yoke_depth` deep;
/// * inter-core rotor arc: the remaining circumference between adjacent C-cores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IronGeometry {
    pub bore: f64,
    pub stator_yoke: IronPath,
    pub stator_pole: IronPath,
    pub tooth_yoke: IronPath,
    pub tooth_inner: IronPath,
    pub tooth_outer: IronPath,
    pub rotor_pole: IronPath,
    pub rotor_yoke: IronPath,
    pub rotor_link: IronPath,
}

impl IronGeometry {
    pub fn new(spec: &MotorSpec) -> Result<Self> {
        let bore = bore_diameter(spec)?;
        let r_b = bore / 2.0;
        let l = spec.L_stack;
        let pitch = spec.rotor_pitch();
        let core_span = 360.0 / spec.n_ccores as f64;
        let pole_span = 2.0 * pitch;

        let r_sy = spec.D_o / 2.0 - spec.b_sy / 2.0;
        let r_pole = r_b + spec.h_t + spec.b_ty + spec.h_s / 2.0;
        let r_ty = r_b + spec.h_t + spec.b_ty / 2.0;
        let r_rp = r_b - spec.l_g - spec.h_r / 2.0;
        let depth = spec.rotor_yoke_depth_mm();
        let r_ry = spec.rotor_yoke_inner_radius(bore) + depth / 2.0;
        let (inner, outer) = spec.tooth_arcs();

        Ok(IronGeometry {
            bore,
            stator_yoke: IronPath::mm(r_sy * pole_span.to_radians(), spec.b_sy * l),
            stator_pole: IronPath::mm(
                spec.h_s + spec.b_sy / 2.0 + spec.b_ty / 2.0,
                r_pole * spec.lambda_pole.to_radians() * l,
            ),
            tooth_yoke: IronPath::mm(r_ty * (pitch / 2.0).to_radians(), spec.b_ty * l),
            tooth_inner: IronPath::mm(spec.h_t, r_b * inner.to_radians() * l),
            tooth_outer: IronPath::mm(spec.h_t, r_b * outer.to_radians() * l),
            rotor_pole: IronPath::mm(spec.h_r, r_rp * spec.beta_r.to_radians() * l),
            rotor_yoke: IronPath::mm(r_ry * pole_span.to_radians(), depth * l),
            rotor_link: IronPath::mm(r_ry * (core_span - pole_span).to_radians(), depth * l),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names_resolve() {
        for t in Topology::ALL {
            let s = MotorSpec::preset_by_name(&t.preset_name()).unwrap();
            assert_eq!(s.topology_id, t);
            s.validate().unwrap();
        }
        assert!(MotorSpec::preset_by_name("table1-motor5").is_err());
    }

    #[test]
    fn overlap_examples() {
        let s = MotorSpec::preset(Topology::Motor1);
        assert_eq!(overlap_arc(0.0, 8.4, &s), 8.4);
        assert_eq!(overlap_arc(20.0, 8.4, &s), 8.4);
        assert!((overlap_arc(6.6, 8.4, &s) - 2.0).abs() < 1e-12);
        // the wide tooth faces two rotor poles around the half pitch
        assert!((overlap_arc(10.0, 11.9, &s) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn reduce_angle_range() {
        assert_eq!(reduce_angle(10.0, 20.0), -10.0);
        assert!((reduce_angle(-30.5, 20.0) - (-10.5 + 20.0)).abs() < 1e-12);
    }

    #[test]
    fn topology_parsing() {
        assert_eq!("Motor3".parse::<Topology>().unwrap(), Topology::Motor3);
        assert_eq!("4".parse::<Topology>().unwrap(), Topology::Motor4);
        assert_eq!("table1-motor2".parse::<Topology>().unwrap(), Topology::Motor2);
        assert!("motor0".parse::<Topology>().is_err());
    }

    #[test]
    fn pm_volume_per_topology() {
        assert_eq!(MotorSpec::preset(Topology::Motor1).pm_volume(), 0.0);
        assert!((MotorSpec::preset(Topology::Motor2).pm_volume() - 0.002).abs() < 1e-15);
        assert!((MotorSpec::preset(Topology::Motor4).pm_volume() - 0.006).abs() < 1e-15);
    }
}
