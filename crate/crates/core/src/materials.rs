//! Lamination and magnet material models.
//!
//! The lamination is a piecewise-linear B-H curve through tabulated
//! `(H, B)` points, odd-symmetric about the origin, extended beyond its last
//! point with slope `mu0`. Magnets are linear recoil-line sources.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrmError};
use crate::MU0;

pub const M19_24G: &str = "M19-24G";
pub const NDFEB_N35: &str = "NdFeB-N35";

/// Bundled 12-point M19-24G curve, `(H [A/m], B [T])`, knee at 1.9 T.
const M19_24G_POINTS: [(f64, f64); 12] = [
    (0.0, 0.0),
    (40.0, 0.4),
    (80.0, 0.8),
    (120.0, 1.1),
    (180.0, 1.35),
    (300.0, 1.55),
    (600.0, 1.7),
    (1500.0, 1.8),
    (4000.0, 1.9),
    (15000.0, 2.0),
    (50000.0, 2.1),
    (150000.0, 2.25),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BhCurveRepr")]
pub struct BhCurve {
    pub name: String,
    /// `(H [A/m], B [T])`, strictly increasing in both coordinates, starting at the origin.
    pub points: Vec<(f64, f64)>,
    #[serde(rename = "knee_B")]
    pub knee_b: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BhCurveRepr {
    Named(String),
    Inline {
        #[serde(default)]
        name: Option<String>,
        points: Vec<(f64, f64)>,
        #[serde(rename = "knee_B", alias = "knee_b")]
        knee_b: f64,
    },
}

impl TryFrom<BhCurveRepr> for BhCurve {
    type Error = SrmError;

    fn try_from(repr: BhCurveRepr) -> Result<Self> {
        let curve = match repr {
            BhCurveRepr::Named(name) => BhCurve::by_name(&name)?,
            BhCurveRepr::Inline { name, points, knee_b } => BhCurve {
                name: name.unwrap_or_else(|| "custom".to_string()),
                points,
                knee_b,
            },
        };
        curve.validate()?;
        Ok(curve)
    }
}

impl BhCurve {
    pub fn m19_24g() -> Self {
        BhCurve {
            name: M19_24G.to_string(),
            points: M19_24G_POINTS.to_vec(),
            knee_b: 1.9,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        if name.eq_ignore_ascii_case(M19_24G) {
            Ok(Self::m19_24g())
        } else {
            Err(SrmError::UnknownMaterial(name.to_string()))
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pts = &self.points;
        if pts.len() < 2 {
            return Err(SrmError::invalid("lamination", "B-H curve needs at least two points", pts.len()));
        }
        if pts[0] != (0.0, 0.0) {
            return Err(SrmError::invalid(
                "lamination",
                "B-H curve must start at (0, 0)",
                format!("{:?}", pts[0]),
            ));
        }
        for w in pts.windows(2) {
            let ((h0, b0), (h1, b1)) = (w[0], w[1]);
            if !(h1 > h0 && b1 > b0) || !h1.is_finite() || !b1.is_finite() {
                return Err(SrmError::invalid(
                    "lamination",
                    "B-H points must be strictly increasing in H and B",
                    format!("({h0}, {b0}) -> ({h1}, {b1})"),
                ));
            }
        }
        if !(self.knee_b > 0.0) {
            return Err(SrmError::invalid("lamination", "knee_B must be positive", self.knee_b));
        }
        Ok(())
    }

    /// Slope of the first segment, used as the linear-mode iron permeability.
    pub fn initial_permeability(&self) -> f64 {
        let (h, b) = self.points[1];
        b / h
    }

    /// Field intensity for a flux density magnitude (odd-symmetric).
    pub fn h_of_b(&self, b: f64) -> f64 {
        let mag = b.abs();
        let pts = &self.points;
        let (h_last, b_last) = pts[pts.len() - 1];
        let h = if mag >= b_last {
            h_last + (mag - b_last) / MU0
        } else {
            let k = pts.partition_point(|&(_, pb)| pb <= mag).max(1) - 1;
            let (h0, b0) = pts[k];
            let (h1, b1) = pts[k + 1];
            h0 + (mag - b0) * (h1 - h0) / (b1 - b0)
        };
        h.copysign(b)
    }

    /// Flux density and differential permeability `dB/dH` at field `h`.
    pub fn b_of_h(&self, h: f64) -> (f64, f64) {
        let mag = h.abs();
        let pts = &self.points;
        let (h_last, b_last) = pts[pts.len() - 1];
        if mag >= h_last {
            return ((b_last + MU0 * (mag - h_last)).copysign(h), MU0);
        }
        let k = pts.partition_point(|&(ph, _)| ph <= mag).max(1) - 1;
        let (h0, b0) = pts[k];
        let (h1, b1) = pts[k + 1];
        let slope = (b1 - b0) / (h1 - h0);
        ((b0 + (mag - h0) * slope).copysign(h), slope)
    }

    /// Secant permeability `B/H`; the initial slope at `B = 0`.
    pub fn secant_permeability(&self, b: f64) -> f64 {
        let mag = b.abs();
        if mag < 1e-12 {
            return self.initial_permeability();
        }
        mag / self.h_of_b(mag)
    }
}

impl Default for BhCurve {
    fn default() -> Self {
        Self::m19_24g()
    }
}

/// Linear permanent-magnet material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmSpecRepr")]
pub struct PmSpec {
    pub name: String,
    /// Remanence, T.
    #[serde(rename = "B_r")]
    pub b_r: f64,
    /// Coercivity, A/m.
    #[serde(rename = "H_c")]
    pub h_c: f64,
    /// Relative recoil permeability.
    pub mu_rec: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PmSpecRepr {
    Named(String),
    Inline {
        #[serde(default)]
        name: Option<String>,
        #[serde(rename = "B_r", alias = "b_r")]
        b_r: f64,
        #[serde(rename = "H_c", alias = "h_c")]
        h_c: f64,
        mu_rec: f64,
    },
}

impl TryFrom<PmSpecRepr> for PmSpec {
    type Error = SrmError;

    fn try_from(repr: PmSpecRepr) -> Result<Self> {
        let pm = match repr {
            PmSpecRepr::Named(name) => PmSpec::by_name(&name)?,
            PmSpecRepr::Inline { name, b_r, h_c, mu_rec } => PmSpec {
                name: name.unwrap_or_else(|| "custom".to_string()),
                b_r,
                h_c,
                mu_rec,
            },
        };
        pm.validate()?;
        Ok(pm)
    }
}

impl PmSpec {
    /// Representative N35 datasheet values; configuration, not measured data.
    pub fn ndfeb_n35() -> Self {
        PmSpec {
            name: NDFEB_N35.to_string(),
            b_r: 1.20,
            h_c: 900e3,
            mu_rec: 1.05,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        if name.eq_ignore_ascii_case(NDFEB_N35) {
            Ok(Self::ndfeb_n35())
        } else {
            Err(SrmError::UnknownMaterial(name.to_string()))
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("pm_material.B_r", self.b_r), ("pm_material.H_c", self.h_c), ("pm_material.mu_rec", self.mu_rec)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SrmError::invalid(
                    if field.ends_with("B_r") {
                        "pm_material.B_r"
                    } else if field.ends_with("H_c") {
                        "pm_material.H_c"
                    } else {
                        "pm_material.mu_rec"
                    },
                    "must be positive",
                    v,
                ));
            }
        }
        let recoil = MU0 * self.mu_rec * self.h_c;
        if (self.b_r - recoil).abs() > 0.10 * self.b_r {
            return Err(SrmError::invalid(
                "pm_material.B_r",
                format!("remanence must be within 10% of mu0*mu_rec*H_c = {recoil:.4} T"),
                self.b_r,
            ));
        }
        Ok(())
    }
}

impl Default for PmSpec {
    fn default() -> Self {
        Self::ndfeb_n35()
    }
}
