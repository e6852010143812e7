//! Lumped single-loop reluctances and the closed-form linear fluxes.
//!
//! The lumped loop collapses the C-core into two nodes: the stator side
//! (`2R_sp + R_sy` carrying `2F_e`) and the rotor side (`2R_g + R_ry`), with
//! both magnet sets bridging them. With magnets as ideal flux sources the
//! closed form below is the exact solution of that loop.

use serde::Serialize;

use super::{
    magnet_source, tooth_displacements, Branch, Decomposition, Element, FluxSolution, FluxTriple, MagnetModel,
    MecNetwork, Mode, OperatingPoint, Phase, Probes, SourceGroup,
};
use crate::error::{Result, SrmError};
use crate::geometry::{airgap_reluctance, overlap_arc, IronGeometry, IronPath, MotorSpec, WidenedTooth};

pub const DOMINANCE_THRESHOLD: f64 = 10.0;

/// Reluctances (A/Wb) and MMFs (A-turns) of the excited C-core loop with linear iron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LumpedReluctances {
    pub r_sy: f64,
    /// One pole: pole body plus the two tooth-yoke halves in parallel.
    pub r_sp: f64,
    /// One pole face: the two tooth paths (tooth, gap, rotor pole) in parallel.
    pub r_g: f64,
    pub r_ry: f64,
    pub r_pm1: Option<f64>,
    pub r_pm2: Option<f64>,
    pub f_e: f64,
    pub f_pm1: f64,
    pub f_pm2: f64,
}

impl LumpedReluctances {
    pub fn new(spec: &MotorSpec, theta: f64, i: f64, phase: Phase) -> Result<Self> {
        let geo = IronGeometry::new(spec)?;
        let mu = spec.lamination.initial_permeability();
        let iron = |p: IronPath| p.length / (mu * p.area);
        let (inner_arc, outer_arc) = spec.tooth_arcs();
        let (d_narrow, d_wide) = tooth_displacements(spec, theta, phase);
        let (d_inner, d_outer) = match spec.widened_tooth {
            WidenedTooth::Outer => (d_narrow, d_wide),
            WidenedTooth::Inner => (d_wide, d_narrow),
        };
        let tooth_path = |arc: f64, disp: f64, path: IronPath| -> Result<f64> {
            Ok(iron(path) + airgap_reluctance(overlap_arc(disp, arc, spec), arc, spec)? + iron(geo.rotor_pole))
        };
        let a = tooth_path(inner_arc, d_inner, geo.tooth_inner)?;
        let b = tooth_path(outer_arc, d_outer, geo.tooth_outer)?;
        let top = spec.topology_id;
        let (f1, r1) = magnet_source(spec, spec.l_PM1);
        let (f2, r2) = magnet_source(spec, spec.l_PM2);
        Ok(LumpedReluctances {
            r_sy: iron(geo.stator_yoke),
            r_sp: iron(geo.stator_pole) + iron(geo.tooth_yoke) / 2.0,
            r_g: a * b / (a + b),
            r_ry: iron(geo.rotor_yoke),
            r_pm1: top.has_pm1().then_some(r1),
            r_pm2: top.has_pm2().then_some(r2),
            f_e: spec.N_pole as f64 * i,
            f_pm1: if top.has_pm1() { f1 } else { 0.0 },
            f_pm2: if top.has_pm2() { f2 } else { 0.0 },
        })
    }

    pub fn stator_loop(&self) -> f64 {
        2.0 * self.r_sp + self.r_sy
    }

    pub fn rotor_loop(&self) -> f64 {
        2.0 * self.r_g + self.r_ry
    }

    pub fn r_star(&self) -> f64 {
        self.rotor_loop() + self.stator_loop()
    }
}

/// Two-node network of the lumped loop. The rotor-side node is grounded.
pub fn build_lumped_network(spec: &MotorSpec, theta: f64, i: f64, phase: Phase, magnets: MagnetModel) -> Result<MecNetwork> {
    let lumped = LumpedReluctances::new(spec, theta, i, phase)?;
    let (rotor, stator) = (0, 1);
    let mut branches = vec![
        Branch {
            from: rotor,
            to: stator,
            element: Element::Linear {
                reluctance: lumped.stator_loop(),
            },
            mmf: 2.0 * lumped.f_e,
            group: SourceGroup::Winding,
            label: "stator".into(),
        },
        Branch {
            from: stator,
            to: rotor,
            element: Element::Linear {
                reluctance: lumped.rotor_loop(),
            },
            mmf: 0.0,
            group: SourceGroup::Passive,
            label: "gap_rotor".into(),
        },
    ];
    let mut magnet = |r: Option<f64>, f: f64, scale: f64, group: SourceGroup, label: &str| {
        r.map(|r| {
            let (mmf, r) = (scale * f, scale * r);
            let element = match magnets {
                MagnetModel::Thevenin => Element::Linear { reluctance: r },
                MagnetModel::IdealFlux => Element::FluxSource { flux: mmf / r },
            };
            branches.push(Branch {
                from: rotor,
                to: stator,
                element,
                mmf: if magnets == MagnetModel::Thevenin { mmf } else { 0.0 },
                group,
                label: label.into(),
            });
            branches.len() - 1
        })
    };
    let pm1 = magnet(lumped.r_pm1, lumped.f_pm1, 1.0, SourceGroup::Pm1, "pm1");
    let pm2 = magnet(lumped.r_pm2, lumped.f_pm2, 2.0, SourceGroup::Pm2, "pm2");
    Ok(MecNetwork {
        nodes: vec!["rotor".into(), "stator".into()],
        branches,
        ground: rotor,
        mode: Mode::Linear,
        bh: spec.lamination.clone(),
        operating_point: OperatingPoint { theta, current: i, phase },
        probes: Probes {
            stator_yoke: 0,
            stator_pole: 0,
            gap: vec![1],
            rotor: vec![1],
            pm1,
            pm2,
        },
        lumped,
    })
}

/// Closed-form fluxes of the lumped loop with the magnet reluctances dominating.
pub fn solve_closed_form(spec: &MotorSpec, theta: f64, i: f64, phase: Phase, mode: Mode) -> Result<FluxSolution> {
    if mode != Mode::Linear {
        return Err(SrmError::ClosedFormNeedsLinear);
    }
    let l = LumpedReluctances::new(spec, theta, i, phase)?;
    let r_star = l.r_star();
    let (rs, rr) = (l.stator_loop(), l.rotor_loop());
    let winding = 2.0 * l.f_e / r_star;
    let pm_term = |r: Option<f64>, f: f64| {
        r.map_or(FluxTriple::default(), |r| {
            let sy = -rr / (r * r_star) * f;
            FluxTriple {
                phi_sy: sy,
                phi_sp: sy,
                phi_g: rs / (r * r_star) * f,
            }
        })
    };
    let decomposition = Decomposition {
        phi_prime: FluxTriple {
            phi_sy: winding,
            phi_sp: winding,
            phi_g: winding,
        },
        phi_dprime: pm_term(l.r_pm1, l.f_pm1),
        phi_tprime: pm_term(l.r_pm2, l.f_pm2),
    };
    let d = &decomposition;
    let phi_sy = d.phi_prime.phi_sy + d.phi_dprime.phi_sy + d.phi_tprime.phi_sy;
    let phi_g = d.phi_prime.phi_g + d.phi_dprime.phi_g + d.phi_tprime.phi_g;
    Ok(FluxSolution {
        phi_sy,
        phi_sp: phi_sy,
        phi_ry: phi_g,
        phi_g,
        phi_pm1: l.r_pm1.map_or(0.0, |r| l.f_pm1 / r),
        phi_pm2: l.r_pm2.map_or(0.0, |r| l.f_pm2 / r),
        decomposition,
        r_star,
        iterations: 0,
        residual: 0.0,
        branch_flux: Vec::new(),
        potentials: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominanceRatios {
    /// `R_PM / (2R_sp + R_sy)`
    pub vs_stator: f64,
    /// `R_PM / (2R_g + R_ry)`
    pub vs_rotor: f64,
    /// `R_PM / ((2R_sp + R_sy) || (2R_g + R_ry))`
    pub vs_parallel: f64,
}

impl DominanceRatios {
    fn new(r_pm: f64, l: &LumpedReluctances) -> Self {
        let (s, r) = (l.stator_loop(), l.rotor_loop());
        DominanceRatios {
            vs_stator: r_pm / s,
            vs_rotor: r_pm / r,
            vs_parallel: r_pm / (s * r / (s + r)),
        }
    }

    fn min(&self) -> f64 {
        self.vs_stator.min(self.vs_rotor).min(self.vs_parallel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominanceReport {
    pub pm1: Option<DominanceRatios>,
    pub pm2: Option<DominanceRatios>,
    pub threshold: f64,
    pub pass: bool,
}

/// How strongly the magnet reluctances dominate the iron and gap paths.
pub fn check_dominance(net: &MecNetwork) -> DominanceReport {
    let l = &net.lumped;
    let pm1 = l.r_pm1.map(|r| DominanceRatios::new(r, l));
    let pm2 = l.r_pm2.map(|r| DominanceRatios::new(r, l));
    let pass = [pm1, pm2].iter().flatten().all(|d| d.min() >= DOMINANCE_THRESHOLD);
    DominanceReport {
        pm1,
        pm2,
        threshold: DOMINANCE_THRESHOLD,
        pass,
    }
}
