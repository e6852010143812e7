//! Magnetic equivalent circuits: network construction, nodal solution and the
//! closed-form linear fluxes.
//!
//! The full network models one periodic cell of the stator ring: a C-core of
//! each phase with both poles, both teeth per pole, the rotor poles beneath
//! every tooth, the rotor back iron and the magnets. Magnets of set 2 sit
//! between the outer teeth of neighbouring C-cores, so their flux has to pass
//! through the neighbour's teeth and air gap as well.

mod closed_form;
mod solve;

use serde::Serialize;

pub use closed_form::{
    build_lumped_network, check_dominance, solve_closed_form, DominanceRatios, DominanceReport, LumpedReluctances,
    DOMINANCE_THRESHOLD,
};
pub use solve::{solve_network, solve_network_with, Scheme, SolveOptions};

use crate::error::{Result, SrmError};
use crate::geometry::{airgap_reluctance, overlap_arc, IronGeometry, IronPath, MotorSpec, WidenedTooth};
use crate::materials::BhCurve;
use crate::MU0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum Phase {
    A,
    B,
}

impl Phase {
    pub fn other(self) -> Phase {
        match self {
            Phase::A => Phase::B,
            Phase::B => Phase::A,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Phase::A => 'A',
            Phase::B => 'B',
        }
    }

    fn core(self) -> usize {
        match self {
            Phase::A => 0,
            Phase::B => 1,
        }
    }
}

impl std::str::FromStr for Phase {
    type Err = SrmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Phase::A),
            "B" | "b" => Ok(Phase::B),
            other => Err(SrmError::InvalidPhase(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Linear,
    #[default]
    Saturable,
}

impl std::str::FromStr for Mode {
    type Err = SrmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Mode::Linear),
            "saturable" => Ok(Mode::Saturable),
            other => Err(SrmError::InvalidArgument(format!("unknown mode `{other}` (expected linear or saturable)"))),
        }
    }
}

/// How a magnet enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum MagnetModel {
    /// MMF `H_c * l` behind its recoil reluctance.
    #[default]
    Thevenin,
    /// Constant flux `F / R`, the limit where the magnet reluctance dominates.
    IdealFlux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SourceGroup {
    Passive,
    Winding,
    Pm1,
    Pm2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Element {
    Linear { reluctance: f64 },
    Saturable { length: f64, area: f64 },
    FluxSource { flux: f64 },
}

/// Flux is positive from `from` to `to`:
/// `phi = (u_from - u_to + mmf) / R` for reluctance elements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub element: Element,
    pub mmf: f64,
    pub group: SourceGroup,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub theta: f64,
    pub current: f64,
    pub phase: Phase,
}

/// Branches read back into the summary fluxes of a solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probes {
    pub stator_yoke: usize,
    pub stator_pole: usize,
    /// Gap branches under the first pole of the excited C-core, oriented stator to rotor.
    pub gap: Vec<usize>,
    /// Branches delivering flux into the rotor under that pole.
    pub rotor: Vec<usize>,
    pub pm1: Option<usize>,
    pub pm2: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MecNetwork {
    pub nodes: Vec<String>,
    pub branches: Vec<Branch>,
    /// Node held at zero potential.
    pub ground: usize,
    pub mode: Mode,
    #[serde(skip)]
    pub bh: BhCurve,
    pub operating_point: OperatingPoint,
    pub probes: Probes,
    /// Lumped reluctances of the excited loop at this operating point, linear iron.
    pub lumped: LumpedReluctances,
}

impl MecNetwork {
    pub fn reluctance(&self, k: usize) -> Option<f64> {
        match self.branches[k].element {
            Element::Linear { reluctance } => Some(reluctance),
            Element::Saturable { length, area } => Some(length / (self.bh.initial_permeability() * area)),
            Element::FluxSource { .. } => None,
        }
    }
}

/// Per-source contribution to the summary fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FluxTriple {
    pub phi_sy: f64,
    pub phi_sp: f64,
    pub phi_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Decomposition {
    /// Winding MMF alone.
    pub phi_prime: FluxTriple,
    /// Magnet set 1 alone.
    pub phi_dprime: FluxTriple,
    /// Magnet set 2 alone.
    pub phi_tprime: FluxTriple,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxSolution {
    pub phi_sy: f64,
    pub phi_sp: f64,
    pub phi_ry: f64,
    pub phi_g: f64,
    pub phi_pm1: f64,
    pub phi_pm2: f64,
    pub decomposition: Decomposition,
    pub r_star: f64,
    pub iterations: usize,
    /// Largest node flux imbalance relative to the largest branch flux.
    pub residual: f64,
    pub branch_flux: Vec<f64>,
    pub potentials: Vec<f64>,
}

impl FluxSolution {
    /// True when any magnet branch carries flux against its magnetization.
    pub fn pm_flux_reversed(&self, net: &MecNetwork) -> bool {
        net.branches
            .iter()
            .zip(&self.branch_flux)
            .any(|(b, &phi)| matches!(b.group, SourceGroup::Pm1 | SourceGroup::Pm2) && phi < 0.0)
    }
}

struct Builder<'a> {
    spec: &'a MotorSpec,
    mode: Mode,
    bh: &'a BhCurve,
    nodes: Vec<String>,
    branches: Vec<Branch>,
}

impl Builder<'_> {
    fn node(&mut self, name: String) -> usize {
        self.nodes.push(name);
        self.nodes.len() - 1
    }

    fn push(&mut self, from: usize, to: usize, element: Element, mmf: f64, group: SourceGroup, label: String) -> usize {
        self.branches.push(Branch {
            from,
            to,
            element,
            mmf,
            group,
            label,
        });
        self.branches.len() - 1
    }

    fn iron(&mut self, from: usize, to: usize, path: IronPath, mmf: f64, group: SourceGroup, label: String) -> usize {
        let element = match self.mode {
            Mode::Saturable => Element::Saturable {
                length: path.length,
                area: path.area,
            },
            Mode::Linear => Element::Linear {
                reluctance: path.length / (self.bh.initial_permeability() * path.area),
            },
        };
        self.push(from, to, element, mmf, group, label)
    }

    fn magnet(&mut self, from: usize, to: usize, length_mm: f64, model: MagnetModel, group: SourceGroup, label: String) -> usize {
        let (mmf, r) = magnet_source(self.spec, length_mm);
        match model {
            MagnetModel::Thevenin => self.push(from, to, Element::Linear { reluctance: r }, mmf, group, label),
            MagnetModel::IdealFlux => self.push(from, to, Element::FluxSource { flux: mmf / r }, 0.0, group, label),
        }
    }
}

/// Magnet MMF `H_c * l` and recoil reluctance `l / (mu0 * mu_rec * W_PM * L)`.
pub fn magnet_source(spec: &MotorSpec, length_mm: f64) -> (f64, f64) {
    let l = length_mm * 1e-3;
    let area = spec.W_PM * spec.L_stack * 1e-6;
    let pm = &spec.pm_material;
    (pm.h_c * l, l / (MU0 * pm.mu_rec * area))
}

/// Rotor displacement of the narrow and widened teeth of a phase's C-core.
pub(crate) fn tooth_displacements(spec: &MotorSpec, theta: f64, phase: Phase) -> (f64, f64) {
    let d = theta + phase.core() as f64 * spec.half_pitch();
    (d, d + spec.a_ext / 2.0)
}

/// Build the periodic two-C-core network with Thevenin magnets.
pub fn build_network(spec: &MotorSpec, theta: f64, i: f64, phase: Phase, mode: Mode) -> Result<MecNetwork> {
    build_network_with(spec, theta, i, phase, mode, MagnetModel::Thevenin)
}

pub fn build_network_with(
    spec: &MotorSpec,
    theta: f64,
    i: f64,
    phase: Phase,
    mode: Mode,
    magnets: MagnetModel,
) -> Result<MecNetwork> {
    let geo = IronGeometry::new(spec)?;
    let (inner_arc, outer_arc) = spec.tooth_arcs();
    let wide_is_outer = spec.widened_tooth == WidenedTooth::Outer;
    let f_e = spec.N_pole as f64 * i;
    let mut b = Builder {
        spec,
        mode,
        bh: &spec.lamination,
        nodes: Vec::new(),
        branches: Vec::new(),
    };

    struct Core {
        r1: usize,
        r2: usize,
        k_in: [usize; 2],
        k_out: [usize; 2],
        yoke: usize,
        pole1: usize,
        gaps1: Vec<usize>,
        rotor1: Vec<usize>,
    }

    let mut cores = Vec::with_capacity(2);
    for c in 0..2 {
        let name = if c == 0 { 'A' } else { 'B' };
        let core_phase = if c == 0 { Phase::A } else { Phase::B };
        let mmf = if core_phase == phase { f_e } else { 0.0 };
        let (d_narrow, d_wide) = tooth_displacements(spec, theta, core_phase);
        let (d_inner, d_outer) = if wide_is_outer { (d_narrow, d_wide) } else { (d_wide, d_narrow) };

        let r1 = b.node(format!("{name}.rotor1"));
        let r2 = b.node(format!("{name}.rotor2"));
        let y1 = b.node(format!("{name}.yoke1"));
        let y2 = b.node(format!("{name}.yoke2"));
        let p1 = b.node(format!("{name}.pole1"));
        let p2 = b.node(format!("{name}.pole2"));
        let pole1 = b.iron(y1, p1, geo.stator_pole, mmf, SourceGroup::Winding, format!("{name}.pole1"));
        b.iron(p2, y2, geo.stator_pole, mmf, SourceGroup::Winding, format!("{name}.pole2"));
        let yoke = b.iron(y2, y1, geo.stator_yoke, 0.0, SourceGroup::Passive, format!("{name}.yoke"));
        b.iron(r1, r2, geo.rotor_yoke, 0.0, SourceGroup::Passive, format!("{name}.rotor_yoke"));

        let mut k_in = [0; 2];
        let mut k_out = [0; 2];
        let mut gaps1 = Vec::new();
        let mut rotor1 = Vec::new();
        for (pole, p_node, r_node) in [(1usize, p1, r1), (2, p2, r2)] {
            for (tooth, arc, disp, path) in [
                ("in", inner_arc, d_inner, geo.tooth_inner),
                ("out", outer_arc, d_outer, geo.tooth_outer),
            ] {
                let tag = format!("{name}.p{pole}.{tooth}");
                let j = b.node(format!("{tag}.root"));
                let k = b.node(format!("{tag}.face"));
                let rp = b.node(format!("{tag}.rotor_pole"));
                let r_gap = airgap_reluctance(overlap_arc(disp, arc, spec), arc, spec)?;
                let gap_el = Element::Linear { reluctance: r_gap };
                if pole == 1 {
                    b.iron(p_node, j, geo.tooth_yoke, 0.0, SourceGroup::Passive, format!("{tag}.tooth_yoke"));
                    b.iron(j, k, path, 0.0, SourceGroup::Passive, format!("{tag}.tooth"));
                    let g = b.push(k, rp, gap_el, 0.0, SourceGroup::Passive, format!("{tag}.gap"));
                    let rb = b.iron(rp, r_node, geo.rotor_pole, 0.0, SourceGroup::Passive, format!("{tag}.rotor_pole"));
                    gaps1.push(g);
                    rotor1.push(rb);
                } else {
                    b.iron(r_node, rp, geo.rotor_pole, 0.0, SourceGroup::Passive, format!("{tag}.rotor_pole"));
                    b.push(rp, k, gap_el, 0.0, SourceGroup::Passive, format!("{tag}.gap"));
                    b.iron(k, j, path, 0.0, SourceGroup::Passive, format!("{tag}.tooth"));
                    b.iron(j, p_node, geo.tooth_yoke, 0.0, SourceGroup::Passive, format!("{tag}.tooth_yoke"));
                }
                if tooth == "in" {
                    k_in[pole - 1] = k;
                } else {
                    k_out[pole - 1] = k;
                }
            }
        }
        cores.push(Core {
            r1,
            r2,
            k_in,
            k_out,
            yoke,
            pole1,
            gaps1,
            rotor1,
        });
    }

    for (c, next) in [(0usize, 1usize), (1, 0)] {
        let name = if c == 0 { 'A' } else { 'B' };
        let (from, to) = (cores[c].r2, cores[next].r1);
        b.iron(from, to, geo.rotor_link, 0.0, SourceGroup::Passive, format!("{name}.rotor_link"));
    }

    let top = spec.topology_id;
    let mut pm1 = [None, None];
    let mut pm2 = [None, None];
    for (c, core) in cores.iter().enumerate() {
        let name = if c == 0 { 'A' } else { 'B' };
        if top.has_pm1() {
            pm1[c] = Some(b.magnet(core.k_in[1], core.k_in[0], spec.l_PM1, magnets, SourceGroup::Pm1, format!("{name}.pm1")));
        }
    }
    if top.has_pm2() {
        // magnet ending on core c's first-pole outer tooth, fed from the neighbour's second pole
        for (c, prev) in [(0usize, 1usize), (1, 0)] {
            let name = if c == 0 { 'A' } else { 'B' };
            let from = cores[prev].k_out[1];
            let to = cores[c].k_out[0];
            pm2[c] = Some(b.magnet(from, to, spec.l_PM2, magnets, SourceGroup::Pm2, format!("{name}.pm2")));
        }
    }

    let e = phase.core();
    let probes = Probes {
        stator_yoke: cores[e].yoke,
        stator_pole: cores[e].pole1,
        gap: cores[e].gaps1.clone(),
        rotor: cores[e].rotor1.clone(),
        pm1: pm1[e],
        pm2: pm2[e],
    };
    let ground = cores[0].r1;
    let lumped = LumpedReluctances::new(spec, theta, i, phase)?;
    Ok(MecNetwork {
        nodes: b.nodes,
        branches: b.branches,
        ground,
        mode,
        bh: spec.lamination.clone(),
        operating_point: OperatingPoint {
            theta,
            current: i,
            phase,
        },
        probes,
        lumped,
    })
}

/// Phase flux linkage, Wb-turns: every coil of the phase carries the pole flux
/// of its C-core and the coils are connected in series.
pub fn flux_linkage(spec: &MotorSpec, theta: f64, i: f64, phase: Phase, mode: Mode) -> Result<f64> {
    let net = build_network(spec, theta, i, phase, mode)?;
    let sol = solve_network(&net)?;
    Ok(spec.turns_per_phase() * sol.phi_sp)
}

/// JSON debug dump of a solved network.
pub fn debug_dump(net: &MecNetwork, sol: &FluxSolution) -> serde_json::Value {
    let branches: Vec<_> = net
        .branches
        .iter()
        .enumerate()
        .map(|(k, b)| {
            serde_json::json!({
                "label": b.label,
                "from": net.nodes[b.from],
                "to": net.nodes[b.to],
                "element": b.element,
                "reluctance_linear": net.reluctance(k),
                "mmf": b.mmf,
                "group": b.group,
                "flux": sol.branch_flux[k],
            })
        })
        .collect();
    serde_json::json!({
        "operating_point": net.operating_point,
        "mode": net.mode,
        "nodes": net.nodes,
        "ground": net.nodes[net.ground],
        "branches": branches,
        "potentials": sol.potentials,
        "summary": {
            "phi_sy": sol.phi_sy,
            "phi_sp": sol.phi_sp,
            "phi_ry": sol.phi_ry,
            "phi_g": sol.phi_g,
            "phi_pm1": sol.phi_pm1,
            "phi_pm2": sol.phi_pm2,
            "R_star": sol.r_star,
            "decomposition": sol.decomposition,
        },
        "iterations": sol.iterations,
        "residual": sol.residual,
        "pm_flux_reversed": sol.pm_flux_reversed(net),
    })
}
