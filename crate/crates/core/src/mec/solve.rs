//! Nodal magnetic-scalar-potential solver.
//!
//! Saturable networks are solved with a damped Newton iteration on the node
//! potentials, starting from zero every call so results do not depend on call
//! history. The relaxed secant-permeability fixed point is kept as an
//! alternative scheme.

use nalgebra::{DMatrix, DVector};

use super::{Decomposition, Element, FluxSolution, FluxTriple, MecNetwork, SourceGroup};
use crate::error::{Result, SrmError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Newton,
    FixedPoint { relaxation: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub scheme: Scheme,
    /// Relative tolerance on the largest branch-flux change between iterations.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            scheme: Scheme::Newton,
            tolerance: 1e-6,
            max_iterations: 200,
        }
    }
}

pub fn solve_network(net: &MecNetwork) -> Result<FluxSolution> {
    solve_network_with(net, &SolveOptions::default())
}

pub fn solve_network_with(net: &MecNetwork, opts: &SolveOptions) -> Result<FluxSolution> {
    check_connected(net)?;
    let saturable = net.branches.iter().any(|b| matches!(b.element, Element::Saturable { .. }));
    let (potentials, iterations) = if !saturable {
        let r: Vec<f64> = net.branches.iter().map(|b| linear_reluctance(b.element)).collect();
        (solve_linear(net, &r, |_| true)?, 1)
    } else {
        match opts.scheme {
            Scheme::Newton => newton(net, opts)?,
            Scheme::FixedPoint { relaxation } => fixed_point(net, opts, relaxation)?,
        }
    };
    let flux: Vec<f64> = net
        .branches
        .iter()
        .map(|b| branch_flux(net, b.element, b.mmf + potentials[b.from] - potentials[b.to]).0)
        .collect();

    // Superposition on the secant (frozen) permeabilities of the solved state.
    let frozen: Vec<f64> = net
        .branches
        .iter()
        .zip(&flux)
        .map(|(b, &phi)| match b.element {
            Element::Saturable { length, area } => length / (net.bh.secant_permeability(phi / area) * area),
            other => linear_reluctance(other),
        })
        .collect();
    let mut decomposition = Decomposition::default();
    for (group, slot) in [
        (SourceGroup::Winding, &mut decomposition.phi_prime),
        (SourceGroup::Pm1, &mut decomposition.phi_dprime),
        (SourceGroup::Pm2, &mut decomposition.phi_tprime),
    ] {
        if !net.branches.iter().any(|b| b.group == group) {
            continue;
        }
        let u = solve_linear(net, &frozen, |g| g == group)?;
        let part: Vec<f64> = net
            .branches
            .iter()
            .zip(&frozen)
            .map(|(b, &r)| source_flux(b, r, &u, |g| g == group))
            .collect();
        *slot = triple(net, &part);
    }

    let summary = triple(net, &flux);
    let phi_ry = net.probes.rotor.iter().map(|&k| flux[k]).sum();
    let residual = node_residual(net, &flux);
    Ok(FluxSolution {
        phi_sy: summary.phi_sy,
        phi_sp: summary.phi_sp,
        phi_ry,
        phi_g: summary.phi_g,
        phi_pm1: net.probes.pm1.map_or(0.0, |k| flux[k]),
        phi_pm2: net.probes.pm2.map_or(0.0, |k| flux[k]),
        decomposition,
        r_star: net.lumped.r_star(),
        iterations,
        residual,
        branch_flux: flux,
        potentials,
    })
}

fn triple(net: &MecNetwork, flux: &[f64]) -> FluxTriple {
    FluxTriple {
        phi_sy: flux[net.probes.stator_yoke],
        phi_sp: flux[net.probes.stator_pole],
        phi_g: net.probes.gap.iter().map(|&k| flux[k]).sum(),
    }
}

fn linear_reluctance(element: Element) -> f64 {
    match element {
        Element::Linear { reluctance } => reluctance,
        _ => f64::INFINITY,
    }
}

/// Flux and its derivative with respect to the branch MMF drop.
fn branch_flux(net: &MecNetwork, element: Element, drop: f64) -> (f64, f64) {
    match element {
        Element::Linear { reluctance } => (drop / reluctance, 1.0 / reluctance),
        Element::Saturable { length, area } => {
            let (b, mu) = net.bh.b_of_h(drop / length);
            (area * b, area * mu / length)
        }
        Element::FluxSource { flux } => (flux, 0.0),
    }
}

/// Branch flux in a linear network where only sources passing `active` are on.
fn source_flux(b: &super::Branch, r: f64, u: &[f64], active: impl Fn(SourceGroup) -> bool) -> f64 {
    let on = active(b.group);
    match b.element {
        Element::FluxSource { flux } => {
            if on {
                flux
            } else {
                0.0
            }
        }
        _ => {
            let mmf = if on { b.mmf } else { 0.0 };
            (u[b.from] - u[b.to] + mmf) / r
        }
    }
}

fn check_connected(net: &MecNetwork) -> Result<()> {
    let n = net.nodes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for b in &net.branches {
        let ok = match b.element {
            Element::Linear { reluctance } => reluctance > 0.0 && reluctance.is_finite(),
            Element::Saturable { length, area } => length > 0.0 && area > 0.0,
            Element::FluxSource { flux } => {
                if !flux.is_finite() {
                    return Err(SrmError::DegenerateNetwork);
                }
                continue;
            }
        };
        if !ok || b.from >= n || b.to >= n {
            return Err(SrmError::DegenerateNetwork);
        }
        let (x, y) = (find(&mut parent, b.from), find(&mut parent, b.to));
        parent[x] = y;
    }
    let root = find(&mut parent, net.ground);
    if (0..n).all(|k| find(&mut parent, k) == root) {
        Ok(())
    } else {
        Err(SrmError::DegenerateNetwork)
    }
}

/// Index of each node in the reduced (ground-eliminated) system.
fn unknown_index(net: &MecNetwork) -> Vec<Option<usize>> {
    let mut next = 0;
    (0..net.nodes.len())
        .map(|k| {
            if k == net.ground {
                None
            } else {
                next += 1;
                Some(next - 1)
            }
        })
        .collect()
}

/// Linear nodal solve with per-branch reluctances `r`; sources outside `active` are off.
fn solve_linear(net: &MecNetwork, r: &[f64], active: impl Fn(SourceGroup) -> bool) -> Result<Vec<f64>> {
    let idx = unknown_index(net);
    let m = net.nodes.len() - 1;
    let mut g = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (b, &rk) in net.branches.iter().zip(r) {
        let on = active(b.group);
        let (cond, inject) = match b.element {
            Element::FluxSource { flux } => (0.0, if on { flux } else { 0.0 }),
            _ => {
                let c = 1.0 / rk;
                (c, if on { c * b.mmf } else { 0.0 })
            }
        };
        // flux leaving `from`: cond*(u_from - u_to) + inject
        if let Some(i) = idx[b.from] {
            g[(i, i)] += cond;
            rhs[i] -= inject;
            if let Some(j) = idx[b.to] {
                g[(i, j)] -= cond;
            }
        }
        if let Some(j) = idx[b.to] {
            g[(j, j)] += cond;
            rhs[j] += inject;
            if let Some(i) = idx[b.from] {
                g[(j, i)] -= cond;
            }
        }
    }
    let x = g.lu().solve(&rhs).ok_or(SrmError::DegenerateNetwork)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SrmError::DegenerateNetwork);
    }
    Ok(expand(net, &idx, x.as_slice()))
}

fn expand(net: &MecNetwork, idx: &[Option<usize>], x: &[f64]) -> Vec<f64> {
    (0..net.nodes.len()).map(|k| idx[k].map_or(0.0, |i| x[i])).collect()
}

/// Net flux leaving each unknown node, and optionally the Jacobian.
fn residual(net: &MecNetwork, idx: &[Option<usize>], u: &[f64], jac: Option<&mut DMatrix<f64>>) -> (DVector<f64>, Vec<f64>) {
    let m = net.nodes.len() - 1;
    let mut res = DVector::<f64>::zeros(m);
    let mut flux = Vec::with_capacity(net.branches.len());
    let mut jac = jac;
    if let Some(j) = jac.as_deref_mut() {
        j.fill(0.0);
    }
    for b in &net.branches {
        let (phi, dphi) = branch_flux(net, b.element, b.mmf + u[b.from] - u[b.to]);
        flux.push(phi);
        if let Some(i) = idx[b.from] {
            res[i] += phi;
        }
        if let Some(j) = idx[b.to] {
            res[j] -= phi;
        }
        if let Some(jm) = jac.as_deref_mut() {
            if let Some(i) = idx[b.from] {
                jm[(i, i)] += dphi;
                if let Some(j) = idx[b.to] {
                    jm[(i, j)] -= dphi;
                }
            }
            if let Some(j) = idx[b.to] {
                jm[(j, j)] += dphi;
                if let Some(i) = idx[b.from] {
                    jm[(j, i)] -= dphi;
                }
            }
        }
    }
    (res, flux)
}

fn relative_change(old: &[f64], new: &[f64]) -> f64 {
    let scale = new.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let diff = old.iter().zip(new).fold(0.0f64, |a, (o, n)| a.max((o - n).abs()));
    if scale == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / scale
    }
}

fn newton(net: &MecNetwork, opts: &SolveOptions) -> Result<(Vec<f64>, usize)> {
    let idx = unknown_index(net);
    let m = net.nodes.len() - 1;
    let mut u = vec![0.0; net.nodes.len()];
    let mut jac = DMatrix::<f64>::zeros(m, m);
    let (mut res, mut flux) = residual(net, &idx, &u, Some(&mut jac));
    let mut norm = res.norm();
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let step = jac.clone().lu().solve(&(-&res)).ok_or(SrmError::DegenerateNetwork)?;
        let mut t = 1.0;
        let (trial_u, trial_res, trial_flux) = loop {
            let mut trial = u.clone();
            for (k, i) in idx.iter().enumerate() {
                if let Some(i) = *i {
                    trial[k] += t * step[i];
                }
            }
            let (r, f) = residual(net, &idx, &trial, None);
            if r.norm() <= (1.0 - 1e-4 * t) * norm || t < 1e-4 {
                break (trial, r, f);
            }
            t *= 0.5;
        };
        change = relative_change(&flux, &trial_flux);
        u = trial_u;
        flux = trial_flux;
        norm = trial_res.norm();
        if change < opts.tolerance {
            return Ok((u, it));
        }
        let (r, _) = residual(net, &idx, &u, Some(&mut jac));
        res = r;
        if !norm.is_finite() {
            break;
        }
    }
    Err(SrmError::NonConvergence {
        iterations: opts.max_iterations,
        last_change: change,
    })
}

fn fixed_point(net: &MecNetwork, opts: &SolveOptions, relaxation: f64) -> Result<(Vec<f64>, usize)> {
    let mut mu: Vec<f64> = vec![net.bh.initial_permeability(); net.branches.len()];
    let mut flux = vec![0.0; net.branches.len()];
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let r: Vec<f64> = net
            .branches
            .iter()
            .zip(&mu)
            .map(|(b, &m)| match b.element {
                Element::Saturable { length, area } => length / (m * area),
                other => linear_reluctance(other),
            })
            .collect();
        let u = solve_linear(net, &r, |_| true)?;
        let new: Vec<f64> = net
            .branches
            .iter()
            .zip(&r)
            .map(|(b, &rk)| source_flux(b, rk, &u, |_| true))
            .collect();
        change = relative_change(&flux, &new);
        flux = new;
        if it > 1 && change < opts.tolerance {
            return Ok((u, it));
        }
        for ((b, m), &phi) in net.branches.iter().zip(mu.iter_mut()).zip(&flux) {
            if let Element::Saturable { area, .. } = b.element {
                *m = relaxation * *m + (1.0 - relaxation) * net.bh.secant_permeability(phi / area);
            }
        }
    }
    Err(SrmError::NonConvergence {
        iterations: opts.max_iterations,
        last_change: change,
    })
}

fn node_residual(net: &MecNetwork, flux: &[f64]) -> f64 {
    let mut sums = vec![0.0; net.nodes.len()];
    for (b, &phi) in net.branches.iter().zip(flux) {
        sums[b.from] += phi;
        sums[b.to] -= phi;
    }
    let scale = flux.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    sums.iter()
        .enumerate()
        .filter(|&(k, _)| k != net.ground)
        .fold(0.0f64, |a, (_, v)| a.max(v.abs()))
        / scale
}
