//! Damage, energies, crack length and convergence rates.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::Discretization;
use crate::kernel::{bond_strain, ForceLaw, NeighborTable};
use crate::material::PairwisePotential;
use crate::mesh::{check_len, CrackSegment, Mesh};
use crate::scalar::Real;
use crate::vec2::Vec2;

/// Node-to-node bonds within the horizon, crack-crossing pairs severed.
pub fn node_bond_table<T: Real>(mesh: &Mesh<T>, horizon: T) -> NeighborTable<T> {
    NeighborTable::build(&mesh.nodes, horizon, mesh.crack.as_ref())
}

/// `Z(x) = max(0, max_y S(y, x; u) / S_c⁺(|y − x|))` over intact node bonds.
pub fn damage_field<T: Real>(
    table: &NeighborTable<T>,
    mesh: &Mesh<T>,
    u: &[T],
    pairwise: &PairwisePotential<T>,
) -> Result<Vec<T>> {
    check_len(u.len(), 2 * mesh.node_count())?;
    check_len(table.len(), mesh.node_count())?;
    let weights = vec![T::one(); mesh.node_count()];
    let disp = |i: usize| Vec2::new(u[2 * i], u[2 * i + 1]);
    let r_plus = pairwise.r_plus;
    Ok((0..mesh.node_count())
        .into_par_iter()
        .map(|p| {
            table
                .entries(p, &mesh.nodes, &weights)
                .filter(|b| b.intact)
                .map(|b| bond_strain(disp(b.q), disp(p), b.dist, b.dir) * b.dist.sqrt() / r_plus)
                .fold(T::zero(), T::max)
        })
        .collect())
}

/// Bond and hydrostatic energy over the quadrature points where `mask` holds.
pub fn masked_energy<T: Real>(
    disc: &Discretization<T>,
    u: &[T],
    mask: &[bool],
    law: ForceLaw,
) -> Result<(T, T)> {
    check_len(u.len(), disc.dofs())?;
    check_len(mask.len(), disc.quad.len())?;
    let k = &disc.kernel;
    let uq = disc.quad.interpolate(&disc.mesh, u);
    let theta = k.hydrostatic_strains(&uq)?;
    let (bond, state): (Vec<T>, Vec<T>) = (0..k.len())
        .into_par_iter()
        .map(|p| {
            if !mask[p] {
                return (T::zero(), T::zero());
            }
            let w = k.weights[p];
            (
                w * k.bond_energy_density(p, &uq, law),
                w * k.state_energy_density(p, theta[p], law),
            )
        })
        .unzip();
    Ok((bond.into_iter().sum(), state.into_iter().sum()))
}

/// Quadrature points whose interpolated damage is at least 1.
pub fn crack_zone_mask<T: Real>(disc: &Discretization<T>, damage: &[T]) -> Result<Vec<bool>> {
    check_len(damage.len(), disc.mesh.node_count())?;
    Ok((0..disc.quad.len())
        .map(|p| {
            let nodes = disc.mesh.elements[disc.quad.element[p]];
            let b = disc.quad.bary[p];
            let z = b[0] * damage[nodes[0]] + b[1] * damage[nodes[1]] + b[2] * damage[nodes[2]];
            z >= T::one()
        })
        .collect())
}

/// Peridynamic energy of the crack zone `{Z ≥ 1}`, split into bond and
/// hydrostatic parts.
pub fn crack_zone_energy<T: Real>(
    disc: &Discretization<T>,
    u: &[T],
    damage: &[T],
    law: ForceLaw,
) -> Result<(T, T)> {
    let mask = crack_zone_mask(disc, damage)?;
    if !mask.iter().any(|&m| m) {
        return Ok((T::zero(), T::zero()));
    }
    masked_energy(disc, u, &mask, law)
}

/// `G_c l`, per unit thickness.
pub fn griffith_energy<T: Real>(g_c: T, crack_length: T) -> T {
    g_c * crack_length
}

/// Crack tip and unit propagation direction: the endpoint farther from the
/// domain boundary, pointing away from the other endpoint.
pub fn crack_tip<T: Real>(mesh: &Mesh<T>, crack: &CrackSegment<T>) -> (Vec2<T>, Vec2<T>) {
    let (a, b) = (crack.p0, crack.p1);
    let (tip, base) = if mesh.domain.distance_to_boundary(b) >= mesh.domain.distance_to_boundary(a)
    {
        (b, a)
    } else {
        (a, b)
    };
    let d = tip - base;
    (tip, d * (T::one() / d.norm()))
}

/// Initial crack length plus the reach, along the crack direction, of the
/// connected `Z ≥ 1` node region that touches the tip. Nodes within
/// `seed_radius` of the tip start the search; mesh edges connect nodes.
pub fn crack_length<T: Real>(
    mesh: &Mesh<T>,
    crack: &CrackSegment<T>,
    damage: &[T],
    seed_radius: T,
) -> Result<T> {
    check_len(damage.len(), mesh.node_count())?;
    let (tip, dir) = crack_tip(mesh, crack);
    let damaged: Vec<bool> = damage.iter().map(|&z| z >= T::one()).collect();
    let mut adj = vec![Vec::new(); mesh.node_count()];
    for (a, b) in mesh.edges() {
        if damaged[a] && damaged[b] {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; mesh.node_count()];
    let mut queue: VecDeque<usize> = (0..mesh.node_count())
        .filter(|&i| damaged[i] && (mesh.nodes[i] - tip).norm() <= seed_radius)
        .collect();
    queue.iter().for_each(|&i| seen[i] = true);
    let mut reach = T::zero();
    while let Some(i) = queue.pop_front() {
        reach = reach.max((mesh.nodes[i] - tip).dot(dir));
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    Ok(crack.length() + reach)
}

/// `∂u_x/∂x` at the nodes, area-weighted average of the element gradients.
pub fn strain_xx<T: Real>(mesh: &Mesh<T>, u: &[T]) -> Result<Vec<T>> {
    check_len(u.len(), 2 * mesh.node_count())?;
    let mut acc = vec![T::zero(); mesh.node_count()];
    let mut area = vec![T::zero(); mesh.node_count()];
    for (e, nodes) in mesh.elements.iter().enumerate() {
        let [a, b, c] = mesh.element_vertices(e);
        let det = (b - a).cross(c - a);
        // ∂φ_i/∂x for the three vertices
        let dphi = [(b.y - c.y) / det, (c.y - a.y) / det, (a.y - b.y) / det];
        let g: T = (0..3).map(|k| dphi[k] * u[2 * nodes[k]]).sum();
        let ae = mesh.element_area(e);
        for &n in nodes {
            acc[n] = acc[n] + g * ae;
            area[n] = area[n] + ae;
        }
    }
    Ok(acc.iter().zip(&area).map(|(&g, &a)| g / a).collect())
}

/// Energy bookkeeping of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport<T> {
    pub kinetic: T,
    pub potential_bond: T,
    pub potential_state: T,
    /// `PD^ε = potential_bond + potential_state`.
    pub potential: T,
    /// `kinetic + potential`.
    pub total: T,
    pub pe_crack_bond: T,
    pub pe_crack_state: T,
    pub pe_crack: T,
    pub griffith: T,
    pub crack_length: T,
}

/// Everything needed to evaluate the diagnostics of a run.
pub struct Diagnostics<'a, T: Real> {
    pub disc: &'a Discretization<T>,
    pub node_table: NeighborTable<T>,
    pub g_c: T,
    pub law: ForceLaw,
}

impl<'a, T: Real> Diagnostics<'a, T> {
    pub fn new(disc: &'a Discretization<T>, g_c: T, law: ForceLaw) -> Self {
        Self {
            node_table: node_bond_table(&disc.mesh, disc.material().horizon),
            disc,
            g_c,
            law,
        }
    }

    pub fn damage(&self, u: &[T]) -> Result<Vec<T>> {
        damage_field(
            &self.node_table,
            &self.disc.mesh,
            u,
            &self.disc.material().pairwise,
        )
    }

    /// `½ Vᵀ M̂ V`.
    pub fn kinetic(&self, v: &[T]) -> T {
        T::lit(0.5) * self.disc.lumped_inner(v, v)
    }

    pub fn report(&self, u: &[T], v: &[T]) -> Result<EnergyReport<T>> {
        let damage = self.damage(u)?;
        self.report_with_damage(u, v, &damage)
    }

    pub fn report_with_damage(&self, u: &[T], v: &[T], damage: &[T]) -> Result<EnergyReport<T>> {
        check_len(v.len(), self.disc.dofs())?;
        let kinetic = self.kinetic(v);
        let uq = self.disc.quad.interpolate(&self.disc.mesh, u);
        let (pb, ps) = self.disc.kernel.potential_energy(&uq, self.law)?;
        let (cb, cs) = crack_zone_energy(self.disc, u, damage, self.law)?;
        let crack_length = match &self.disc.mesh.crack {
            Some(c) => crack_length(&self.disc.mesh, c, damage, self.disc.material().horizon)?,
            None => T::zero(),
        };
        Ok(EnergyReport {
            kinetic,
            potential_bond: pb,
            potential_state: ps,
            potential: pb + ps,
            total: kinetic + pb + ps,
            pe_crack_bond: cb,
            pe_crack_state: cs,
            pe_crack: cb + cs,
            griffith: griffith_energy(self.g_c, crack_length),
            crack_length,
        })
    }
}

/// `sqrt(Σ w |a − b|²)`.
pub fn weighted_l2_distance<T: Real>(a: &[Vec2<T>], b: &[Vec2<T>], weights: &[T]) -> T {
    a.iter()
        .zip(b)
        .zip(weights)
        .map(|((&x, &y), &w)| w * (x - y).norm_squared())
        .sum::<T>()
        .sqrt()
}

/// `α = (log e₁₂ − log e₂₃) / log r` from the two difference norms.
pub fn rate_from_norms<T: Real>(e12: T, e23: T, r: T) -> Result<T> {
    if !(r > T::one()) {
        return Err(Error::Invalid(format!(
            "refinement ratio must exceed 1, got {r}"
        )));
    }
    if !(e12 > T::zero() && e23 > T::zero()) {
        return Err(Error::Invalid(
            "solutions are identical; the rate is undefined".into(),
        ));
    }
    Ok((e12.ln() - e23.ln()) / r.ln())
}

/// Convergence rate from three solutions sampled on a common point set with
/// quadrature weights, coarsest first.
pub fn convergence_rate<T: Real>(
    u1: &[Vec2<T>],
    u2: &[Vec2<T>],
    u3: &[Vec2<T>],
    weights: &[T],
    r: T,
) -> Result<T> {
    check_len(u1.len(), weights.len())?;
    check_len(u2.len(), weights.len())?;
    check_len(u3.len(), weights.len())?;
    rate_from_norms(
        weighted_l2_distance(u1, u2, weights),
        weighted_l2_distance(u2, u3, weights),
        r,
    )
}
