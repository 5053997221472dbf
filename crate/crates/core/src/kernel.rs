//! Horizon neighborhoods and the pointwise nonlocal mechanics: bond strain,
//! hydrostatic strain, the boundary function and the bond/state force densities.
//!
//! The horizon integrals are evaluated with the global quadrature points as
//! integration nodes. Every sum below runs over a neighbor row in ascending index
//! order, so results do not depend on the number of worker threads.

use rayon::prelude::*;

use crate::error::Result;
use crate::material::{HydrostaticPotential, MaterialModel};
use crate::mesh::{check_len, CrackSegment, QuadPointSet, Rect};
use crate::scalar::Real;
use crate::vec2::Vec2;

/// Profile of the boundary function `ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryProfile {
    /// `ω = s(min(dist/ε, 1))` with the cubic smoothstep `s(t) = t²(3 - 2t)`.
    Smoothstep,
    /// `ω ≡ 1`, no boundary layer.
    Unit,
}

impl BoundaryProfile {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryProfile::Smoothstep => "smoothstep",
            BoundaryProfile::Unit => "none",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "smoothstep" => Some(Self::Smoothstep),
            "none" => Some(Self::Unit),
            _ => None,
        }
    }
}

/// Boundary function: zero on `∂D`, one at distance `>= ε`.
pub fn boundary_function<T: Real>(
    x: Vec2<T>,
    domain: &Rect<T>,
    horizon: T,
    profile: BoundaryProfile,
) -> T {
    match profile {
        BoundaryProfile::Unit => T::one(),
        BoundaryProfile::Smoothstep => {
            let t = (domain.distance_to_boundary(x) / horizon).min(T::one());
            t * t * (T::lit(3.0) - T::lit(2.0) * t)
        }
    }
}

/// `S = ((u(y) - u(x)) / |y - x|) · e_{y-x}`.
#[inline(always)]
pub fn bond_strain<T: Real>(u_y: Vec2<T>, u_x: Vec2<T>, dist: T, dir: Vec2<T>) -> T {
    (u_y - u_x).dot(dir) / dist
}

const SEVERED: u32 = 1 << 31;

/// One horizon entry as seen from point `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborEntry<T> {
    pub q: usize,
    /// Quadrature weight of `q` (m²).
    pub weight: T,
    pub dist: T,
    /// Unit vector from `p` towards `q`.
    pub dir: Vec2<T>,
    /// False when the segment `[x_p, x_q]` crosses the pre-crack.
    pub intact: bool,
}

/// Uniform bins of side `>= ε` over the bounding box of a point cloud.
#[derive(Debug, Clone)]
struct SpatialGrid<T> {
    origin: Vec2<T>,
    cell: T,
    nx: usize,
    ny: usize,
    starts: Vec<usize>,
    items: Vec<u32>,
}

impl<T: Real> SpatialGrid<T> {
    fn new(points: &[Vec2<T>], cell: T) -> Self {
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in points {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let count = |span: T| (span / cell).floor().to_usize().unwrap_or(0) + 1;
        let (nx, ny) = (count(hi.x - lo.x), count(hi.y - lo.y));
        let mut grid = Self {
            origin: lo,
            cell,
            nx,
            ny,
            starts: vec![0; nx * ny + 1],
            items: vec![0; points.len()],
        };
        let bins: Vec<usize> = points.iter().map(|&p| grid.bin_of(p)).collect();
        for &b in &bins {
            grid.starts[b + 1] += 1;
        }
        for b in 0..nx * ny {
            grid.starts[b + 1] += grid.starts[b];
        }
        let mut fill = grid.starts.clone();
        for (i, &b) in bins.iter().enumerate() {
            grid.items[fill[b]] = i as u32;
            fill[b] += 1;
        }
        grid
    }

    fn coords(&self, p: Vec2<T>) -> (isize, isize) {
        let c = |v: T| (v / self.cell).floor().to_isize().unwrap_or(isize::MIN / 2);
        (c(p.x - self.origin.x), c(p.y - self.origin.y))
    }

    fn bin_of(&self, p: Vec2<T>) -> usize {
        let (i, j) = self.coords(p);
        let i = i.clamp(0, self.nx as isize - 1) as usize;
        let j = j.clamp(0, self.ny as isize - 1) as usize;
        j * self.nx + i
    }

    /// Indices of points strictly within `radius` of `x`, excluding `exclude`,
    /// sorted ascending. `radius` must not exceed the bin size.
    fn query(
        &self,
        points: &[Vec2<T>],
        x: Vec2<T>,
        radius: T,
        exclude: Option<usize>,
        out: &mut Vec<u32>,
    ) {
        out.clear();
        let (ci, cj) = self.coords(x);
        let r2 = radius * radius;
        for j in cj - 1..=cj + 1 {
            if j < 0 || j >= self.ny as isize {
                continue;
            }
            for i in ci - 1..=ci + 1 {
                if i < 0 || i >= self.nx as isize {
                    continue;
                }
                let b = j as usize * self.nx + i as usize;
                for &q in &self.items[self.starts[b]..self.starts[b + 1]] {
                    if Some(q as usize) == exclude {
                        continue;
                    }
                    let d2 = (points[q as usize] - x).norm_squared();
                    if d2 < r2 && d2 > T::zero() {
                        out.push(q);
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

/// Horizon neighborhoods of a point cloud, in compressed-row form.
#[derive(Debug, Clone)]
pub struct NeighborTable<T> {
    horizon: T,
    offsets: Vec<usize>,
    entries: Vec<u32>,
    grid: SpatialGrid<T>,
    crack: Option<CrackSegment<T>>,
}

impl<T: Real> NeighborTable<T> {
    /// Finds all pairs closer than `horizon` with a bin-hashing pass, then flags
    /// pairs whose connecting segment crosses the crack.
    pub fn build(points: &[Vec2<T>], horizon: T, crack: Option<&CrackSegment<T>>) -> Self {
        assert!(horizon > T::zero(), "horizon must be positive");
        let grid = SpatialGrid::new(points, horizon);
        let rows: Vec<Vec<u32>> = (0..points.len())
            .into_par_iter()
            .map_init(Vec::new, |buf, p| {
                grid.query(points, points[p], horizon, Some(p), buf);
                let x = points[p];
                buf.iter()
                    .map(|&q| match crack {
                        Some(c) if c.blocks(x, points[q as usize]) => q | SEVERED,
                        _ => q,
                    })
                    .collect()
            })
            .collect();
        let mut offsets = Vec::with_capacity(points.len() + 1);
        offsets.push(0);
        let mut total = 0;
        for r in &rows {
            total += r.len();
            offsets.push(total);
        }
        let mut entries = Vec::with_capacity(total);
        for r in rows {
            entries.extend_from_slice(&r);
        }
        Self {
            horizon,
            offsets,
            entries,
            grid,
            crack: crack.copied(),
        }
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bond_count(&self) -> usize {
        self.entries.len()
    }

    pub fn intact_bond_count(&self) -> usize {
        self.entries.iter().filter(|&&e| e & SEVERED == 0).count()
    }

    #[inline(always)]
    pub(crate) fn raw_row(&self, p: usize) -> &[u32] {
        &self.entries[self.offsets[p]..self.offsets[p + 1]]
    }

    /// Neighbor ids of `p` in ascending order, severed ones included.
    pub fn neighbor_ids(&self, p: usize) -> impl Iterator<Item = usize> + '_ {
        self.raw_row(p).iter().map(|&e| (e & !SEVERED) as usize)
    }

    pub fn contains(&self, p: usize, q: usize) -> bool {
        self.raw_row(p)
            .binary_search_by_key(&(q as u32), |&e| e & !SEVERED)
            .is_ok()
    }

    /// Full entries of row `p`.
    pub fn entries<'a>(
        &'a self,
        p: usize,
        points: &'a [Vec2<T>],
        weights: &'a [T],
    ) -> impl Iterator<Item = NeighborEntry<T>> + 'a {
        let x = points[p];
        self.raw_row(p).iter().map(move |&e| {
            let q = (e & !SEVERED) as usize;
            let d = points[q] - x;
            let dist = d.norm();
            NeighborEntry {
                q,
                weight: weights[q],
                dist,
                dir: d * (T::one() / dist),
                intact: e & SEVERED == 0,
            }
        })
    }

    /// Horizon of an arbitrary location against the indexed points, encoded like
    /// a table row.
    pub(crate) fn query_row(&self, points: &[Vec2<T>], x: Vec2<T>) -> Vec<u32> {
        let mut row = Vec::new();
        self.grid.query(points, x, self.horizon, None, &mut row);
        for e in &mut row {
            if let Some(c) = &self.crack {
                if c.blocks(x, points[*e as usize]) {
                    *e |= SEVERED;
                }
            }
        }
        row
    }
}

/// Which force law the kernel evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceLaw {
    Nonlinear,
    /// `f'(√r S)√r -> f''(0) r S` and `g'(θ) -> g''(0) θ`.
    Linearized,
    /// As `Linearized` with `|g''(0)|` in place of `g''(0)`. Positive
    /// semidefinite, and its spectrum bounds the linearized one from above.
    LinearizedMajorant,
}

impl ForceLaw {
    fn hydrostatic_stiffness<T: Real>(self, g: &HydrostaticPotential<T>) -> T {
        match self {
            ForceLaw::LinearizedMajorant => g.d2g_at_zero().abs(),
            _ => g.d2g_at_zero(),
        }
    }
}

/// Nonlocal operator on a fixed quadrature point cloud.
#[derive(Debug, Clone)]
pub struct NonlocalKernel<T> {
    pub material: MaterialModel<T>,
    pub points: Vec<Vec2<T>>,
    pub weights: Vec<T>,
    pub table: NeighborTable<T>,
    /// `ω` at each point.
    pub omega: Vec<T>,
    /// `ω w` at each point, the per-neighbor factor of every horizon sum.
    omega_w: Vec<T>,
    pub domain: Rect<T>,
    pub profile: BoundaryProfile,
}

/// Per-bond coefficient functions share this prefactor bookkeeping.
#[derive(Debug, Clone, Copy)]
struct Prefactors<T> {
    inv_eps: T,
    /// `1 / (ε^d ω_d)`
    theta: T,
    /// `2 / (ε^{d+1} ω_d)`
    bond: T,
    /// `1 / (ε^{d+2} ω_d)`
    state: T,
}

impl<T: Real> NonlocalKernel<T> {
    pub fn new(
        quad: &QuadPointSet<T>,
        material: MaterialModel<T>,
        domain: Rect<T>,
        crack: Option<&CrackSegment<T>>,
        profile: BoundaryProfile,
    ) -> Self {
        let eps = material.horizon;
        let table = NeighborTable::build(&quad.positions, eps, crack);
        let omega: Vec<T> = quad
            .positions
            .iter()
            .map(|&x| boundary_function(x, &domain, eps, profile))
            .collect();
        let omega_w = omega
            .iter()
            .zip(&quad.weights)
            .map(|(&o, &w)| o * w)
            .collect();
        Self {
            material,
            points: quad.positions.clone(),
            weights: quad.weights.clone(),
            table,
            omega,
            omega_w,
            domain,
            profile,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn prefactors(&self) -> Prefactors<T> {
        let eps = self.material.horizon;
        let wd = self.material.unit_ball_volume();
        let eps_d = eps.powi(self.material.dim as i32);
        Prefactors {
            inv_eps: T::one() / eps,
            theta: T::one() / (eps_d * wd),
            bond: T::lit(2.0) / (eps_d * eps * wd),
            state: T::one() / (eps_d * eps * eps * wd),
        }
    }

    #[inline(always)]
    fn theta_row(
        &self,
        x: Vec2<T>,
        ux: Vec2<T>,
        row: &[u32],
        u: &[Vec2<T>],
        pf: &Prefactors<T>,
    ) -> T {
        let j = self.material.influence;
        let mut acc = T::zero();
        for &e in row {
            if e & SEVERED != 0 {
                continue;
            }
            let q = e as usize;
            let d = self.points[q] - x;
            let r = d.norm();
            // S |y - x| = (u_q - u_x) · e
            let s_r = (u[q] - ux).dot(d) / r;
            acc = acc + self.omega_w[q] * j.eval(r * pf.inv_eps) * s_r;
        }
        acc * pf.theta
    }

    /// Hydrostatic strain `θ(x_p)` from displacement samples at the points.
    pub fn hydrostatic_strain(&self, p: usize, u: &[Vec2<T>]) -> Result<T> {
        check_len(u.len(), self.len())?;
        let pf = self.prefactors();
        Ok(self.theta_row(self.points[p], u[p], self.table.raw_row(p), u, &pf))
    }

    /// `θ` at every point (first pass of the force evaluation).
    pub fn hydrostatic_strains(&self, u: &[Vec2<T>]) -> Result<Vec<T>> {
        check_len(u.len(), self.len())?;
        let pf = self.prefactors();
        Ok((0..self.len())
            .into_par_iter()
            .map(|p| self.theta_row(self.points[p], u[p], self.table.raw_row(p), u, &pf))
            .collect())
    }

    /// Per-point `g'(θ)` (nonlinear) or `g''(0) θ` (linearized).
    fn hydrostatic_slopes(&self, theta: &[T], law: ForceLaw) -> Vec<T> {
        let g = &self.material.hydrostatic;
        match law {
            ForceLaw::Nonlinear => theta.iter().map(|&t| g.dg(t)).collect(),
            ForceLaw::Linearized | ForceLaw::LinearizedMajorant => {
                let k = law.hydrostatic_stiffness(g);
                theta.iter().map(|&t| k * t).collect()
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    #[inline(always)]
    fn force_row(
        &self,
        x: Vec2<T>,
        ux: Vec2<T>,
        omega_x: T,
        slope_x: T,
        row: &[u32],
        u: &[Vec2<T>],
        slopes: &[T],
        law: ForceLaw,
        pf: &Prefactors<T>,
    ) -> Vec2<T> {
        let j = self.material.influence;
        let f = &self.material.pairwise;
        let well = f.well;
        let symmetric = well.c_pos == well.c_neg && well.beta_pos == well.beta_neg;
        let two_cb = T::lit(2.0) * well.c_pos * well.beta_pos;
        let f2 = f.d2f_at_zero();
        let mut acc = Vec2::zero();
        for &e in row {
            if e & SEVERED != 0 {
                continue;
            }
            let q = e as usize;
            let d = self.points[q] - x;
            let r = d.norm();
            let dir = d * (T::one() / r);
            let s = (u[q] - ux).dot(dir) / r;
            let jr = j.eval(r * pf.inv_eps);
            // ∂_S f(√r S) / r = f'(√r S) / √r
            let bond = match law {
                ForceLaw::Nonlinear if symmetric => two_cb * s * (-well.beta_pos * r * s * s).exp(),
                ForceLaw::Nonlinear => {
                    let (c, b) = if s >= T::zero() {
                        (well.c_pos, well.beta_pos)
                    } else {
                        (well.c_neg, well.beta_neg)
                    };
                    T::lit(2.0) * c * b * s * (-b * r * s * s).exp()
                }
                ForceLaw::Linearized | ForceLaw::LinearizedMajorant => f2 * s,
            };
            let coef = pf.bond * bond + pf.state * (slopes[q] + slope_x);
            acc += dir * (self.omega_w[q] * jr * coef);
        }
        acc * omega_x
    }

    /// Force density `L^ε(u)(x_p) = L_T + L_D`; `theta` must come from
    /// [`NonlocalKernel::hydrostatic_strains`] on the same `u`.
    pub fn force_density(
        &self,
        p: usize,
        u: &[Vec2<T>],
        theta: &[T],
        law: ForceLaw,
    ) -> Result<Vec2<T>> {
        check_len(u.len(), self.len())?;
        check_len(theta.len(), self.len())?;
        let pf = self.prefactors();
        let slopes = self.hydrostatic_slopes(theta, law);
        Ok(self.force_row(
            self.points[p],
            u[p],
            self.omega[p],
            slopes[p],
            self.table.raw_row(p),
            u,
            &slopes,
            law,
            &pf,
        ))
    }

    /// Shorthand for the linearized force at one point.
    pub fn linearized_force_density(
        &self,
        p: usize,
        u: &[Vec2<T>],
        theta: &[T],
    ) -> Result<Vec2<T>> {
        self.force_density(p, u, theta, ForceLaw::Linearized)
    }

    /// Force density at every point: hydrostatic pass, then force pass.
    pub fn force_densities(&self, u: &[Vec2<T>], law: ForceLaw) -> Result<(Vec<T>, Vec<Vec2<T>>)> {
        let theta = self.hydrostatic_strains(u)?;
        let slopes = self.hydrostatic_slopes(&theta, law);
        let pf = self.prefactors();
        let forces = (0..self.len())
            .into_par_iter()
            .map(|p| {
                self.force_row(
                    self.points[p],
                    u[p],
                    self.omega[p],
                    slopes[p],
                    self.table.raw_row(p),
                    u,
                    &slopes,
                    law,
                    &pf,
                )
            })
            .collect();
        Ok((theta, forces))
    }

    /// `θ` at an arbitrary location `x` carrying displacement `ux`.
    pub fn hydrostatic_strain_at(&self, x: Vec2<T>, ux: Vec2<T>, u: &[Vec2<T>]) -> Result<T> {
        check_len(u.len(), self.len())?;
        let row = self.table.query_row(&self.points, x);
        Ok(self.theta_row(x, ux, &row, u, &self.prefactors()))
    }

    /// Force density at an arbitrary location (for example a mesh node), using
    /// the point cloud as integration nodes. `theta` holds the point values.
    pub fn force_density_at(
        &self,
        x: Vec2<T>,
        ux: Vec2<T>,
        u: &[Vec2<T>],
        theta: &[T],
        law: ForceLaw,
    ) -> Result<Vec2<T>> {
        check_len(u.len(), self.len())?;
        check_len(theta.len(), self.len())?;
        let pf = self.prefactors();
        let row = self.table.query_row(&self.points, x);
        let theta_x = self.theta_row(x, ux, &row, u, &pf);
        let slopes = self.hydrostatic_slopes(theta, law);
        let slope_x = self.hydrostatic_slopes(&[theta_x], law)[0];
        let omega_x = boundary_function(x, &self.domain, self.material.horizon, self.profile);
        Ok(self.force_row(x, ux, omega_x, slope_x, &row, u, &slopes, law, &pf))
    }

    /// Pairwise energy density at `x_p`,
    /// `(1/(ε^{d+1} ω_d)) ω(x) Σ_q ω_q w_q J f(√r S)`; integrating it with the
    /// point weights gives the bond part of the potential energy.
    pub fn bond_energy_density(&self, p: usize, u: &[Vec2<T>], law: ForceLaw) -> T {
        let pf = self.prefactors();
        let j = self.material.influence;
        let f = &self.material.pairwise;
        let f2 = f.d2f_at_zero();
        let x = self.points[p];
        let mut acc = T::zero();
        for &e in self.table.raw_row(p) {
            if e & SEVERED != 0 {
                continue;
            }
            let q = e as usize;
            let d = self.points[q] - x;
            let r = d.norm();
            let s = (u[q] - u[p]).dot(d) / (r * r);
            let w = match law {
                ForceLaw::Nonlinear => f.f(r.sqrt() * s),
                ForceLaw::Linearized | ForceLaw::LinearizedMajorant => T::lit(0.5) * f2 * r * s * s,
            };
            acc = acc + self.omega_w[q] * j.eval(r * pf.inv_eps) * w;
        }
        // 1/(ε^{d+1} ω_d) = bond prefactor / 2
        acc * self.omega[p] * pf.bond * T::lit(0.5)
    }

    /// Hydrostatic energy density `ω(x) g(θ) / ε²`.
    pub fn state_energy_density(&self, p: usize, theta: T, law: ForceLaw) -> T {
        let g = &self.material.hydrostatic;
        let v = match law {
            ForceLaw::Nonlinear => g.g(theta),
            ForceLaw::Linearized | ForceLaw::LinearizedMajorant => {
                T::lit(0.5) * law.hydrostatic_stiffness(g) * theta * theta
            }
        };
        let eps = self.material.horizon;
        self.omega[p] * v / (eps * eps)
    }

    /// Bond and hydrostatic parts of `PD^ε`, summed over the point weights.
    pub fn potential_energy(&self, u: &[Vec2<T>], law: ForceLaw) -> Result<(T, T)> {
        let theta = self.hydrostatic_strains(u)?;
        let (bond, state): (Vec<T>, Vec<T>) = (0..self.len())
            .into_par_iter()
            .map(|p| {
                let w = self.weights[p];
                (
                    w * self.bond_energy_density(p, u, law),
                    w * self.state_energy_density(p, theta[p], law),
                )
            })
            .unzip();
        Ok((bond.into_iter().sum(), state.into_iter().sum()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{
        HydrostaticPotential, InflectionRule, InfluenceFunction, PairwisePotential,
    };
    use crate::mesh::{build_quad_points, build_uniform_mesh};
    use crate::quadrature::QuadratureRule;

    fn v(x: f64, y: f64) -> Vec2<f64> {
        Vec2::new(x, y)
    }

    fn material(eps: f64) -> MaterialModel<f64> {
        let f = PairwisePotential::new(1.0, 1.0e4, InflectionRule::Analytic).unwrap();
        let g = HydrostaticPotential::quadratic(-2.0e3);
        MaterialModel::new(1.0, eps, InfluenceFunction::OneMinusR, f, g).unwrap()
    }

    #[test]
    fn boundary_function_profile() {
        let d = Rect::new(1.0, 1.0);
        let eps = 0.2;
        assert_eq!(
            boundary_function(v(0.0, 0.5), &d, eps, BoundaryProfile::Smoothstep),
            0.0
        );
        assert_eq!(
            boundary_function(v(0.5, 0.5), &d, eps, BoundaryProfile::Smoothstep),
            1.0
        );
        assert_eq!(
            boundary_function(v(0.5, 0.8), &d, eps, BoundaryProfile::Smoothstep),
            1.0
        );
        let half = boundary_function(v(0.5, 0.1), &d, eps, BoundaryProfile::Smoothstep);
        assert!((half - 0.5).abs() < 1e-15);
        assert_eq!(
            boundary_function(v(0.0, 0.0), &d, eps, BoundaryProfile::Unit),
            1.0
        );
    }

    #[test]
    fn table_pairs() {
        let pts = vec![v(0.0, 0.0), v(1.5, 0.0), v(0.0, 0.5)];
        let t = NeighborTable::build(&pts, 1.0, None);
        assert!(!t.contains(0, 1));
        assert!(t.contains(0, 2) && t.contains(2, 0));
        let e: Vec<_> = t.entries(0, &pts, &[1.0; 3]).collect();
        assert_eq!(e.len(), 1);
        assert!(e[0].intact);
        assert!((e[0].dist - 0.5).abs() < 1e-15);

        let crack = CrackSegment::new(v(-1.0, 0.25), v(1.0, 0.25)).unwrap();
        let tc = NeighborTable::build(&pts, 1.0, Some(&crack));
        let e: Vec<_> = tc.entries(0, &pts, &[1.0; 3]).collect();
        assert!(!e[0].intact);
        assert_eq!(tc.intact_bond_count(), 0);
    }

    #[test]
    fn table_invariants_on_mesh() {
        let crack = CrackSegment::new(v(0.5, 0.0), v(0.5, 0.375)).unwrap();
        let m = build_uniform_mesh(1.0, 1.0, 0.125, Some(crack)).unwrap();
        let q = build_quad_points(&m, &QuadratureRule::interior_three_point());
        let eps = 0.3;
        let t = NeighborTable::build(&q.positions, eps, Some(&crack));
        let plain = NeighborTable::build(&q.positions, eps, None);
        assert!(t.intact_bond_count() < plain.intact_bond_count());
        assert_eq!(t.bond_count(), plain.bond_count());
        // brute force comparison
        for p in 0..q.len() {
            let mut expect = Vec::new();
            for k in 0..q.len() {
                let d = (q.positions[k] - q.positions[p]).norm();
                if k != p && d < eps {
                    expect.push(k);
                }
            }
            let got: Vec<usize> = t.neighbor_ids(p).collect();
            assert_eq!(got, expect);
            for e in t.entries(p, &q.positions, &q.weights) {
                assert!(e.dist > 0.0 && e.dist < eps);
                assert!((e.dir.norm() - 1.0).abs() < 1e-12);
                assert_eq!(e.intact, !crack.blocks(q.positions[p], q.positions[e.q]));
                assert!(t.contains(e.q, p));
            }
        }
    }

    #[test]
    fn bond_strain_examples() {
        let dir = v(0.6, 0.8);
        assert_eq!(bond_strain(v(0.3, 0.2), v(0.3, 0.2), 2.0, dir), 0.0);
        // u = αx gives S = α
        let alpha = 1e-3;
        let (x, y) = (v(0.1, 0.2), v(0.7, 1.0));
        let d = (y - x).norm();
        let s = bond_strain(y * alpha, x * alpha, d, (y - x) * (1.0 / d));
        assert!((s - alpha).abs() < 1e-15);
        // exact small rotation: S = O(angle²)
        let a: f64 = 1e-3;
        let rot = |p: Vec2<f64>| {
            v(
                a.cos() * p.x - a.sin() * p.y - p.x,
                a.sin() * p.x + a.cos() * p.y - p.y,
            )
        };
        let s = bond_strain(rot(y), rot(x), d, (y - x) * (1.0 / d));
        assert!(s.abs() < 1e-6, "{s}");
    }

    fn kernel(h: f64, eps: f64, profile: BoundaryProfile) -> NonlocalKernel<f64> {
        let m = build_uniform_mesh(1.0, 1.0, h, None).unwrap();
        let q = build_quad_points(&m, &QuadratureRule::interior_three_point());
        NonlocalKernel::new(&q, material(eps), m.domain, None, profile)
    }

    #[test]
    fn zero_and_translation_fields() {
        let k = kernel(0.125, 0.3, BoundaryProfile::Smoothstep);
        let zero = vec![Vec2::zero(); k.len()];
        let (theta, force) = k.force_densities(&zero, ForceLaw::Nonlinear).unwrap();
        assert!(theta.iter().all(|&t| t == 0.0));
        assert!(force.iter().all(|f| f.x == 0.0 && f.y == 0.0));
        let lin = k.linearized_force_density(5, &zero, &theta).unwrap();
        assert_eq!(lin, Vec2::zero());

        let shift = vec![v(0.25, -0.5); k.len()];
        let (theta, force) = k.force_densities(&shift, ForceLaw::Nonlinear).unwrap();
        assert!(theta.iter().all(|&t| t == 0.0));
        assert!(force.iter().all(|f| f.x == 0.0 && f.y == 0.0));
    }

    #[test]
    fn theta_length_mismatch() {
        let k = kernel(0.25, 0.4, BoundaryProfile::Smoothstep);
        let u = vec![Vec2::zero(); k.len()];
        assert!(k
            .force_density(0, &u, &[0.0; 3], ForceLaw::Nonlinear)
            .is_err());
    }

    #[test]
    fn translation_invariance_is_exact() {
        // dyadic samples keep `u + c` exact in binary floating point
        let k = kernel(0.125, 0.3, BoundaryProfile::Smoothstep);
        let u: Vec<Vec2<f64>> = (0..k.len())
            .map(|i| {
                v(
                    ((i * 37) % 64) as f64 / 65536.0,
                    ((i * 11) % 32) as f64 / 131072.0,
                )
            })
            .collect();
        let shifted: Vec<Vec2<f64>> = u.iter().map(|&x| x + v(0.5, -0.25)).collect();
        for law in [ForceLaw::Nonlinear, ForceLaw::Linearized] {
            let (ta, fa) = k.force_densities(&u, law).unwrap();
            let (tb, fb) = k.force_densities(&shifted, law).unwrap();
            assert_eq!(ta, tb);
            assert_eq!(fa, fb);
        }
    }

    #[test]
    fn two_pass_is_bit_reproducible() {
        let k = kernel(0.125, 0.3, BoundaryProfile::Smoothstep);
        let u: Vec<Vec2<f64>> = (0..k.len())
            .map(|i| v((i as f64).sin() * 1e-4, (i as f64).cos() * 1e-4))
            .collect();
        let a = k.force_densities(&u, ForceLaw::Nonlinear).unwrap();
        let b = k.force_densities(&u, ForceLaw::Nonlinear).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let p = 17;
        assert_eq!(
            k.force_density(p, &u, &a.0, ForceLaw::Nonlinear).unwrap(),
            a.1[p]
        );
        assert_eq!(k.hydrostatic_strain(p, &u).unwrap(), a.0[p]);
    }

    #[test]
    fn linearization_error_is_superlinear() {
        let k = kernel(0.125, 0.3, BoundaryProfile::Smoothstep);
        let base: Vec<Vec2<f64>> = k
            .points
            .iter()
            .map(|x| v((3.0 * x.x).sin() * x.y, (2.0 * x.y).cos() * x.x))
            .collect();
        let mut ratios = Vec::new();
        for t in [1e-2, 1e-3, 1e-4, 1e-5] {
            let u: Vec<Vec2<f64>> = base.iter().map(|&b| b * t).collect();
            let (_, nl) = k.force_densities(&u, ForceLaw::Nonlinear).unwrap();
            let (_, li) = k.force_densities(&u, ForceLaw::Linearized).unwrap();
            let diff: Vec<Vec2<f64>> = nl.iter().zip(&li).map(|(&a, &b)| a - b).collect();
            let qs = QuadPointSet {
                positions: k.points.clone(),
                weights: k.weights.clone(),
                element: vec![0; k.len()],
                bary: vec![[0.0; 3]; k.len()],
            };
            ratios.push(qs.l2_norm(&diff) / qs.l2_norm(&li));
        }
        for w in ratios.windows(2) {
            let slope = (w[0] / w[1]).log10();
            assert!(slope >= 1.0, "ratios {ratios:?}");
        }
    }
}
