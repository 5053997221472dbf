//! Structured triangulations of rectangles, linear shape functions and
//! quadrature point sets.

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;
use crate::scalar::Real;
use crate::vec2::Vec2;

/// Axis-aligned rectangle `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub width: T,
    pub height: T,
}

impl<T: Real> Rect<T> {
    pub fn new(width: T, height: T) -> Self {
        Self { width, height }
    }

    pub fn area(&self) -> T {
        self.width * self.height
    }

    /// Distance from a point of the closed rectangle to its boundary.
    pub fn distance_to_boundary(&self, p: Vec2<T>) -> T {
        let dx = p.x.min(self.width - p.x);
        let dy = p.y.min(self.height - p.y);
        dx.min(dy).max(T::zero())
    }

    pub fn contains(&self, p: Vec2<T>, tol: T) -> bool {
        p.x >= -tol && p.y >= -tol && p.x <= self.width + tol && p.y <= self.height + tol
    }
}

/// Straight pre-crack. Bonds whose segment crosses it are severed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackSegment<T> {
    pub p0: Vec2<T>,
    pub p1: Vec2<T>,
}

impl<T: Real> CrackSegment<T> {
    pub fn new(p0: Vec2<T>, p1: Vec2<T>) -> Result<Self> {
        if (p1 - p0).norm() <= T::zero() {
            return Err(Error::Mesh("crack endpoints coincide".into()));
        }
        Ok(Self { p0, p1 })
    }

    pub fn length(&self) -> T {
        (self.p1 - self.p0).norm()
    }

    /// True when the open segment `(a, b)` properly crosses the crack. Touching an
    /// endpoint or running collinear does not count.
    #[inline]
    pub fn blocks(&self, a: Vec2<T>, b: Vec2<T>) -> bool {
        let ab = b - a;
        let cd = self.p1 - self.p0;
        let o1 = ab.cross(self.p0 - a);
        let o2 = ab.cross(self.p1 - a);
        let o3 = cd.cross(a - self.p0);
        let o4 = cd.cross(b - self.p0);
        o1 * o2 < T::zero() && o3 * o4 < T::zero()
    }
}

/// Bit set of geometric boundary labels carried by a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct BoundaryTags(u8);

impl BoundaryTags {
    pub const LEFT: Self = Self(1);
    pub const RIGHT: Self = Self(2);
    pub const BOTTOM: Self = Self(4);
    pub const TOP: Self = Self(8);

    pub fn contains(self, other: Self) -> bool {
        self.0 & other.0 == other.0 && other.0 != 0
    }

    pub fn insert(&mut self, other: Self) {
        self.0 |= other.0;
    }

    pub fn is_interior(self) -> bool {
        self.0 == 0
    }
}

/// Index layout of a structured mesh: `nx` by `ny` cells of size `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    pub nx: usize,
    pub ny: usize,
    pub h: T,
}

#[derive(Debug, Clone)]
pub struct Mesh<T> {
    pub domain: Rect<T>,
    pub nodes: Vec<Vec2<T>>,
    /// Counter-clockwise node triples.
    pub elements: Vec<[usize; 3]>,
    pub node_tags: Vec<BoundaryTags>,
    pub grid: Grid<T>,
    pub crack: Option<CrackSegment<T>>,
}

fn cells_along<T: Real>(length: T, h: T, what: &str) -> Result<usize> {
    let ratio = length / h;
    let n = ratio.round();
    if n < T::one() || (n * h - length).abs() > T::lit(1e-9) * length {
        return Err(Error::Mesh(format!(
            "mesh size {h} does not divide the domain {what} {length}"
        )));
    }
    Ok(n.to_usize().expect("cell count fits usize"))
}

/// Builds a uniform mesh of right triangles on `[0, width] x [0, height]`.
///
/// Nodes are numbered row-major (y outer, x inner). Every square cell is split
/// along its rising diagonal into two counter-clockwise triangles. The optional
/// crack must lie inside the domain; it only severs bonds and is not cut into
/// the mesh.
pub fn build_uniform_mesh<T: Real>(
    width: T,
    height: T,
    h: T,
    crack: Option<CrackSegment<T>>,
) -> Result<Mesh<T>> {
    if !(h > T::zero()) || !(width > T::zero()) || !(height > T::zero()) {
        return Err(Error::Mesh("width, height and h must be positive".into()));
    }
    let nx = cells_along(width, h, "width")?;
    let ny = cells_along(height, h, "height")?;
    let domain = Rect::new(width, height);

    if let Some(c) = &crack {
        check_crack_inside(c, &domain, h)?;
    }

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut node_tags = Vec::with_capacity(nodes.capacity());
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx {
                width
            } else {
                T::from_usize_lossy(i) * h
            };
            let y = if j == ny {
                height
            } else {
                T::from_usize_lossy(j) * h
            };
            nodes.push(Vec2::new(x, y));
            let mut tags = BoundaryTags::default();
            if i == 0 {
                tags.insert(BoundaryTags::LEFT);
            }
            if i == nx {
                tags.insert(BoundaryTags::RIGHT);
            }
            if j == 0 {
                tags.insert(BoundaryTags::BOTTOM);
            }
            if j == ny {
                tags.insert(BoundaryTags::TOP);
            }
            node_tags.push(tags);
        }
    }

    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (n00, n10, n11, n01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            elements.push([n00, n10, n11]);
            elements.push([n00, n11, n01]);
        }
    }

    Ok(Mesh {
        domain,
        nodes,
        elements,
        node_tags,
        grid: Grid { nx, ny, h },
        crack,
    })
}

fn check_crack_inside<T: Real>(c: &CrackSegment<T>, domain: &Rect<T>, h: T) -> Result<()> {
    let tol = T::lit(1e-9) * h;
    if [c.p0, c.p1].iter().any(|&p| !domain.contains(p, tol)) {
        return Err(Error::Mesh("crack endpoint outside the domain".into()));
    }
    Ok(())
}

/// Linear shape function values at barycentric coordinates. For P1 triangles
/// they coincide with the coordinates themselves.
#[inline]
pub fn shape_values<T: Real>(_element: [usize; 3], bary: [T; 3]) -> [T; 3] {
    bary
}

impl<T: Real> Mesh<T> {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn h(&self) -> T {
        self.grid.h
    }

    pub fn element_vertices(&self, e: usize) -> [Vec2<T>; 3] {
        let [a, b, c] = self.elements[e];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Signed area (positive for counter-clockwise ordering).
    pub fn element_area(&self, e: usize) -> T {
        let [a, b, c] = self.element_vertices(e);
        (b - a).cross(c - a) * T::lit(0.5)
    }

    pub fn point_at(&self, e: usize, bary: [T; 3]) -> Vec2<T> {
        let [a, b, c] = self.element_vertices(e);
        a * bary[0] + b * bary[1] + c * bary[2]
    }

    pub fn barycentric(&self, e: usize, p: Vec2<T>) -> [T; 3] {
        let [a, b, c] = self.element_vertices(e);
        let twice_area = (b - a).cross(c - a);
        let l1 = (c - b).cross(p - b) / twice_area;
        let l2 = (a - c).cross(p - c) / twice_area;
        [l1, l2, T::one() - l1 - l2]
    }

    /// Element containing `p` and the barycentric coordinates of `p` in it.
    pub fn locate(&self, p: Vec2<T>) -> Result<(usize, [T; 3])> {
        let tol = T::lit(1e-10) * self.grid.h;
        if !self.domain.contains(p, tol) {
            return Err(Error::OutsideDomain {
                x: p.x.to_f64_lossy(),
                y: p.y.to_f64_lossy(),
            });
        }
        let Grid { nx, ny, h } = self.grid;
        let clamp = |v: T, n: usize| {
            let i = (v / h).floor().max(T::zero()).to_usize().unwrap_or(0);
            i.min(n - 1)
        };
        let (i, j) = (clamp(p.x, nx), clamp(p.y, ny));
        let cell = 2 * (j * nx + i);
        let slack = T::lit(-1e-12);
        for e in [cell, cell + 1] {
            let bary = self.barycentric(e, p);
            if bary.iter().all(|&l| l >= slack) {
                return Ok((e, bary));
            }
        }
        Err(Error::OutsideDomain {
            x: p.x.to_f64_lossy(),
            y: p.y.to_f64_lossy(),
        })
    }

    /// Value of the piecewise linear interpolant of an interleaved nodal field.
    pub fn interpolate(&self, nodal: &[T], p: Vec2<T>) -> Result<Vec2<T>> {
        check_len(nodal.len(), 2 * self.node_count())?;
        let (e, bary) = self.locate(p)?;
        Ok(interpolate_in(self.elements[e], bary, nodal))
    }

    /// Scalar version of [`Mesh::interpolate`].
    pub fn interpolate_scalar(&self, nodal: &[T], p: Vec2<T>) -> Result<T> {
        check_len(nodal.len(), self.node_count())?;
        let (e, bary) = self.locate(p)?;
        let phi = shape_values(self.elements[e], bary);
        let nodes = self.elements[e];
        Ok(phi[0] * nodal[nodes[0]] + phi[1] * nodal[nodes[1]] + phi[2] * nodal[nodes[2]])
    }

    /// Samples a function at the nodes into an interleaved nodal vector.
    pub fn sample_nodal(&self, f: impl Fn(Vec2<T>) -> Vec2<T>) -> Vec<T> {
        let mut out = Vec::with_capacity(2 * self.node_count());
        for &x in &self.nodes {
            let v = f(x);
            out.push(v.x);
            out.push(v.y);
        }
        out
    }

    /// Undirected element edges, each listed once with the smaller index first.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .elements
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

#[inline]
pub(crate) fn interpolate_in<T: Real>(nodes: [usize; 3], bary: [T; 3], nodal: &[T]) -> Vec2<T> {
    let phi = shape_values(nodes, bary);
    let mut v = Vec2::zero();
    for k in 0..3 {
        let n = nodes[k];
        v += Vec2::new(nodal[2 * n], nodal[2 * n + 1]) * phi[k];
    }
    v
}

pub(crate) fn check_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

/// All quadrature points of a mesh, element-major then in rule order.
#[derive(Debug, Clone)]
pub struct QuadPointSet<T> {
    pub positions: Vec<Vec2<T>>,
    /// Reference weight times element area.
    pub weights: Vec<T>,
    pub element: Vec<usize>,
    pub bary: Vec<[T; 3]>,
}

impl<T: Real> QuadPointSet<T> {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Values of an interleaved nodal field at every quadrature point.
    pub fn interpolate(&self, mesh: &Mesh<T>, nodal: &[T]) -> Vec<Vec2<T>> {
        self.element
            .iter()
            .zip(&self.bary)
            .map(|(&e, &bary)| interpolate_in(mesh.elements[e], bary, nodal))
            .collect()
    }

    /// Discrete L2 norm of point samples, `sqrt(sum w |v|^2)`.
    pub fn l2_norm(&self, samples: &[Vec2<T>]) -> T {
        self.weights
            .iter()
            .zip(samples)
            .map(|(&w, v)| w * v.norm_squared())
            .sum::<T>()
            .sqrt()
    }
}

pub fn build_quad_points<T: Real>(mesh: &Mesh<T>, rule: &QuadratureRule<T>) -> QuadPointSet<T> {
    let n = mesh.element_count() * rule.len();
    let mut set = QuadPointSet {
        positions: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        element: Vec::with_capacity(n),
        bary: Vec::with_capacity(n),
    };
    for e in 0..mesh.element_count() {
        let area = mesh.element_area(e);
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            set.positions.push(mesh.point_at(e, *bary));
            set.weights.push(w * area);
            set.element.push(e);
            set.bary.push(*bary);
        }
    }
    set
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn partition_of_unity(x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let m = build_uniform_mesh(1.0, 1.0, 0.125, None).unwrap();
            let (e, bary) = m.locate(Vec2::new(x, y)).unwrap();
            let phi = shape_values(m.elements[e], bary);
            prop_assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            prop_assert!(phi.iter().all(|&p| p >= -1e-12));
        }
    }
}
