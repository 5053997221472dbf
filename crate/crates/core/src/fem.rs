//! Finite element assembly on P1 triangles: mass matrices, nonlocal and body
//! force vectors, and the L2 projection.
//!
//! Nodal vectors are interleaved, `[u0x, u0y, u1x, u1y, ...]`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::{BoundaryProfile, ForceLaw, NonlocalKernel};
use crate::material::MaterialModel;
use crate::mesh::{build_quad_points, check_len, shape_values, Mesh, QuadPointSet};
use crate::quadrature::QuadratureRule;
use crate::scalar::Real;
use crate::vec2::Vec2;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Real> SparseMatrix<T> {
    /// Sums duplicate entries.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                let k = values.len() - 1;
                values[k] = values[k] + v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        Self {
            n: diag.len(),
            row_ptr: (0..=diag.len()).collect(),
            col_idx: (0..diag.len()).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map_or(T::zero(), |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `max |a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// MatrixMarket coordinate format, 1-based indices.
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
            writeln!(w, "{} {} {}", self.n, self.n, self.nnz())?;
            for i in 0..self.n {
                for (j, v) in self.row(i) {
                    writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
                }
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Consistent mass matrix `∫ ρ Nᵀ N`, one scalar block per displacement component.
pub fn assemble_mass<T: Real>(mesh: &Mesh<T>, density: T) -> SparseMatrix<T> {
    let mut trip = Vec::with_capacity(mesh.element_count() * 18);
    let twelfth = T::one() / T::lit(12.0);
    for (e, nodes) in mesh.elements.iter().enumerate() {
        let m = density * mesh.element_area(e) * twelfth;
        for a in 0..3 {
            for b in 0..3 {
                let v = if a == b { m + m } else { m };
                for c in 0..2 {
                    trip.push((2 * nodes[a] + c, 2 * nodes[b] + c, v));
                }
            }
        }
    }
    SparseMatrix::from_triplets(2 * mesh.node_count(), trip)
}

/// Row-sum lumping. Fails on a nonpositive row sum, which signals a degenerate mesh.
pub fn lump<T: Real>(m: &SparseMatrix<T>) -> Result<SparseMatrix<T>> {
    let sums = m.row_sums();
    if let Some(i) = sums.iter().position(|&s| !(s > T::zero())) {
        return Err(Error::Mesh(format!("nonpositive lumped mass in row {i}")));
    }
    Ok(SparseMatrix::from_diagonal(&sums))
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive definite
/// matrix.
pub fn conjugate_gradient<T: Real>(
    a: &SparseMatrix<T>,
    b: &[T],
    rel_tol: T,
    max_iter: usize,
) -> Result<Vec<T>> {
    let n = a.n;
    check_len(b.len(), n)?;
    let inv_diag: Vec<T> = a.diagonal().iter().map(|&d| T::one() / d).collect();
    let dot = |x: &[T], y: &[T]| x.iter().zip(y).map(|(&a, &b)| a * b).sum::<T>();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![T::zero(); n];
    if b_norm == T::zero() {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&r, &d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        a.mul_vec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= rel_tol * b_norm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        solver: "conjugate gradient",
        iterations: max_iter,
        residual: (dot(&r, &r).sqrt() / b_norm).to_f64_lossy(),
    })
}

/// Mesh, quadrature, nonlocal kernel and mass matrices of one discretization.
#[derive(Debug, Clone)]
pub struct Discretization<T> {
    pub mesh: Mesh<T>,
    pub quad: QuadPointSet<T>,
    pub kernel: NonlocalKernel<T>,
    pub mass: SparseMatrix<T>,
    /// Diagonal of the lumped mass matrix.
    pub lumped: Vec<T>,
}

impl<T: Real> Discretization<T> {
    pub fn new(
        mesh: Mesh<T>,
        material: MaterialModel<T>,
        rule: &QuadratureRule<T>,
        profile: BoundaryProfile,
    ) -> Result<Self> {
        let quad = build_quad_points(&mesh, rule);
        let kernel =
            NonlocalKernel::new(&quad, material, mesh.domain, mesh.crack.as_ref(), profile);
        let mass = assemble_mass(&mesh, material.density);
        let lumped = lump(&mass)?.values;
        Ok(Self {
            mesh,
            quad,
            kernel,
            mass,
            lumped,
        })
    }

    pub fn dofs(&self) -> usize {
        2 * self.mesh.node_count()
    }

    pub fn material(&self) -> &MaterialModel<T> {
        &self.kernel.material
    }

    /// Adds `w_p φ_i(x_p) v_p` into the rows of each point's element nodes, in
    /// point order.
    pub fn scatter(&self, values: &[Vec2<T>], out: &mut [T]) {
        for p in 0..self.quad.len() {
            let nodes = self.mesh.elements[self.quad.element[p]];
            let phi = shape_values(nodes, self.quad.bary[p]);
            let wv = values[p] * self.quad.weights[p];
            for k in 0..3 {
                out[2 * nodes[k]] = out[2 * nodes[k]] + wv.x * phi[k];
                out[2 * nodes[k] + 1] = out[2 * nodes[k] + 1] + wv.y * phi[k];
            }
        }
    }

    /// `F_pd = ∫ Nᵀ L^ε(u_h)`.
    pub fn assemble_pd_force(&self, u: &[T], law: ForceLaw) -> Result<Vec<T>> {
        check_len(u.len(), self.dofs())?;
        let uq = self.quad.interpolate(&self.mesh, u);
        let (_, forces) = self.kernel.force_densities(&uq, law)?;
        let mut out = vec![T::zero(); self.dofs()];
        self.scatter(&forces, &mut out);
        Ok(out)
    }

    /// `∫ Nᵀ b(x, t)`.
    pub fn assemble_body_force(&self, t: T, body: &dyn Fn(Vec2<T>, T) -> Vec2<T>) -> Vec<T> {
        let values: Vec<Vec2<T>> = self.quad.positions.iter().map(|&x| body(x, t)).collect();
        let mut out = vec![T::zero(); self.dofs()];
        self.scatter(&values, &mut out);
        out
    }

    /// `F = F_pd + ∫ Nᵀ b`, assembled point by point.
    pub fn assemble_force(
        &self,
        u: &[T],
        t: T,
        body: Option<&dyn Fn(Vec2<T>, T) -> Vec2<T>>,
        law: ForceLaw,
    ) -> Result<Vec<T>> {
        check_len(u.len(), self.dofs())?;
        let uq = self.quad.interpolate(&self.mesh, u);
        let (_, mut values) = self.kernel.force_densities(&uq, law)?;
        if let Some(b) = body {
            for (v, &x) in values.iter_mut().zip(&self.quad.positions) {
                *v += b(x, t);
            }
        }
        let mut out = vec![T::zero(); self.dofs()];
        self.scatter(&values, &mut out);
        Ok(out)
    }

    /// `K_l u = -F_pd,l(u)`, so that `a_l(u, v) = vᵀ K_l u`.
    pub fn apply_linearized_operator(&self, u: &[T]) -> Result<Vec<T>> {
        self.apply_stiffness(u, ForceLaw::Linearized)
    }

    /// `-F_pd(u)` under a linearized law.
    pub fn apply_stiffness(&self, u: &[T], law: ForceLaw) -> Result<Vec<T>> {
        let mut f = self.assemble_pd_force(u, law)?;
        for v in &mut f {
            *v = -*v;
        }
        Ok(f)
    }

    /// L2 projection onto the P1 space of values sampled at the quadrature points.
    pub fn l2_project(&self, samples: &[Vec2<T>]) -> Result<Vec<T>> {
        check_len(samples.len(), self.quad.len())?;
        let mut rhs = vec![T::zero(); self.dofs()];
        self.scatter(samples, &mut rhs);
        // the stored mass carries the density
        let rho = self.material().density;
        for v in &mut rhs {
            *v = *v * rho;
        }
        conjugate_gradient(&self.mass, &rhs, T::lit(1e-12), 10 * self.dofs())
    }

    /// L2 projection of a function of position.
    pub fn l2_project_fn(&self, f: impl Fn(Vec2<T>) -> Vec2<T>) -> Result<Vec<T>> {
        let samples: Vec<Vec2<T>> = self.quad.positions.iter().map(|&x| f(x)).collect();
        self.l2_project(&samples)
    }

    /// `uᵀ M̂ v` with the lumped mass.
    pub fn lumped_inner(&self, u: &[T], v: &[T]) -> T {
        self.lumped
            .iter()
            .zip(u.iter().zip(v))
            .map(|(&m, (&a, &b))| m * a * b)
            .sum()
    }
}
