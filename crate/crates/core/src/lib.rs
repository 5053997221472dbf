//! State-based peridynamic fracture on linear finite elements with explicit
//! central-difference time stepping.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`); the
//! aliases below fix it to `f64`.

// `!(x > 0)` is used on purpose so that NaN is rejected too
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::excessive_precision,
    clippy::needless_range_loop
)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod integrate;
pub mod integrator;
pub mod io;
pub mod kernel;
pub mod material;
pub mod mesh;
pub mod quadrature;
pub mod scalar;
pub mod stability;
pub mod vec2;

pub use error::{Error, Result};
pub use scalar::Real;
pub use vec2::Vec2;

pub type Point = vec2::Vec2<f64>;
pub type Mesh = mesh::Mesh<f64>;
pub type QuadPointSet = mesh::QuadPointSet<f64>;
pub type MaterialModel = material::MaterialModel<f64>;
pub type NonlocalKernel = kernel::NonlocalKernel<f64>;
pub type Discretization = fem::Discretization<f64>;
pub type SparseMatrix = fem::SparseMatrix<f64>;
