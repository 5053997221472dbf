#![allow(dead_code)]

use perifem::fem::Discretization;
use perifem::integrator::{BcSpec, CentralDifference, PeridynamicModel, TimeLoopConfig};
use perifem::kernel::{BoundaryProfile, ForceLaw};
use perifem::material::{
    calibrate, HydrostaticPotential, InflectionRule, InfluenceFunction, MaterialModel,
    PairwisePotential,
};
use perifem::mesh::build_uniform_mesh;
use perifem::quadrature::QuadratureRule;
use perifem::stability::discrete_energy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DENSITY: f64 = 1200.0;

/// Plexiglass constants at horizon `eps`.
pub fn plexiglass(eps: f64) -> MaterialModel<f64> {
    let cal = calibrate(25e9, 0.245, 500.0, InfluenceFunction::OneMinusR).unwrap();
    let f = PairwisePotential::new(cal.c, cal.beta, InflectionRule::Analytic).unwrap();
    let g = HydrostaticPotential::quadratic(cal.c_bar);
    MaterialModel::new(DENSITY, eps, InfluenceFunction::OneMinusR, f, g).unwrap()
}

/// Same bond potential, but a convex quadratic hydrostatic part.
pub fn convex_material(eps: f64) -> MaterialModel<f64> {
    let mut m = plexiglass(eps);
    m.hydrostatic = HydrostaticPotential::quadratic(1.0e11);
    m
}

pub fn square(side: f64, h: f64, material: MaterialModel<f64>) -> Discretization<f64> {
    let mesh = build_uniform_mesh(side, side, h, None).unwrap();
    Discretization::new(
        mesh,
        material,
        &QuadratureRule::interior_three_point(),
        BoundaryProfile::Smoothstep,
    )
    .unwrap()
}

pub fn random_vec(n: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Dense `n x n` matrix of a linear operator, column by column.
pub fn dense(disc: &Discretization<f64>, law: ForceLaw) -> Vec<Vec<f64>> {
    let n = disc.dofs();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cols.push(disc.apply_stiffness(&e, law).unwrap());
    }
    cols
}

/// Largest eigenvalue of `M^{-1/2} K M^{-1/2}` from a dense symmetric eigensolver.
pub fn dense_lambda_max(disc: &Discretization<f64>, law: ForceLaw) -> f64 {
    let n = disc.dofs();
    let cols = dense(disc, law);
    let s: Vec<f64> = disc.lumped.iter().map(|m| 1.0 / m.sqrt()).collect();
    let a = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (cols[j][i] + cols[i][j]) * s[i] * s[j]);
    let eig = nalgebra::SymmetricEigen::new(a);
    eig.eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Discrete energies of a linearized run; stops early on blow-up.
pub fn energy_history(
    disc: &Discretization<f64>,
    dt: f64,
    steps: usize,
    seed: u64,
) -> (Vec<f64>, bool) {
    let model = PeridynamicModel::new(disc, ForceLaw::Linearized);
    let cd = CentralDifference::new(&model, BcSpec::none(), dt, 1.0);
    let n = disc.dofs();
    let u0 = random_vec(n, 1e-6, seed);
    let v0 = random_vec(n, 1e-2, seed + 1);
    let cfg = TimeLoopConfig::new(dt, steps as f64 * dt, 1).unwrap();
    let op = |u: &[f64]| disc.apply_stiffness(u, ForceLaw::Linearized);
    let mut energies = Vec::new();
    let finished = cd
        .run(cd.initial(u0, v0).unwrap(), &cfg, |s| {
            if s.k > 0 {
                energies.push(discrete_energy(&s.u_prev, &s.u, dt, &op, &disc.lumped)?);
            }
            Ok(())
        })
        .is_ok();
    (energies, finished)
}

pub fn max_drift(e: &[f64]) -> f64 {
    e.iter()
        .map(|&x| (x - e[0]).abs() / e[0].abs())
        .fold(0.0, f64::max)
}
