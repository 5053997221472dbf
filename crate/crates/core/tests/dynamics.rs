mod common;

use common::*;
use perifem::config::InitialDisplacement;
use perifem::diagnostics::Diagnostics;
use perifem::experiment::{crack_preset, simulate, RunOptions};
use perifem::integrator::{BcSpec, CentralDifference, PeridynamicModel, TimeLoopConfig};
use perifem::kernel::ForceLaw;
use perifem::Vec2;

/// Largest `√E(t) − √E(0)` of a free nonlinear run, relative to `√E(0)`.
fn energy_excess(dt: f64, t_end: f64) -> f64 {
    let disc = square(0.012, 0.001, convex_material(0.004));
    let model = PeridynamicModel::new(&disc, ForceLaw::Nonlinear);
    let cd = CentralDifference::new(&model, BcSpec::none(), dt, 0.012);
    let diag = Diagnostics::new(&disc, 500.0, ForceLaw::Nonlinear);
    let pi = std::f64::consts::PI;
    let u0 = disc.mesh.sample_nodal(|x| {
        let s = 2e-5 * (pi * x.x / 0.012).sin() * (pi * x.y / 0.012).sin();
        Vec2::new(s, -0.5 * s)
    });
    let v0 = disc
        .mesh
        .sample_nodal(|x| Vec2::new(0.0, 2.0 * (2.0 * pi * x.x / 0.012).sin()));
    let cfg = TimeLoopConfig::new(dt, t_end, 1).unwrap();
    let mut roots = Vec::new();
    cd.run(cd.initial(u0, v0).unwrap(), &cfg, |s| {
        roots.push(diag.report(&s.u, &s.v)?.total.sqrt());
        Ok(())
    })
    .unwrap();
    roots
        .iter()
        .map(|r| (r - roots[0]) / roots[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn nonlinear_energy_stays_bounded() {
    let coarse = energy_excess(1e-8, 2e-6);
    let fine = energy_excess(5e-9, 2e-6);
    eprintln!("relative excess of sqrt(E): {coarse:e} at dt, {fine:e} at dt/2");
    assert!(coarse <= 1e-3, "{coarse}");
    assert!(fine <= 1e-3, "{fine}");
    assert!(fine <= coarse.max(0.0), "{fine} vs {coarse}");
}

#[test]
fn pinned_boundary_conserves_energy() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = crack_preset(0.02, 0.004, 0.002, 5e-8, 2e-6, dir.path()).unwrap();
    cfg.bc.speed = 0.0;
    cfg.initial.displacement = InitialDisplacement::Sine;
    cfg.initial.amplitude = 1e-6;
    cfg.output.cadence = 40;
    let opts = RunOptions {
        diagnostics: true,
        ..RunOptions::default()
    };
    let out = simulate(&cfg, 0.002, ForceLaw::Nonlinear, &opts).unwrap();
    let first = out.rows.first().unwrap().report.total;
    let last = out.rows.last().unwrap().report.total;
    assert_eq!(out.rows.last().unwrap().step, 40);
    assert!(
        (last - first).abs() <= 1e-3 * first.abs(),
        "{first} -> {last}"
    );
}
