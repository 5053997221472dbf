//! Run orchestration behind the command-line subcommands.

use std::path::Path;

use crate::config::{parse_config, Config, InitialDisplacement, MaterialConfig};
use crate::diagnostics::{convergence_rate, strain_xx, Diagnostics, EnergyReport};
use crate::error::{Error, Result};
use crate::fem::Discretization;
use crate::integrator::{BcSpec, CentralDifference, PeridynamicModel, TimeLoopConfig};
use crate::io::{ensure_dir, snapshot_name, write_rate_csv, write_vtk, EnergyCsv, Snapshot};
use crate::kernel::ForceLaw;
use crate::material::{
    calibrate, Calibration, HydrostaticKind, HydrostaticPotential, MaterialModel, PairwisePotential,
};
use crate::mesh::{build_quad_points, build_uniform_mesh, CrackSegment, Mesh};
use crate::quadrature::QuadratureRule;
use crate::stability::{estimate_cfl, CflReport, PowerIteration};
use crate::vec2::Vec2;

/// Material model and the calibration it came from.
pub fn build_material(m: &MaterialConfig) -> Result<(MaterialModel<f64>, Calibration<f64>)> {
    let cal = calibrate(
        m.bulk_modulus,
        m.poisson_ratio,
        m.fracture_toughness,
        m.influence,
    )?;
    let f = PairwisePotential::new(cal.c, cal.beta, m.inflection)?;
    let g = match m.hydrostatic {
        HydrostaticKind::Quadratic => HydrostaticPotential::quadratic(cal.c_bar),
        HydrostaticKind::ConvexConcave => {
            let get = |v: Option<f64>, k: &str| {
                v.ok_or_else(|| Error::ConfigValue {
                    key: format!("material.{k}"),
                    message: "required for a convex_concave potential".into(),
                })
            };
            HydrostaticPotential::convex_concave(
                get(m.hydrostatic_c, "hydrostatic_c")?,
                get(m.hydrostatic_beta_plus, "hydrostatic_beta_plus")?,
                get(m.hydrostatic_beta_minus, "hydrostatic_beta_minus")?,
            )?
        }
    };
    Ok((
        MaterialModel::new(m.density, m.horizon, m.influence, f, g)?,
        cal,
    ))
}

/// Mesh of the configured domain with size `h`, and its quadrature points.
pub fn build_mesh(cfg: &Config, h: f64) -> Result<(Mesh<f64>, QuadratureRule<f64>)> {
    let crack = cfg
        .domain
        .crack
        .map(|c| CrackSegment::new(Vec2::new(c[0], c[1]), Vec2::new(c[2], c[3])))
        .transpose()?;
    let mesh = build_uniform_mesh(cfg.domain.width, cfg.domain.height, h, crack)?;
    let rule = QuadratureRule::of_order(cfg.discretization.quadrature_order).ok_or_else(|| {
        Error::ConfigValue {
            key: "discretization.quadrature_order".into(),
            message: "unsupported order".into(),
        }
    })?;
    Ok((mesh, rule))
}

/// Discretization of the configured domain with mesh size `h`.
pub fn build_discretization(cfg: &Config, h: f64) -> Result<Discretization<f64>> {
    let (material, _) = build_material(&cfg.material)?;
    let (mesh, rule) = build_mesh(cfg, h)?;
    Discretization::new(mesh, material, &rule, cfg.discretization.boundary_profile)
}

/// `U⁰`, `V⁰`. Fields already in the finite element space are taken nodally;
/// the sine displacement is L2-projected.
pub fn initial_fields(cfg: &Config, disc: &Discretization<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let (w, h) = (cfg.domain.width, cfg.domain.height);
    let a = cfg.initial.amplitude;
    let u0 = match cfg.initial.displacement {
        InitialDisplacement::Zero => vec![0.0; disc.dofs()],
        InitialDisplacement::Sine => disc.l2_project_fn(|x| {
            let s =
                a * (std::f64::consts::PI * x.x / w).sin() * (std::f64::consts::PI * x.y / h).sin();
            Vec2::new(s, s)
        })?,
    };
    let [vx, vy] = cfg.initial.velocity;
    let v0 = disc.mesh.sample_nodal(|_| Vec2::new(vx, vy));
    Ok((u0, v0))
}

pub fn boundary_conditions(cfg: &Config, disc: &Discretization<f64>) -> Result<BcSpec<f64>> {
    if !cfg.bc.enabled {
        return Ok(BcSpec::none());
    }
    BcSpec::crack_experiment(&disc.mesh, cfg.collar(), cfg.strip(), cfg.bc.speed).map_err(|e| {
        Error::ConfigValue {
            key: "bc.collar".into(),
            message: e.to_string(),
        }
    })
}

/// CFL estimate on a patch of the domain at most six horizons wide, with the
/// same mesh size, horizon and material. The linearized spectrum depends on
/// the horizon and mesh size, not on the extent of the domain.
pub fn cfl_patch_estimate(cfg: &Config, h: f64, seed: u64) -> Result<CflReport<f64>> {
    let (material, _) = build_material(&cfg.material)?;
    let side = |len: f64| {
        let cells = (len / h).round() as usize;
        let cap = ((6.0 * cfg.material.horizon) / h).ceil() as usize;
        cells.min(cap.max(1)) as f64 * h
    };
    let mesh = build_uniform_mesh(side(cfg.domain.width), side(cfg.domain.height), h, None)?;
    let rule =
        QuadratureRule::of_order(cfg.discretization.quadrature_order).expect("validated order");
    let disc = Discretization::new(mesh, material, &rule, cfg.discretization.boundary_profile)?;
    estimate_cfl(
        &disc,
        &PowerIteration {
            seed,
            ..PowerIteration::default()
        },
    )
}

/// Knobs of [`simulate`] that are not part of the configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Write the energy log, snapshots and run log to the output directory.
    pub write_outputs: bool,
    /// Evaluate energies and damage at the output cadence.
    pub diagnostics: bool,
    /// Keep the displacement at these times (rounded to the nearest step).
    pub capture_times: Vec<f64>,
    /// Skip the time-step check against the CFL estimate.
    pub skip_cfl: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub step: usize,
    pub t: f64,
    pub report: EnergyReport<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rows: Vec<EnergyRow>,
    /// `(time, U)` for each captured time.
    pub captures: Vec<(f64, Vec<f64>)>,
    pub final_u: Vec<f64>,
    pub final_v: Vec<f64>,
    pub steps: usize,
    pub cfl: Option<CflReport<f64>>,
    /// Number of nodes with `Z ≥ 1` at each emitted row.
    pub damaged_nodes: Vec<usize>,
}

/// Checks the time step against a CFL estimate.
pub fn check_time_step(cfg: &Config, h: f64, seed: u64) -> Result<CflReport<f64>> {
    let cfl = cfl_patch_estimate(cfg, h, seed)?;
    log::info!("CFL estimate: {}", cfl.to_json());
    if cfg.discretization.dt > cfl.dt_max {
        return Err(Error::ConfigValue {
            key: "discretization.dt".into(),
            message: format!(
                "time step {:e} exceeds the stability estimate {:e}",
                cfg.discretization.dt, cfl.dt_max
            ),
        });
    }
    Ok(cfl)
}

fn derived_quantities(cfg: &Config, cfl: Option<&CflReport<f64>>) -> Result<String> {
    let (m, cal) = build_material(&cfg.material)?;
    let mut s = format!(
        "# derived\n# c = {:e}\n# beta = {:e}\n# c_bar = {:e}\n# m_j = {:e}\n# r_plus = {:e}\n",
        cal.c, cal.beta, cal.c_bar, cal.m_j, m.pairwise.r_plus
    );
    if let Some(c) = cfl {
        s.push_str(&format!("# dt_max = {:e}\n", c.dt_max));
    }
    Ok(s)
}

/// Runs one simulation on mesh size `h` with force law `law`.
pub fn simulate(cfg: &Config, h: f64, law: ForceLaw, opts: &RunOptions) -> Result<RunOutcome> {
    let cfl = if opts.skip_cfl {
        None
    } else {
        Some(check_time_step(cfg, h, opts.seed)?)
    };
    let disc = build_discretization(cfg, h)?;
    log::info!(
        "mesh: {} nodes, {} quadrature points, {} bonds",
        disc.mesh.node_count(),
        disc.quad.len(),
        disc.kernel.table.bond_count()
    );
    let bc = boundary_conditions(cfg, &disc)?;
    let (u0, v0) = initial_fields(cfg, &disc)?;
    let model = PeridynamicModel::new(&disc, law);
    let size = cfg.domain.width.max(cfg.domain.height);
    let cd = CentralDifference::new(&model, bc, cfg.discretization.dt, size);
    let tl = TimeLoopConfig::new(cfg.discretization.dt, cfg.discretization.t_end, 1)?;
    let cadence = cfg.output.cadence;
    let diag = Diagnostics::new(&disc, cfg.material.fracture_toughness, law);

    let out_dir = &cfg.output.directory;
    let mut csv = None;
    if opts.write_outputs {
        ensure_dir(out_dir)?;
        let log_path = out_dir.join("run.log");
        let text = format!("{}\n{}", cfg.emit(), derived_quantities(cfg, cfl.as_ref())?);
        std::fs::write(&log_path, text).map_err(|e| Error::io(&log_path, e))?;
        if cfg.output.csv {
            csv = Some(EnergyCsv::create(&out_dir.join("energy.csv"))?);
        }
    }
    let capture_steps: Vec<(usize, f64)> = opts
        .capture_times
        .iter()
        .map(|&t| ((t / cfg.discretization.dt).round() as usize, t))
        .collect();

    let mut rows = Vec::new();
    let mut captures = Vec::new();
    let mut damaged_nodes = Vec::new();
    let end = cd.run(cd.initial(u0, v0)?, &tl, |s| {
        for &(k, t) in &capture_steps {
            if k == s.k {
                captures.push((t, s.u.clone()));
            }
        }
        if s.k % cadence != 0 || !(opts.diagnostics || opts.write_outputs) {
            return Ok(());
        }
        let damage = diag.damage(&s.u)?;
        let report = diag.report_with_damage(&s.u, &s.v, &damage)?;
        damaged_nodes.push(damage.iter().filter(|&&z| z >= 1.0).count());
        log::debug!("step {} t {:e} total {:e}", s.k, s.t, report.total);
        if let Some(c) = csv.as_mut() {
            c.row(s.k, s.t, &report)?;
        }
        if opts.write_outputs && cfg.output.vtk {
            let strain = strain_xx(&disc.mesh, &s.u)?;
            let snap = Snapshot {
                step: s.k,
                t: s.t,
                displacement: &s.u,
                velocity: &s.v,
                damage: &damage,
                strain_xx: &strain,
            };
            write_vtk(&out_dir.join(snapshot_name(s.k)), &disc.mesh, &snap)?;
        }
        rows.push(EnergyRow {
            step: s.k,
            t: s.t,
            report,
        });
        Ok(())
    })?;
    if let Some(c) = csv {
        c.finish()?;
    }
    Ok(RunOutcome {
        rows,
        captures,
        final_u: end.u,
        final_v: end.v,
        steps: end.k,
        cfl,
        damaged_nodes,
    })
}

/// The `run` subcommand.
pub fn cmd_run(cfg: &Config, law: ForceLaw, seed: u64) -> Result<RunOutcome> {
    simulate(
        cfg,
        cfg.discretization.h,
        law,
        &RunOptions {
            write_outputs: true,
            diagnostics: true,
            seed,
            ..RunOptions::default()
        },
    )
}

/// The `calibrate` subcommand: calibration and critical strain at bond length `ε`, as JSON.
pub fn cmd_calibrate(cfg: &Config) -> Result<String> {
    let (m, cal) = build_material(&cfg.material)?;
    let (sc_plus, _) = m.pairwise.critical_bond_strain(m.horizon)?;
    Ok(format!(
        "{{\"c\":{:e},\"beta\":{:e},\"c_bar\":{:e},\"m_j\":{:e},\"lambda\":{:e},\"mu\":{:e},\"s_c_plus_at_horizon\":{:e}}}",
        cal.c, cal.beta, cal.c_bar, cal.m_j, cal.lambda, cal.mu, sc_plus
    ))
}

/// The `cfl` subcommand on the configured mesh.
pub fn cmd_cfl(cfg: &Config, seed: u64) -> Result<CflReport<f64>> {
    let disc = build_discretization(cfg, cfg.discretization.h)?;
    estimate_cfl(
        &disc,
        &PowerIteration {
            seed,
            ..PowerIteration::default()
        },
    )
}

/// Displacement histories of the study meshes and the rates derived from them.
#[derive(Debug, Clone)]
pub struct StudyResult {
    /// `(time, α)`.
    pub rates: Vec<(f64, f64)>,
    /// Per mesh, the emitted energy rows (empty unless diagnostics were on).
    pub runs: Vec<RunOutcome>,
}

/// The `converge` subcommand. Runs every mesh of the study, samples the three
/// finest solutions at the quadrature points of the finest mesh and applies
/// the rate formula at each comparison time.
pub fn cmd_converge(
    cfg: &Config,
    law: ForceLaw,
    diagnostics: bool,
    seed: u64,
) -> Result<StudyResult> {
    let study = cfg.study.clone().ok_or_else(|| Error::ConfigValue {
        key: "study.mesh_sizes".into(),
        message: "a [study] section is required".into(),
    })?;
    let r = study.ratio()?;
    let hs = &study.mesh_sizes[study.mesh_sizes.len() - 3..];
    let mut runs = Vec::new();
    let mut meshes = Vec::new();
    for &h in hs {
        log::info!("study mesh h = {h:e}");
        let opts = RunOptions {
            diagnostics,
            capture_times: study.times.clone(),
            seed,
            ..RunOptions::default()
        };
        runs.push(simulate(cfg, h, law, &opts)?);
        let (mesh, rule) = build_mesh(cfg, h)?;
        let quad = build_quad_points(&mesh, &rule);
        meshes.push((mesh, quad));
    }
    let (fine_mesh, fine_quad) = &meshes[2];
    let sample = |i: usize, u: &[f64]| -> Result<Vec<Vec2<f64>>> {
        if i == 2 {
            return Ok(fine_quad.interpolate(fine_mesh, u));
        }
        fine_quad
            .positions
            .iter()
            .map(|&p| meshes[i].0.interpolate(u, p))
            .collect()
    };
    let mut rates = Vec::new();
    for (ti, &t) in study.times.iter().enumerate() {
        let fields: Vec<Vec<Vec2<f64>>> = (0..3)
            .map(|i| sample(i, &runs[i].captures[ti].1))
            .collect::<Result<_>>()?;
        let alpha = convergence_rate(&fields[0], &fields[1], &fields[2], &fine_quad.weights, r)?;
        log::info!("t = {t:e}: alpha = {alpha:.4}");
        rates.push((t, alpha));
    }
    Ok(StudyResult { rates, runs })
}

/// Writes the rate table of a study into the output directory.
pub fn write_study(cfg: &Config, result: &StudyResult) -> Result<()> {
    ensure_dir(&cfg.output.directory)?;
    write_rate_csv(&cfg.output.directory.join("rates.csv"), &result.rates)
}

/// Crack experiment on a `side` square: vertical pre-crack from the middle of
/// the bottom edge, one fifth of the side long, strips pulled apart at 1 m/s.
pub fn crack_preset(
    side: f64,
    horizon: f64,
    h: f64,
    dt: f64,
    t_end: f64,
    out: &Path,
) -> Result<Config> {
    parse_config(&format!(
        "[domain]\nwidth = {side:?}\nheight = {side:?}\ncrack = {:?} 0 {:?} {:?}\n\
         [material]\nhorizon = {horizon:?}\n\
         [discretization]\nh = {h:?}\ndt = {dt:?}\nt_end = {t_end:?}\n\
         [output]\ndirectory = {}\ncadence = 20\nvtk = false\n",
        side / 2.0,
        side / 2.0,
        side / 5.0,
        out.display()
    ))
}

/// Smooth problem without crack or boundary driving: sine initial displacement
/// of amplitude `amplitude` on a `side` square.
pub fn manufactured_preset(
    side: f64,
    horizon: f64,
    h: f64,
    dt: f64,
    t_end: f64,
    amplitude: f64,
) -> Result<Config> {
    parse_config(&format!(
        "[domain]\nwidth = {side:?}\nheight = {side:?}\n\
         [material]\nhorizon = {horizon:?}\n\
         [discretization]\nh = {h:?}\ndt = {dt:?}\nt_end = {t_end:?}\n\
         [bc]\nenabled = false\n\
         [initial]\ndisplacement = sine\namplitude = {amplitude:?}\n\
         [output]\ncadence = 1000000\nvtk = false\ncsv = false\n"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_crack(dir: &Path) -> Config {
        let mut c = crack_preset(0.02, 0.004, 0.002, 5e-8, 5e-7, dir).unwrap();
        c.output.cadence = 2;
        c
    }

    #[test]
    fn calibrate_json() {
        let c = small_crack(Path::new("unused"));
        let json = cmd_calibrate(&c).unwrap();
        assert!(json.starts_with("{\"c\":4.71238898"), "{json}");
        assert!(json.contains("\"beta\":1.564"));
        assert!(json.contains("\"c_bar\":-1.734"));
    }

    #[test]
    fn run_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_crack(&dir.path().join("nested/out"));
        c.output.vtk = true;
        let out = cmd_run(&c, ForceLaw::Nonlinear, 1).unwrap();
        assert_eq!(out.steps, 10);
        let csv = std::fs::read_to_string(dir.path().join("nested/out/energy.csv")).unwrap();
        // header + 1 + steps / cadence
        assert_eq!(csv.lines().count(), 1 + 1 + 10 / 2);
        assert!(dir.path().join("nested/out/fields_00000010.vtk").exists());
        let log = std::fs::read_to_string(dir.path().join("nested/out/run.log")).unwrap();
        let echoed = parse_config(&log).unwrap();
        assert_eq!(echoed, c);
        assert!(out.rows.iter().all(|r| r.report.kinetic >= 0.0));
    }

    #[test]
    fn oversized_time_step_is_rejected() {
        let mut c = small_crack(Path::new("unused"));
        c.discretization.dt = 1e-5;
        c.discretization.t_end = 1e-5;
        let e = simulate(&c, 0.002, ForceLaw::Nonlinear, &RunOptions::default()).unwrap_err();
        assert!(e.to_string().contains("discretization.dt"), "{e}");
    }
}
