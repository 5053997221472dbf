//! Output files: legacy VTK field snapshots and the energy log.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::EnergyReport;
use crate::error::{Error, Result};
use crate::mesh::{check_len, Mesh};
use crate::scalar::Real;

/// Damage values above this are clipped in snapshots.
pub const DAMAGE_CAP: f64 = 5.0;

pub const ENERGY_HEADER: &str = "step,t,kinetic,potential,total,crack_length,pe_crack,ge";

/// `fields_{step:08}.vtk`
pub fn snapshot_name(step: usize) -> String {
    format!("fields_{step:08}.vtk")
}

/// Creates `dir` and its parents if needed.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Nodal fields of one snapshot. Vectors are interleaved like displacements.
pub struct Snapshot<'a, T> {
    pub step: usize,
    pub t: T,
    pub displacement: &'a [T],
    pub velocity: &'a [T],
    pub damage: &'a [T],
    pub strain_xx: &'a [T],
}

fn g9<T: Real>(v: T) -> String {
    format!("{:.8e}", v.to_f64_lossy())
}

/// Writes a legacy ASCII VTK 3.0 unstructured grid of triangles.
pub fn write_vtk<T: Real>(path: &Path, mesh: &Mesh<T>, snap: &Snapshot<'_, T>) -> Result<()> {
    let n = mesh.node_count();
    check_len(snap.displacement.len(), 2 * n)?;
    check_len(snap.velocity.len(), 2 * n)?;
    check_len(snap.damage.len(), n)?;
    check_len(snap.strain_xx.len(), n)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "perifem step {} t {}", snap.step, g9(snap.t))?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {n} double")?;
        for p in &mesh.nodes {
            writeln!(w, "{} {} 0", g9(p.x), g9(p.y))?;
        }
        let ne = mesh.element_count();
        writeln!(w, "CELLS {ne} {}", 4 * ne)?;
        for e in &mesh.elements {
            writeln!(w, "3 {} {} {}", e[0], e[1], e[2])?;
        }
        writeln!(w, "CELL_TYPES {ne}")?;
        for _ in 0..ne {
            writeln!(w, "5")?;
        }
        writeln!(w, "POINT_DATA {n}")?;
        for (name, v) in [
            ("displacement", snap.displacement),
            ("velocity", snap.velocity),
        ] {
            writeln!(w, "VECTORS {name} double")?;
            for c in v.chunks_exact(2) {
                writeln!(w, "{} {} 0", g9(c[0]), g9(c[1]))?;
            }
        }
        let cap = T::lit(DAMAGE_CAP);
        writeln!(w, "SCALARS Z double 1\nLOOKUP_TABLE default")?;
        for &z in snap.damage {
            writeln!(w, "{}", g9(z.min(cap)))?;
        }
        writeln!(w, "SCALARS strain_xx double 1\nLOOKUP_TABLE default")?;
        for &e in snap.strain_xx {
            writeln!(w, "{}", g9(e))?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

/// Append-only energy log with the fixed header.
pub struct EnergyCsv {
    path: PathBuf,
    w: BufWriter<File>,
}

impl EnergyCsv {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut csv = Self {
            path: path.to_path_buf(),
            w: BufWriter::new(file),
        };
        writeln!(csv.w, "{ENERGY_HEADER}").map_err(|e| Error::io(path, e))?;
        Ok(csv)
    }

    pub fn row<T: Real>(&mut self, step: usize, t: T, r: &EnergyReport<T>) -> Result<()> {
        writeln!(self.w, "{}", energy_row(step, t, r)).map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// One CSV line; values use the shortest representation that round-trips.
pub fn energy_row<T: Real>(step: usize, t: T, r: &EnergyReport<T>) -> String {
    let f = |v: T| format!("{:e}", v.to_f64_lossy());
    format!(
        "{step},{},{},{},{},{},{},{}",
        f(t),
        f(r.kinetic),
        f(r.potential),
        f(r.total),
        f(r.crack_length),
        f(r.pe_crack),
        f(r.griffith)
    )
}

/// `(time, α)` rows of a convergence study.
pub fn write_rate_csv(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    let mut text = String::from("time,alpha\n");
    for (t, a) in rows {
        text.push_str(&format!("{t:e},{a}\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
