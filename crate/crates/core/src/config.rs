//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! [domain]
//! width = 0.05
//! height = 0.05
//! crack = 0.025 0 0.025 0.01
//!
//! [material]
//! horizon = 0.004
//!
//! [discretization]
//! h = 0.001
//! dt = 5e-8
//! t_end = 1e-5
//! ```
//!
//! All quantities are SI. Keys not listed in [`KEYS`] are rejected.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::kernel::{BoundaryProfile, ForceLaw};
use crate::material::{HydrostaticKind, InflectionRule, InfluenceFunction};

/// Every accepted `section.key`.
pub const KEYS: &[&str] = &[
    "domain.width",
    "domain.height",
    "domain.crack",
    "material.density",
    "material.horizon",
    "material.bulk_modulus",
    "material.poisson_ratio",
    "material.fracture_toughness",
    "material.influence",
    "material.inflection",
    "material.hydrostatic",
    "material.hydrostatic_c",
    "material.hydrostatic_beta_plus",
    "material.hydrostatic_beta_minus",
    "discretization.h",
    "discretization.dt",
    "discretization.t_end",
    "discretization.quadrature_order",
    "discretization.boundary_profile",
    "discretization.force_law",
    "bc.enabled",
    "bc.collar",
    "bc.strip",
    "bc.speed",
    "initial.displacement",
    "initial.amplitude",
    "initial.velocity",
    "output.directory",
    "output.cadence",
    "output.vtk",
    "output.csv",
    "study.mesh_sizes",
    "study.times",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DomainConfig {
    pub width: f64,
    pub height: f64,
    /// `[x0, y0, x1, y1]`
    pub crack: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialConfig {
    pub density: f64,
    pub horizon: f64,
    pub bulk_modulus: f64,
    pub poisson_ratio: f64,
    pub fracture_toughness: f64,
    pub influence: InfluenceFunction,
    pub inflection: InflectionRule,
    pub hydrostatic: HydrostaticKind,
    /// Convex-concave `g` only: `c⁺`, `β⁺`, `β⁻`.
    pub hydrostatic_c: Option<f64>,
    pub hydrostatic_beta_plus: Option<f64>,
    pub hydrostatic_beta_minus: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationConfig {
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub quadrature_order: usize,
    pub boundary_profile: BoundaryProfile,
    pub force_law: ForceLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcConfig {
    pub enabled: bool,
    /// Collar thickness; the horizon when absent.
    pub collar: Option<f64>,
    /// Bottom strip thickness; the horizon when absent.
    pub strip: Option<f64>,
    /// Magnitude of the prescribed strip x-velocity.
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialDisplacement {
    Zero,
    /// `a sin(πx/W) sin(πy/H)` in both components.
    Sine,
}

impl InitialDisplacement {
    pub fn name(self) -> &'static str {
        match self {
            InitialDisplacement::Zero => "zero",
            InitialDisplacement::Sine => "sine",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConfig {
    pub displacement: InitialDisplacement,
    pub amplitude: f64,
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub cadence: usize,
    pub vtk: bool,
    pub csv: bool,
}

/// Mesh sizes of a refinement study, coarsest first, and comparison times.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub mesh_sizes: Vec<f64>,
    pub times: Vec<f64>,
}

impl StudySpec {
    /// Checks there are at least three sizes with a constant ratio above 1.
    pub fn ratio(&self) -> Result<f64> {
        let hs = &self.mesh_sizes;
        let bad = |m: &str| Error::ConfigValue {
            key: "study.mesh_sizes".into(),
            message: m.into(),
        };
        if hs.len() < 3 {
            return Err(bad("at least three mesh sizes are required"));
        }
        let r = hs[0] / hs[1];
        if !(r > 1.0) {
            return Err(bad("mesh sizes must be distinct and listed coarsest first"));
        }
        for w in hs.windows(2) {
            if ((w[0] / w[1]) - r).abs() > 1e-12 * r {
                return Err(bad("mesh sizes must form a constant ratio"));
            }
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub domain: DomainConfig,
    pub material: MaterialConfig,
    pub discretization: DiscretizationConfig,
    pub bc: BcConfig,
    pub initial: InitialConfig,
    pub output: OutputConfig,
    pub study: Option<StudySpec>,
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Table(std::collections::BTreeMap<String, Entry>);

fn value_err(key: &str, message: impl Into<String>) -> Error {
    Error::ConfigValue {
        key: key.into(),
        message: message.into(),
    }
}

impl Table {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.0.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn parse_with<V>(
        &mut self,
        key: &str,
        f: impl Fn(&str) -> Option<V>,
        what: &str,
    ) -> Result<Option<V>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => f(&v)
                .map(Some)
                .ok_or_else(|| value_err(key, format!("line {line}: expected {what}, got `{v}`"))),
        }
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        self.parse_with(
            key,
            |s| s.parse::<f64>().ok().filter(|v| v.is_finite()),
            "a finite number",
        )
    }

    fn required_float(&mut self, key: &str) -> Result<f64> {
        self.float(key)?
            .ok_or_else(|| value_err(key, "required key is missing"))
    }

    fn floats(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        self.parse_with(
            key,
            |s| {
                s.split_whitespace()
                    .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect::<Option<Vec<_>>>()
            },
            "whitespace-separated numbers",
        )
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.parse_with(key, |s| s.parse::<usize>().ok(), "a nonnegative integer")
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        self.parse_with(
            key,
            |s| match s {
                "true" | "yes" | "on" => Some(true),
                "false" | "no" | "off" => Some(false),
                _ => None,
            },
            "true or false",
        )
    }
}

fn suggest(key: &str) -> String {
    let (section, name) = key.split_once('.').unwrap_or(("", key));
    let best = KEYS
        .iter()
        .filter(|k| k.starts_with(&format!("{section}.")))
        .map(|k| (strsim::levenshtein(name, &k[section.len() + 1..]), *k))
        .min();
    match best {
        Some((d, k)) if d <= 3 => format!("; did you mean \"{}\"?", &k[section.len() + 1..]),
        _ => String::new(),
    }
}

fn tokenize(text: &str) -> Result<Table> {
    let mut map = std::collections::BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |m: String| Error::ConfigParse {
            line: line_no,
            message: m,
        };
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_err("unterminated section header".into()))?
                .trim();
            if !KEYS.iter().any(|k| k.starts_with(&format!("{name}."))) {
                return Err(parse_err(format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
        let sec = section
            .as_deref()
            .ok_or_else(|| parse_err("key before any [section] header".into()))?;
        let key = format!("{sec}.{}", k.trim());
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::ConfigValue {
                message: format!("line {line_no}: unknown key{}", suggest(&key)),
                key,
            });
        }
        if map.contains_key(&key) {
            return Err(parse_err(format!("duplicate key `{key}`")));
        }
        map.insert(
            key,
            Entry {
                value: v.trim().to_string(),
                line: line_no,
                used: false,
            },
        );
    }
    Ok(Table(map))
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(value_err(key, format!("must be positive, got {v}")))
    }
}

/// Parses and validates a configuration, applying defaults.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut t = tokenize(text)?;

    let width = positive("domain.width", t.required_float("domain.width")?)?;
    let height = positive("domain.height", t.required_float("domain.height")?)?;
    let crack = match t.floats("domain.crack")? {
        None => None,
        Some(v) if v.len() == 4 => Some([v[0], v[1], v[2], v[3]]),
        Some(_) => {
            return Err(value_err(
                "domain.crack",
                "expected four numbers x0 y0 x1 y1",
            ))
        }
    };
    if let Some(c) = crack {
        let inside = |x: f64, y: f64| (0.0..=width).contains(&x) && (0.0..=height).contains(&y);
        if !inside(c[0], c[1]) || !inside(c[2], c[3]) {
            return Err(value_err(
                "domain.crack",
                "endpoints must lie in the domain",
            ));
        }
        if c[0] == c[2] && c[1] == c[3] {
            return Err(value_err("domain.crack", "endpoints coincide"));
        }
    }

    let horizon = positive("material.horizon", t.required_float("material.horizon")?)?;
    let density = positive(
        "material.density",
        t.float("material.density")?.unwrap_or(1200.0),
    )?;
    let bulk_modulus = positive(
        "material.bulk_modulus",
        t.float("material.bulk_modulus")?.unwrap_or(25e9),
    )?;
    let poisson_ratio = t.float("material.poisson_ratio")?.unwrap_or(0.245);
    if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
        return Err(value_err("material.poisson_ratio", "must lie in (-1, 0.5)"));
    }
    let fracture_toughness = positive(
        "material.fracture_toughness",
        t.float("material.fracture_toughness")?.unwrap_or(500.0),
    )?;
    let influence = t
        .parse_with(
            "material.influence",
            InfluenceFunction::from_name,
            "one_minus_r, const or linear",
        )?
        .unwrap_or(InfluenceFunction::OneMinusR);
    let inflection = t
        .parse_with(
            "material.inflection",
            InflectionRule::from_name,
            "analytic or one_over_sqrt_beta",
        )?
        .unwrap_or(InflectionRule::Analytic);
    let hydrostatic = t
        .parse_with(
            "material.hydrostatic",
            HydrostaticKind::from_name,
            "quadratic or convex_concave",
        )?
        .unwrap_or(HydrostaticKind::Quadratic);
    let hydrostatic_c = t.float("material.hydrostatic_c")?;
    let hydrostatic_beta_plus = t.float("material.hydrostatic_beta_plus")?;
    let hydrostatic_beta_minus = t.float("material.hydrostatic_beta_minus")?;
    if hydrostatic == HydrostaticKind::ConvexConcave {
        for (k, v) in [
            ("material.hydrostatic_c", hydrostatic_c),
            ("material.hydrostatic_beta_plus", hydrostatic_beta_plus),
            ("material.hydrostatic_beta_minus", hydrostatic_beta_minus),
        ] {
            positive(
                k,
                v.ok_or_else(|| value_err(k, "required for a convex_concave potential"))?,
            )?;
        }
        if hydrostatic_beta_minus >= hydrostatic_beta_plus {
            return Err(value_err(
                "material.hydrostatic_beta_minus",
                "must be below hydrostatic_beta_plus",
            ));
        }
    }

    let h = positive("discretization.h", t.required_float("discretization.h")?)?;
    for (key, len) in [("domain.width", width), ("domain.height", height)] {
        let n = (len / h).round();
        if n < 1.0 || (n * h - len).abs() > 1e-9 * len {
            return Err(value_err(
                key,
                format!("mesh size {h} does not divide {len}"),
            ));
        }
    }
    let dt = positive("discretization.dt", t.required_float("discretization.dt")?)?;
    let t_end = t.required_float("discretization.t_end")?;
    if !(t_end >= dt) {
        return Err(value_err("discretization.t_end", "must be at least dt"));
    }
    let quadrature_order = t.usize("discretization.quadrature_order")?.unwrap_or(2);
    if !matches!(quadrature_order, 1..=4) {
        return Err(value_err(
            "discretization.quadrature_order",
            "supported orders are 1 to 4",
        ));
    }
    let boundary_profile = t
        .parse_with(
            "discretization.boundary_profile",
            BoundaryProfile::from_name,
            "smoothstep or none",
        )?
        .unwrap_or(BoundaryProfile::Smoothstep);
    let force_law = t
        .parse_with(
            "discretization.force_law",
            |s| match s {
                "nonlinear" => Some(ForceLaw::Nonlinear),
                "linearized" => Some(ForceLaw::Linearized),
                _ => None,
            },
            "nonlinear or linearized",
        )?
        .unwrap_or(ForceLaw::Nonlinear);

    let enabled = t.bool("bc.enabled")?.unwrap_or(true);
    let collar = t.float("bc.collar")?;
    let strip = t.float("bc.strip")?;
    for (k, v) in [("bc.collar", collar), ("bc.strip", strip)] {
        if v.is_some_and(|v| v < 0.0) {
            return Err(value_err(k, "must be nonnegative"));
        }
    }
    let speed = t.float("bc.speed")?.unwrap_or(1.0);

    let displacement = t
        .parse_with(
            "initial.displacement",
            |s| match s {
                "zero" => Some(InitialDisplacement::Zero),
                "sine" => Some(InitialDisplacement::Sine),
                _ => None,
            },
            "zero or sine",
        )?
        .unwrap_or(InitialDisplacement::Zero);
    let amplitude = t.float("initial.amplitude")?.unwrap_or(0.0);
    let velocity = match t.floats("initial.velocity")? {
        None => [0.0, 0.0],
        Some(v) if v.len() == 2 => [v[0], v[1]],
        Some(_) => return Err(value_err("initial.velocity", "expected two numbers vx vy")),
    };

    let directory = t
        .take("output.directory")
        .map_or_else(|| PathBuf::from("output"), |(v, _)| v.into());
    let cadence = t.usize("output.cadence")?.unwrap_or(100);
    if cadence == 0 {
        return Err(value_err("output.cadence", "must be at least 1"));
    }
    let vtk = t.bool("output.vtk")?.unwrap_or(true);
    let csv = t.bool("output.csv")?.unwrap_or(true);

    let mesh_sizes = t.floats("study.mesh_sizes")?;
    let times = t.floats("study.times")?;
    let study = match (mesh_sizes, times) {
        (None, None) => None,
        (Some(mesh_sizes), times) => {
            let s = StudySpec {
                mesh_sizes,
                times: times.unwrap_or_else(|| vec![t_end]),
            };
            s.ratio()?;
            if s.times.iter().any(|&x| !(x > 0.0 && x <= t_end)) {
                return Err(value_err(
                    "study.times",
                    "comparison times must lie in (0, t_end]",
                ));
            }
            Some(s)
        }
        (None, Some(_)) => {
            return Err(value_err(
                "study.mesh_sizes",
                "required when study.times is given",
            ))
        }
    };

    debug_assert!(t.0.values().all(|e| e.used));
    Ok(Config {
        domain: DomainConfig {
            width,
            height,
            crack,
        },
        material: MaterialConfig {
            density,
            horizon,
            bulk_modulus,
            poisson_ratio,
            fracture_toughness,
            influence,
            inflection,
            hydrostatic,
            hydrostatic_c,
            hydrostatic_beta_plus,
            hydrostatic_beta_minus,
        },
        discretization: DiscretizationConfig {
            h,
            dt,
            t_end,
            quadrature_order,
            boundary_profile,
            force_law,
        },
        bc: BcConfig {
            enabled,
            collar,
            strip,
            speed,
        },
        initial: InitialConfig {
            displacement,
            amplitude,
            velocity,
        },
        output: OutputConfig {
            directory,
            cadence,
            vtk,
            csv,
        },
        study,
    })
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl Config {
    /// Canonical text with every key spelled out; `parse_config` reads it back
    /// to an equal value.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let d = &self.domain;
        let _ = writeln!(
            s,
            "[domain]\nwidth = {:?}\nheight = {:?}",
            d.width, d.height
        );
        if let Some(c) = d.crack {
            let _ = writeln!(s, "crack = {}", join(&c));
        }
        let m = &self.material;
        let _ = writeln!(
            s,
            "\n[material]\ndensity = {:?}\nhorizon = {:?}\nbulk_modulus = {:?}\npoisson_ratio = {:?}\n\
             fracture_toughness = {:?}\ninfluence = {}\ninflection = {}\nhydrostatic = {}",
            m.density,
            m.horizon,
            m.bulk_modulus,
            m.poisson_ratio,
            m.fracture_toughness,
            m.influence.name(),
            m.inflection.name(),
            m.hydrostatic.name()
        );
        for (k, v) in [
            ("hydrostatic_c", m.hydrostatic_c),
            ("hydrostatic_beta_plus", m.hydrostatic_beta_plus),
            ("hydrostatic_beta_minus", m.hydrostatic_beta_minus),
        ] {
            if let Some(v) = v {
                let _ = writeln!(s, "{k} = {v:?}");
            }
        }
        let x = &self.discretization;
        let law = match x.force_law {
            ForceLaw::Nonlinear => "nonlinear",
            _ => "linearized",
        };
        let _ = writeln!(
            s,
            "\n[discretization]\nh = {:?}\ndt = {:?}\nt_end = {:?}\nquadrature_order = {}\nboundary_profile = {}\nforce_law = {}",
            x.h,
            x.dt,
            x.t_end,
            x.quadrature_order,
            x.boundary_profile.name(),
            law
        );
        let b = &self.bc;
        let _ = writeln!(s, "\n[bc]\nenabled = {}\nspeed = {:?}", b.enabled, b.speed);
        if let Some(c) = b.collar {
            let _ = writeln!(s, "collar = {c:?}");
        }
        if let Some(c) = b.strip {
            let _ = writeln!(s, "strip = {c:?}");
        }
        let i = &self.initial;
        let _ = writeln!(
            s,
            "\n[initial]\ndisplacement = {}\namplitude = {:?}\nvelocity = {}",
            i.displacement.name(),
            i.amplitude,
            join(&i.velocity)
        );
        let o = &self.output;
        let _ = writeln!(
            s,
            "\n[output]\ndirectory = {}\ncadence = {}\nvtk = {}\ncsv = {}",
            o.directory.display(),
            o.cadence,
            o.vtk,
            o.csv
        );
        if let Some(st) = &self.study {
            let _ = writeln!(
                s,
                "\n[study]\nmesh_sizes = {}\ntimes = {}",
                join(&st.mesh_sizes),
                join(&st.times)
            );
        }
        s
    }

    /// Collar thickness, defaulting to the horizon.
    pub fn collar(&self) -> f64 {
        self.bc.collar.unwrap_or(self.material.horizon)
    }

    /// Strip thickness, defaulting to the horizon.
    pub fn strip(&self) -> f64 {
        self.bc.strip.unwrap_or(self.material.horizon)
    }
}
