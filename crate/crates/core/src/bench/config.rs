//! Flat `key = value` run configuration.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment; blank
//! lines are ignored; keys are unique. Unknown keys are errors. See the
//! repository docs for the key list and defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::assembly::FormKind;
use crate::timestep::{NewtonConfig, SchemeConfig, TimeScheme};

use super::problems::{LatticeBoundary, ProblemSpec};
use super::BenchError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub scheme: SchemeConfig,
    pub t_end: f64,
    pub output_dir: PathBuf,
    /// Steps between VTK snapshots; 0 disables snapshots.
    pub snapshot_interval: usize,
    /// Steps between CSV rows.
    pub diagnostics_interval: usize,
    /// Start of the window for lift/drag extrema.
    pub stats_start: f64,
}

const KEYS: &[&str] = &[
    "problem",
    "n",
    "nu",
    "re",
    "mesh_file",
    "lattice_boundary",
    "form",
    "scheme",
    "dt",
    "t_end",
    "gamma",
    "newton_abs_tol",
    "newton_rel_tol",
    "newton_max_iter",
    "extrapolate",
    "output_dir",
    "snapshot_interval",
    "diagnostics_interval",
    "stats_start",
];

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, BenchError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| BenchError::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(BenchError::Config(format!("line {}: unknown key '{k}'", i + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(BenchError::Config(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(map)
}

struct Getter<'a>(&'a BTreeMap<String, String>);

impl Getter<'_> {
    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, BenchError>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| BenchError::Config(format!("key '{key}': cannot parse '{v}': {e}"))),
        }
    }

    fn require(&self, key: &str) -> Result<&str, BenchError> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| BenchError::Config(format!("missing required key '{key}'")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    fn from_pairs(map: &BTreeMap<String, String>) -> Result<Self, BenchError> {
        let g = Getter(map);
        let problem = match g.require("problem")? {
            "lattice_vortex" => ProblemSpec::LatticeVortex {
                n: g.get("n", 32)?,
                nu: g.get("nu", 0.01)?,
                boundary: g.get("lattice_boundary", LatticeBoundary::Exact)?,
            },
            "kelvin_helmholtz" => ProblemSpec::KelvinHelmholtz {
                n: g.get("n", 64)?,
                re: g.get("re", 100.0)?,
            },
            "cylinder" => ProblemSpec::Cylinder {
                mesh_file: PathBuf::from(g.require("mesh_file")?),
                nu: g.get("nu", 0.0005)?,
            },
            other => {
                return Err(BenchError::Config(format!(
                    "unknown problem '{other}' (expected lattice_vortex, kelvin_helmholtz or cylinder)"
                )))
            }
        };
        let irrelevant: &[&str] = match problem {
            ProblemSpec::LatticeVortex { .. } => &["re", "mesh_file"],
            ProblemSpec::KelvinHelmholtz { .. } => &["nu", "mesh_file", "lattice_boundary"],
            ProblemSpec::Cylinder { .. } => &["n", "re", "lattice_boundary"],
        };
        if let Some(k) = irrelevant.iter().find(|k| map.contains_key(**k)) {
            return Err(BenchError::Config(format!(
                "key '{k}' does not apply to problem '{}'",
                problem.name()
            )));
        }
        let default_scheme = match problem {
            ProblemSpec::LatticeVortex { .. } => TimeScheme::CrankNicolson,
            _ => TimeScheme::Bdf2,
        };
        let newton = NewtonConfig {
            abs_tol: g.get("newton_abs_tol", NewtonConfig::default().abs_tol)?,
            rel_tol: g.get("newton_rel_tol", NewtonConfig::default().rel_tol)?,
            max_iter: g.get("newton_max_iter", NewtonConfig::default().max_iter)?,
        };
        let scheme = SchemeConfig {
            form: g.get("form", FormKind::Emac)?,
            scheme: g.get("scheme", default_scheme)?,
            dt: g.get("dt", 0.001)?,
            nu: problem.viscosity(),
            gamma: g.get("gamma", 0.0)?,
            newton,
            extrapolate: g.get("extrapolate", true)?,
        };
        let config = RunConfig {
            problem,
            scheme,
            t_end: g.get("t_end", 1.0)?,
            output_dir: PathBuf::from(g.get("output_dir", "emaclab-out".to_string())?),
            snapshot_interval: g.get("snapshot_interval", 0)?,
            diagnostics_interval: g.get("diagnostics_interval", 1)?,
            stats_start: g.get("stats_start", 7.0)?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.scheme.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        self.problem.validate()?;
        let dt = self.scheme.dt;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(BenchError::Config(format!("dt must be positive, got {dt}")));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(BenchError::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        let steps = self.steps();
        if ((steps as f64) * dt - self.t_end).abs() > 1e-9 * self.t_end.max(1.0) {
            return Err(BenchError::Config(format!(
                "t_end = {} is not a whole number of steps of dt = {dt}",
                self.t_end
            )));
        }
        if self.diagnostics_interval == 0 || !steps.is_multiple_of(self.diagnostics_interval) {
            return Err(BenchError::Config(format!(
                "diagnostics_interval = {} must be positive and divide the step count {steps}",
                self.diagnostics_interval
            )));
        }
        if self.snapshot_interval != 0 && !steps.is_multiple_of(self.snapshot_interval) {
            return Err(BenchError::Config(format!(
                "snapshot_interval = {} must divide the step count {steps}",
                self.snapshot_interval
            )));
        }
        if self.scheme.gamma < 0.0 {
            return Err(BenchError::Config("gamma must be nonnegative".into()));
        }
        Ok(())
    }

    /// Applies `key=value` overrides on top of this configuration.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, BenchError> {
        let mut map = parse_pairs(&self.to_text())?;
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("override '{o}' is not key=value")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(BenchError::Config(format!("unknown key '{k}'")));
            }
            map.insert(k.to_string(), v.to_string());
        }
        // keys that belong to another problem are dropped when the problem changes
        if let Some(p) = map.get("problem").cloned() {
            let keep: &[&str] = match p.as_str() {
                "lattice_vortex" => &["re", "mesh_file"],
                "kelvin_helmholtz" => &["nu", "mesh_file", "lattice_boundary"],
                "cylinder" => &["n", "re", "lattice_boundary"],
                _ => &[],
            };
            let explicit: Vec<&str> = overrides
                .iter()
                .filter_map(|o| o.as_ref().split_once('=').map(|(k, _)| k.trim()))
                .collect();
            for k in keep {
                if !explicit.contains(k) {
                    map.remove(*k);
                }
            }
        }
        Self::from_pairs(&map)
    }

    /// Canonical text form; parsing it reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("problem", self.problem.name().to_string());
        match &self.problem {
            ProblemSpec::LatticeVortex { n, nu, boundary } => {
                kv("n", n.to_string());
                kv("nu", format!("{nu:?}"));
                kv("lattice_boundary", boundary.as_str().to_string());
            }
            ProblemSpec::KelvinHelmholtz { n, re } => {
                kv("n", n.to_string());
                kv("re", format!("{re:?}"));
            }
            ProblemSpec::Cylinder { mesh_file, nu } => {
                kv("mesh_file", mesh_file.display().to_string());
                kv("nu", format!("{nu:?}"));
            }
        }
        let sc = &self.scheme;
        kv("form", sc.form.to_string());
        kv("scheme", sc.scheme.to_string());
        kv("dt", format!("{:?}", sc.dt));
        kv("t_end", format!("{:?}", self.t_end));
        kv("gamma", format!("{:?}", sc.gamma));
        kv("newton_abs_tol", format!("{:?}", sc.newton.abs_tol));
        kv("newton_rel_tol", format!("{:?}", sc.newton.rel_tol));
        kv("newton_max_iter", sc.newton.max_iter.to_string());
        kv("extrapolate", sc.extrapolate.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv("snapshot_interval", self.snapshot_interval.to_string());
        kv("diagnostics_interval", self.diagnostics_interval.to_string());
        kv("stats_start", format!("{:?}", self.stats_start));
        s
    }
}

/// Path of a mesh shipped with the crate.
pub fn shipped_mesh(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("meshes").join(name)
}

pub const PRESETS: &[(&str, &str)] = &[
    ("lattice-desk", "lattice vortex, n=32, nu=1e-5, CN, dt=2e-3, T=5"),
    ("lattice-full", "lattice vortex, n=64, nu=1e-5, CN, dt=1e-3, T=10 (long-running)"),
    ("kh-desk", "Kelvin-Helmholtz, n=64, Re=100, BDF2, dt=2e-3, T=5"),
    ("kh-full", "Kelvin-Helmholtz, n=196, Re=1000, BDF2, dt=1e-3, T=10 (long-running)"),
    ("cylinder-desk", "cylinder, coarse mesh, Re=200, BDF2, dt=2e-3, T=10 (hours)"),
    ("cylinder-full", "cylinder, fine mesh, Re=200, BDF2, dt=1e-3, T=10 (long-running)"),
];

pub fn preset(name: &str) -> Result<RunConfig, BenchError> {
    let text = match name {
        "lattice-desk" => "problem = lattice_vortex\nn = 32\nnu = 1e-5\nscheme = cn\ndt = 0.002\nt_end = 5\noutput_dir = out/lattice-desk\n".to_string(),
        "lattice-full" => "problem = lattice_vortex\nn = 64\nnu = 1e-5\nscheme = cn\ndt = 0.001\nt_end = 10\noutput_dir = out/lattice-full\n".to_string(),
        "kh-desk" => "problem = kelvin_helmholtz\nn = 64\nre = 100\nscheme = bdf2\ndt = 0.002\nt_end = 5\noutput_dir = out/kh-desk\n".to_string(),
        "kh-full" => "problem = kelvin_helmholtz\nn = 196\nre = 1000\nscheme = bdf2\ndt = 0.001\nt_end = 10\noutput_dir = out/kh-full\n".to_string(),
        "cylinder-desk" => format!(
            "problem = cylinder\nmesh_file = {}\nscheme = bdf2\ndt = 0.002\nt_end = 10\nstats_start = 7\noutput_dir = out/cylinder-desk\n",
            shipped_mesh("cylinder-coarse.msh").display()
        ),
        "cylinder-full" => format!(
            "problem = cylinder\nmesh_file = {}\nscheme = bdf2\ndt = 0.001\nt_end = 10\nstats_start = 7\noutput_dir = out/cylinder-full\n",
            shipped_mesh("cylinder-fine.msh").display()
        ),
        _ => {
            let names: Vec<_> = PRESETS.iter().map(|p| p.0).collect();
            return Err(BenchError::Config(format!(
                "unknown preset '{name}' (available: {})",
                names.join(", ")
            )));
        }
    };
    RunConfig::parse(&text)
}
