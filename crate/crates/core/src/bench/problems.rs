//! The lattice vortex, Kelvin-Helmholtz and cylinder benchmark problems.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use crate::fespace::{
    build_space, stokes_project_homogeneous, BcSpec, BoundaryCondition, FieldCoeffs, TaylorHoodSpace, VelocityField,
};
use crate::mesh::{generate_periodic_strip, generate_unit_square, read_mesh, BoundaryMarker, TriMesh};

use super::BenchError;

/// Boundary treatment of the lattice vortex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeBoundary {
    /// Time-dependent Dirichlet data from the exact solution, nodal initial data.
    Exact,
    /// Homogeneous Dirichlet data; the initial field is the Stokes
    /// projection of the lattice vortex onto velocities vanishing on the
    /// boundary.
    NoSlip,
}

impl LatticeBoundary {
    pub fn as_str(self) -> &'static str {
        match self {
            LatticeBoundary::Exact => "exact",
            LatticeBoundary::NoSlip => "no-slip",
        }
    }
}

impl std::str::FromStr for LatticeBoundary {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(LatticeBoundary::Exact),
            "no-slip" | "noslip" | "no_slip" => Ok(LatticeBoundary::NoSlip),
            _ => Err(format!("unknown lattice boundary '{s}' (expected exact or no-slip)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    LatticeVortex { n: usize, nu: f64, boundary: LatticeBoundary },
    KelvinHelmholtz { n: usize, re: f64 },
    Cylinder { mesh_file: PathBuf, nu: f64 },
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::LatticeVortex { .. } => "lattice_vortex",
            ProblemSpec::KelvinHelmholtz { .. } => "kelvin_helmholtz",
            ProblemSpec::Cylinder { .. } => "cylinder",
        }
    }

    pub fn viscosity(&self) -> f64 {
        match *self {
            ProblemSpec::LatticeVortex { nu, .. } | ProblemSpec::Cylinder { nu, .. } => nu,
            ProblemSpec::KelvinHelmholtz { re, .. } => kh_viscosity(re),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        match self {
            ProblemSpec::LatticeVortex { n, nu, .. } => {
                if *n == 0 {
                    return bad("n must be positive".into());
                }
                if !(*nu >= 0.0 && nu.is_finite()) {
                    return bad(format!("nu must be nonnegative, got {nu}"));
                }
            }
            ProblemSpec::KelvinHelmholtz { n, re } => {
                if *n == 0 {
                    return bad("n must be positive".into());
                }
                if !(*re > 0.0 && re.is_finite()) {
                    return bad(format!("re must be positive, got {re}"));
                }
            }
            ProblemSpec::Cylinder { nu, .. } => {
                if !(*nu > 0.0 && nu.is_finite()) {
                    return bad(format!("nu must be positive, got {nu}"));
                }
            }
        }
        Ok(())
    }
}

/// Exact lattice vortex solution for viscosity `nu`.
///
/// `u = v exp(-8 nu pi^2 t)`, `p = q exp(-16 nu pi^2 t)` with
/// `v = (sin 2 pi x sin 2 pi y, cos 2 pi x cos 2 pi y)` and
/// `q = -(sin^2 2 pi x + cos^2 2 pi y) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeVortex {
    pub nu: f64,
}

impl LatticeVortex {
    pub fn decay(&self, t: f64) -> f64 {
        (-8.0 * self.nu * PI * PI * t).exp()
    }

    pub fn velocity(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let (a, b) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
        let d = self.decay(t);
        [d * a.sin() * b.sin(), d * a.cos() * b.cos()]
    }

    pub fn gradient(&self, p: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let (a, b) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
        let k = 2.0 * PI * self.decay(t);
        [
            [k * a.cos() * b.sin(), k * a.sin() * b.cos()],
            [-k * a.sin() * b.cos(), -k * a.cos() * b.sin()],
        ]
    }

    pub fn pressure(&self, p: [f64; 2], t: f64) -> f64 {
        let (a, b) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
        let d = self.decay(t);
        -0.5 * (a.sin().powi(2) + b.cos().powi(2)) * d * d
    }

    /// `E(t) = exp(-16 nu pi^2 t) / 4` on the unit square.
    pub fn energy(&self, t: f64) -> f64 {
        0.25 * self.decay(t).powi(2)
    }

    pub fn at(&self, t: f64) -> LatticeAt {
        LatticeAt { exact: *self, t }
    }
}

/// The lattice vortex frozen at one time.
#[derive(Debug, Clone, Copy)]
pub struct LatticeAt {
    pub exact: LatticeVortex,
    pub t: f64,
}

impl VelocityField for LatticeAt {
    fn value(&self, p: [f64; 2]) -> [f64; 2] {
        self.exact.velocity(p, self.t)
    }
    fn gradient(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        self.exact.gradient(p, self.t)
    }
}

pub const KH_DELTA0: f64 = 1.0 / 28.0;
pub const KH_NOISE: f64 = 1e-3;

/// `nu = delta0 u_inf / Re` with `u_inf = 1`.
pub fn kh_viscosity(re: f64) -> f64 {
    KH_DELTA0 / re
}

/// Kelvin-Helmholtz initial velocity (independent of the Reynolds number).
pub fn kh_initial(p: [f64; 2]) -> [f64; 2] {
    let (x, y) = (p[0], p[1]);
    let d2 = KH_DELTA0 * KH_DELTA0;
    let g = (-(y - 0.5).powi(2) / d2).exp();
    let c = (8.0 * PI * x).cos() + (20.0 * PI * x).cos();
    let dpsi_dy = -2.0 * (y - 0.5) / d2 * g * c;
    let dpsi_dx = g * (-8.0 * PI * (8.0 * PI * x).sin() - 20.0 * PI * (20.0 * PI * x).sin());
    [
        ((2.0 * y - 1.0) / KH_DELTA0).tanh() + KH_NOISE * dpsi_dy,
        -KH_NOISE * dpsi_dx,
    ]
}

pub const CHANNEL_HEIGHT: f64 = 0.41;

/// Parabolic channel profile with maximum 1.5 at mid-height.
pub fn channel_profile(p: [f64; 2]) -> [f64; 2] {
    let h = CHANNEL_HEIGHT;
    [6.0 / (h * h) * p[1] * (h - p[1]), 0.0]
}

/// A discretized problem ready for time stepping.
pub struct Problem {
    pub space: TaylorHoodSpace,
    pub nu: f64,
    pub u0: FieldCoeffs,
    pub p0: FieldCoeffs,
    pub exact: Option<LatticeVortex>,
    /// Marker of the body for lift and drag.
    pub body: Option<BoundaryMarker>,
}

pub fn build_problem(spec: &ProblemSpec) -> Result<Problem, BenchError> {
    spec.validate()?;
    match spec {
        ProblemSpec::LatticeVortex { n, nu, boundary } => {
            let exact = LatticeVortex { nu: *nu };
            let mesh = Arc::new(generate_unit_square(*n));
            let bc = match boundary {
                LatticeBoundary::Exact => BcSpec::new().with(
                    BoundaryMarker::Wall,
                    BoundaryCondition::dirichlet(move |p, t| exact.velocity(p, t)),
                ),
                LatticeBoundary::NoSlip => BcSpec::new().with(BoundaryMarker::Wall, BoundaryCondition::no_slip()),
            };
            let space = build_space(mesh, &bc)?;
            let (u0, p0) = match boundary {
                LatticeBoundary::Exact => (
                    space.interpolate_velocity(|p| exact.velocity(p, 0.0)),
                    space.interpolate_pressure(|p| exact.pressure(p, 0.0)),
                ),
                LatticeBoundary::NoSlip => {
                    let proj = stokes_project_homogeneous(&space, &exact.at(0.0))?;
                    (proj.velocity, space.zero_pressure())
                }
            };
            let mut p0 = p0;
            space.normalize_pressure(&mut p0);
            Ok(Problem {
                space,
                nu: *nu,
                u0,
                p0,
                exact: (*boundary == LatticeBoundary::Exact).then_some(exact),
                body: None,
            })
        }
        ProblemSpec::KelvinHelmholtz { n, re } => {
            let mesh = Arc::new(generate_periodic_strip(*n));
            let bc = BcSpec::new()
                .with(BoundaryMarker::PeriodicLeft, BoundaryCondition::Periodic)
                .with(BoundaryMarker::PeriodicRight, BoundaryCondition::Periodic)
                .with(BoundaryMarker::SlipBottom, BoundaryCondition::SlipNormal)
                .with(BoundaryMarker::SlipTop, BoundaryCondition::SlipNormal);
            let space = build_space(mesh, &bc)?;
            let mut u0 = space.interpolate_velocity(kh_initial);
            space.apply_constraints(&mut u0, 0.0);
            let p0 = space.zero_pressure();
            Ok(Problem {
                space,
                nu: kh_viscosity(*re),
                u0,
                p0,
                exact: None,
                body: None,
            })
        }
        ProblemSpec::Cylinder { mesh_file, nu } => {
            let text = std::fs::read_to_string(mesh_file)
                .map_err(|e| BenchError::Config(format!("cannot read mesh file {}: {e}", mesh_file.display())))?;
            let mesh = read_mesh(&text)
                .map_err(|e| BenchError::Config(format!("mesh file {}: {e}", mesh_file.display())))?;
            check_cylinder_mesh(&mesh)?;
            let bc = BcSpec::new()
                .with(BoundaryMarker::Wall, BoundaryCondition::no_slip())
                .with(BoundaryMarker::Cylinder, BoundaryCondition::no_slip())
                .with(BoundaryMarker::Inlet, BoundaryCondition::dirichlet(|p, _| channel_profile(p)))
                .with(BoundaryMarker::Outlet, BoundaryCondition::dirichlet(|p, _| channel_profile(p)));
            let space = build_space(Arc::new(mesh), &bc)?;
            let mut u0 = space.zero_velocity();
            space.apply_constraints(&mut u0, 0.0);
            let p0 = space.zero_pressure();
            Ok(Problem {
                space,
                nu: *nu,
                u0,
                p0,
                exact: None,
                body: Some(BoundaryMarker::Cylinder),
            })
        }
    }
}

fn check_cylinder_mesh(mesh: &TriMesh) -> Result<(), BenchError> {
    let required = [
        BoundaryMarker::Wall,
        BoundaryMarker::Inlet,
        BoundaryMarker::Outlet,
        BoundaryMarker::Cylinder,
    ];
    let missing: Vec<_> = required.iter().filter(|m| !mesh.has_marker(**m)).map(|m| m.as_str()).collect();
    if !missing.is_empty() {
        return Err(BenchError::Config(format!(
            "cylinder problem needs boundary markers wall, inlet, outlet, cylinder; missing: {}",
            missing.join(", ")
        )));
    }
    Ok(())
}
