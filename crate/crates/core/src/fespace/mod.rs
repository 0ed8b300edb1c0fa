//! Taylor-Hood P2/P1 spaces with Dirichlet, slip and periodic constraints.
//!
//! Velocity dofs are numbered per node and interleaved by component:
//! dof `2 * node + c`. Nodes are the mesh vertices followed by one node per
//! mesh edge (at its midpoint). Pressure dofs are the mesh vertices.
//!
//! Constraints are resolved into a [`DofRole`] per dof. Periodic slaves share
//! the role of their master, so a reduced vector has one entry per free,
//! non-slave dof. Everything that assembles or solves goes through
//! [`TaylorHoodSpace::restrict`] / [`TaylorHoodSpace::expand`].

mod projection;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

pub use projection::{
    boundary_extension, stokes_project, stokes_project_analytic, stokes_project_homogeneous, Projected,
};

use crate::assembly::sparse::CsrMatrix;
use crate::linsolve::SaddleLayout;
use crate::mesh::{midpoint, BoundaryMarker, TriMesh};

/// Time-dependent vector boundary data `g(x, t)`.
pub type VelocityFn = Arc<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;

/// Analytic velocity field with its gradient, `grad[i][j] = d u_i / d x_j`.
pub trait VelocityField: Sync {
    fn value(&self, p: [f64; 2]) -> [f64; 2];
    fn gradient(&self, p: [f64; 2]) -> [[f64; 2]; 2];
}

#[derive(Clone)]
pub enum BoundaryCondition {
    Dirichlet(VelocityFn),
    /// Strong `u . n = 0` on an axis-aligned side; tangential part natural.
    SlipNormal,
    Periodic,
    Natural,
}

impl BoundaryCondition {
    pub fn dirichlet<F>(f: F) -> Self
    where
        F: Fn([f64; 2], f64) -> [f64; 2] + Send + Sync + 'static,
    {
        BoundaryCondition::Dirichlet(Arc::new(f))
    }

    pub fn no_slip() -> Self {
        Self::dirichlet(|_, _| [0.0, 0.0])
    }
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Dirichlet(_) => f.write_str("Dirichlet(..)"),
            BoundaryCondition::SlipNormal => f.write_str("SlipNormal"),
            BoundaryCondition::Periodic => f.write_str("Periodic"),
            BoundaryCondition::Natural => f.write_str("Natural"),
        }
    }
}

/// Marker to condition map.
#[derive(Debug, Clone, Default)]
pub struct BcSpec {
    entries: Vec<(BoundaryMarker, BoundaryCondition)>,
}

impl BcSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, marker: BoundaryMarker, condition: BoundaryCondition) -> Self {
        self.entries.retain(|(m, _)| *m != marker);
        self.entries.push((marker, condition));
        self
    }

    pub fn get(&self, marker: BoundaryMarker) -> Option<&BoundaryCondition> {
        self.entries.iter().find(|(m, _)| *m == marker).map(|(_, c)| c)
    }

    pub fn markers(&self) -> impl Iterator<Item = BoundaryMarker> + '_ {
        self.entries.iter().map(|(m, _)| *m)
    }
}

/// Normalization of the pressure when it is determined up to a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PressureGauge {
    /// Discrete mean `(p, 1)` vanishes.
    #[default]
    MeanZero,
    /// First pressure dof fixed to zero.
    PinDof,
    /// No normalization; used when an outflow boundary fixes the constant.
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// Value taken from the Dirichlet data of `marker`.
    Fixed { dof: usize, marker: BoundaryMarker },
    ComponentFixed { node: usize, component: usize, value: f64 },
    Identified { slave: usize, master: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofRole {
    /// Index into the reduced (free) vector.
    Free(usize),
    /// Index into [`TaylorHoodSpace::fixed_dofs`].
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedValue {
    /// Component of the Dirichlet function with the given index.
    Dirichlet { source: usize, component: usize },
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedDof {
    pub dof: usize,
    pub value: FixedValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Velocity,
    Pressure,
}

/// Coefficients of a discrete field in full (unreduced) dof order.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldCoeffs {
    pub kind: FieldKind,
    pub values: Vec<f64>,
}

impl FieldCoeffs {
    pub fn zeros(kind: FieldKind, len: usize) -> Self {
        FieldCoeffs {
            kind,
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs_diff(&self, other: &FieldCoeffs) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn axpy(&mut self, alpha: f64, other: &FieldCoeffs) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> FieldCoeffs {
        FieldCoeffs {
            kind: self.kind,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("boundary condition given for marker '{0}', which the mesh does not contain")]
    UnknownMarker(BoundaryMarker),
    #[error("mesh marker '{0}' has no boundary condition")]
    MissingCondition(BoundaryMarker),
    #[error("periodic condition requested but the mesh has no periodic pairs")]
    PeriodicWithoutPairs,
    #[error("periodic edge {0:?} has no partner edge")]
    UnpairedPeriodicEdge([usize; 2]),
    #[error("slip condition on marker '{0}' requires axis-aligned boundary edges")]
    SlipNotAxisAligned(BoundaryMarker),
    #[error("field has {found} coefficients, space expects {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("constraint violated at dof {dof}: value {value}, expected {expected}")]
    ConstraintViolation { dof: usize, value: f64, expected: f64 },
    #[error(transparent)]
    Solve(#[from] crate::linsolve::SolveError),
}

/// Sparsity patterns and element scatter maps shared by all assemblies.
#[derive(Debug, Clone)]
pub(crate) struct SpacePatterns {
    /// velocity x velocity, full dofs
    pub vv: CsrMatrix,
    /// pressure x velocity, full dofs
    pub pv: CsrMatrix,
    /// per cell, local (i, j) -> position in `vv` values, row-major 12x12
    pub vv_scatter: Vec<[u32; 144]>,
    /// per cell, local (q, j) -> position in `pv` values, row-major 3x12
    pub pv_scatter: Vec<[u32; 36]>,
}

pub struct TaylorHoodSpace {
    mesh: Arc<TriMesh>,
    nodes: Vec<[f64; 2]>,
    cell_nodes: Vec<[usize; 6]>,
    node_markers: Vec<u16>,
    velocity_roles: Vec<DofRole>,
    fixed: Vec<FixedDof>,
    dirichlet: Vec<VelocityFn>,
    n_free_velocity: usize,
    free_owner: Vec<usize>,
    pressure_roles: Vec<Option<usize>>,
    n_free_pressure: usize,
    gauge: PressureGauge,
    constraints: Vec<Constraint>,
    patterns: SpacePatterns,
    layout: OnceLock<SaddleLayout>,
}

impl fmt::Debug for TaylorHoodSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaylorHoodSpace")
            .field("velocity_dofs", &self.velocity_dof_count())
            .field("pressure_dofs", &self.pressure_dof_count())
            .field("free_velocity", &self.n_free_velocity)
            .field("free_pressure", &self.n_free_pressure)
            .field("gauge", &self.gauge)
            .finish()
    }
}

fn marker_bit(m: BoundaryMarker) -> u16 {
    1 << (m as u16)
}

/// Priority for picking one Dirichlet source at corners.
fn dirichlet_priority(m: BoundaryMarker) -> u8 {
    m as u8
}

/// Builds the space with the mean-zero gauge, or no gauge when some
/// boundary carries a natural condition.
pub fn build_space(mesh: Arc<TriMesh>, bc: &BcSpec) -> Result<TaylorHoodSpace, SpaceError> {
    let natural = mesh
        .boundary_edges()
        .iter()
        .any(|e| matches!(bc.get(e.marker), Some(BoundaryCondition::Natural)));
    let gauge = if natural {
        PressureGauge::Unconstrained
    } else {
        PressureGauge::MeanZero
    };
    build_space_with_gauge(mesh, bc, gauge)
}

pub fn build_space_with_gauge(
    mesh: Arc<TriMesh>,
    bc: &BcSpec,
    gauge: PressureGauge,
) -> Result<TaylorHoodSpace, SpaceError> {
    for m in bc.markers() {
        if !mesh.has_marker(m) {
            return Err(SpaceError::UnknownMarker(m));
        }
    }
    for e in mesh.boundary_edges() {
        if bc.get(e.marker).is_none() {
            return Err(SpaceError::MissingCondition(e.marker));
        }
    }
    let uses_periodic = bc
        .markers()
        .any(|m| matches!(bc.get(m), Some(BoundaryCondition::Periodic)));
    if uses_periodic && mesh.periodic_pairs().is_empty() {
        return Err(SpaceError::PeriodicWithoutPairs);
    }

    let nv = mesh.num_vertices();
    let n_nodes = nv + mesh.num_edges();
    let mut nodes = mesh.vertices().to_vec();
    nodes.extend(
        mesh.edges()
            .iter()
            .map(|&[a, b]| midpoint(mesh.vertices()[a], mesh.vertices()[b])),
    );
    let cell_nodes: Vec<[usize; 6]> = mesh
        .triangles()
        .iter()
        .zip(mesh.triangle_edges())
        .map(|(t, e)| [t[0], t[1], t[2], nv + e[0], nv + e[1], nv + e[2]])
        .collect();

    // Dirichlet sources: one per marker with a Dirichlet condition.
    let mut dirichlet = Vec::new();
    let mut source_of: HashMap<BoundaryMarker, usize> = HashMap::new();
    for m in bc.markers() {
        if let Some(BoundaryCondition::Dirichlet(f)) = bc.get(m) {
            source_of.insert(m, dirichlet.len());
            dirichlet.push(f.clone());
        }
    }

    let mut node_markers = vec![0u16; n_nodes];
    let mut node_dirichlet: Vec<Option<BoundaryMarker>> = vec![None; n_nodes];
    let mut node_slip = vec![[false; 2]; n_nodes];
    for (be, &eid) in mesh.boundary_edges().iter().zip(mesh.boundary_edge_ids()) {
        let [a, b] = be.vertices;
        let edge_nodes = [a, b, nv + eid];
        let cond = bc.get(be.marker).expect("checked above");
        let slip_component = if matches!(cond, BoundaryCondition::SlipNormal) {
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            let (dx, dy) = ((pb[0] - pa[0]).abs(), (pb[1] - pa[1]).abs());
            let len = dx.hypot(dy);
            if dy <= 1e-12 * len {
                Some(1)
            } else if dx <= 1e-12 * len {
                Some(0)
            } else {
                return Err(SpaceError::SlipNotAxisAligned(be.marker));
            }
        } else {
            None
        };
        for &n in &edge_nodes {
            node_markers[n] |= marker_bit(be.marker);
            if matches!(cond, BoundaryCondition::Dirichlet(_)) {
                let replace = match node_dirichlet[n] {
                    None => true,
                    Some(old) => dirichlet_priority(be.marker) < dirichlet_priority(old),
                };
                if replace {
                    node_dirichlet[n] = Some(be.marker);
                }
            }
            if let Some(c) = slip_component {
                node_slip[n][c] = true;
            }
        }
    }

    let mut fixed = Vec::new();
    let mut constraints = Vec::new();
    let mut fixed_of: Vec<Option<usize>> = vec![None; 2 * n_nodes];
    for n in 0..n_nodes {
        for c in 0..2 {
            let dof = 2 * n + c;
            if let Some(m) = node_dirichlet[n] {
                fixed_of[dof] = Some(fixed.len());
                fixed.push(FixedDof {
                    dof,
                    value: FixedValue::Dirichlet {
                        source: source_of[&m],
                        component: c,
                    },
                });
                constraints.push(Constraint::Fixed { dof, marker: m });
            } else if node_slip[n][c] {
                fixed_of[dof] = Some(fixed.len());
                fixed.push(FixedDof {
                    dof,
                    value: FixedValue::Constant(0.0),
                });
                constraints.push(Constraint::ComponentFixed {
                    node: n,
                    component: c,
                    value: 0.0,
                });
            }
        }
    }

    // Periodic identification: node-level master for every slave node.
    let mut node_master: Vec<Option<usize>> = vec![None; n_nodes];
    let mut vertex_master: Vec<Option<usize>> = vec![None; nv];
    if uses_periodic {
        for &(l, r) in mesh.periodic_pairs() {
            vertex_master[r] = Some(l);
            node_master[r] = Some(l);
        }
        let mut boundary_edge_of: HashMap<(usize, usize), usize> = HashMap::new();
        for (be, &eid) in mesh.boundary_edges().iter().zip(mesh.boundary_edge_ids()) {
            let [a, b] = be.vertices;
            boundary_edge_of.insert((a.min(b), a.max(b)), eid);
        }
        for (be, &eid) in mesh.boundary_edges().iter().zip(mesh.boundary_edge_ids()) {
            if !matches!(bc.get(be.marker), Some(BoundaryCondition::Periodic)) {
                continue;
            }
            let [a, b] = be.vertices;
            if let (Some(ma), Some(mb)) = (vertex_master[a], vertex_master[b]) {
                let partner = boundary_edge_of
                    .get(&(ma.min(mb), ma.max(mb)))
                    .ok_or(SpaceError::UnpairedPeriodicEdge(be.vertices))?;
                node_master[nv + eid] = Some(nv + partner);
            }
        }
    }

    // Fixed wins over identification: a slave whose master is free but which
    // is itself fixed propagates its fixed value to the master.
    for n in 0..n_nodes {
        if let Some(m) = node_master[n] {
            for c in 0..2 {
                let (s, md) = (2 * n + c, 2 * m + c);
                if fixed_of[s].is_some() && fixed_of[md].is_none() {
                    fixed_of[md] = Some(fixed.len());
                    let value = fixed[fixed_of[s].unwrap()].value;
                    fixed.push(FixedDof { dof: md, value });
                }
                constraints.push(Constraint::Identified { slave: s, master: md });
            }
        }
    }

    let mut velocity_roles = vec![DofRole::Free(usize::MAX); 2 * n_nodes];
    let mut free_owner = Vec::new();
    for dof in 0..2 * n_nodes {
        let is_slave = node_master[dof / 2].is_some();
        velocity_roles[dof] = match fixed_of[dof] {
            Some(k) => DofRole::Fixed(k),
            None if is_slave => continue,
            None => {
                free_owner.push(dof);
                DofRole::Free(free_owner.len() - 1)
            }
        };
    }
    let n_free_velocity = free_owner.len();
    for n in 0..n_nodes {
        if let Some(m) = node_master[n] {
            for c in 0..2 {
                let s = 2 * n + c;
                if fixed_of[s].is_none() {
                    velocity_roles[s] = velocity_roles[2 * m + c];
                }
            }
        }
    }

    let mut pressure_roles = vec![None; nv];
    let mut n_free_pressure = 0;
    let mut pinned = false;
    for v in 0..nv {
        if vertex_master[v].is_some() {
            continue;
        }
        if gauge == PressureGauge::PinDof && !pinned {
            pinned = true;
            continue;
        }
        pressure_roles[v] = Some(n_free_pressure);
        n_free_pressure += 1;
    }
    for v in 0..nv {
        if let Some(m) = vertex_master[v] {
            pressure_roles[v] = pressure_roles[m];
        }
    }

    let patterns = build_patterns(&cell_nodes, n_nodes, nv);

    Ok(TaylorHoodSpace {
        mesh,
        nodes,
        cell_nodes,
        node_markers,
        velocity_roles,
        fixed,
        dirichlet,
        n_free_velocity,
        free_owner,
        pressure_roles,
        n_free_pressure,
        gauge,
        constraints,
        patterns,
        layout: OnceLock::new(),
    })
}

fn build_patterns(cell_nodes: &[[usize; 6]], n_nodes: usize, nv: usize) -> SpacePatterns {
    let mut node_adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    let mut p_adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for cell in cell_nodes {
        for &a in cell {
            node_adj[a].extend_from_slice(cell);
        }
        for &q in &cell[..3] {
            p_adj[q].extend_from_slice(cell);
        }
    }
    let expand = |adj: &mut Vec<usize>| {
        adj.sort_unstable();
        adj.dedup();
        adj.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect::<Vec<_>>()
    };
    let mut vv_rows = Vec::with_capacity(2 * n_nodes);
    for adj in &mut node_adj {
        let cols = expand(adj);
        vv_rows.push(cols.clone());
        vv_rows.push(cols);
    }
    let pv_rows: Vec<Vec<usize>> = p_adj.iter_mut().map(expand).collect();
    let vv = CsrMatrix::from_pattern(2 * n_nodes, 2 * n_nodes, &vv_rows);
    let pv = CsrMatrix::from_pattern(nv, 2 * n_nodes, &pv_rows);

    let mut vv_scatter = Vec::with_capacity(cell_nodes.len());
    let mut pv_scatter = Vec::with_capacity(cell_nodes.len());
    for cell in cell_nodes {
        let dofs: [usize; 12] = std::array::from_fn(|i| 2 * cell[i / 2] + i % 2);
        let mut s = [0u32; 144];
        for i in 0..12 {
            for j in 0..12 {
                s[12 * i + j] = vv.position(dofs[i], dofs[j]).expect("pattern") as u32;
            }
        }
        vv_scatter.push(s);
        let mut sp = [0u32; 36];
        for q in 0..3 {
            for j in 0..12 {
                sp[12 * q + j] = pv.position(cell[q], dofs[j]).expect("pattern") as u32;
            }
        }
        pv_scatter.push(sp);
    }
    SpacePatterns {
        vv,
        pv,
        vv_scatter,
        pv_scatter,
    }
}

impl TaylorHoodSpace {
    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    /// P2 node coordinates: vertices, then edge midpoints.
    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// P2 nodes of every cell in local order.
    pub fn cell_nodes(&self) -> &[[usize; 6]] {
        &self.cell_nodes
    }

    pub fn velocity_dof_count(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn pressure_dof_count(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn free_velocity_count(&self) -> usize {
        self.n_free_velocity
    }

    pub fn free_pressure_count(&self) -> usize {
        self.n_free_pressure
    }

    pub fn gauge(&self) -> PressureGauge {
        self.gauge
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn velocity_roles(&self) -> &[DofRole] {
        &self.velocity_roles
    }

    pub fn pressure_roles(&self) -> &[Option<usize>] {
        &self.pressure_roles
    }

    pub fn fixed_dofs(&self) -> &[FixedDof] {
        &self.fixed
    }

    /// Whether `node` lies on a boundary edge carrying `marker`.
    pub fn node_on_marker(&self, node: usize, marker: BoundaryMarker) -> bool {
        self.node_markers[node] & marker_bit(marker) != 0
    }

    pub fn node_on_boundary(&self, node: usize) -> bool {
        self.node_markers[node] != 0
    }

    pub(crate) fn patterns(&self) -> &SpacePatterns {
        &self.patterns
    }

    pub fn saddle_layout(&self) -> &SaddleLayout {
        self.layout.get_or_init(|| SaddleLayout::new(self))
    }

    /// Prescribed value of every fixed dof at time `t`.
    pub fn fixed_values(&self, t: f64) -> Vec<f64> {
        self.fixed
            .iter()
            .map(|f| match f.value {
                FixedValue::Constant(v) => v,
                FixedValue::Dirichlet { source, component } => {
                    (self.dirichlet[source])(self.nodes[f.dof / 2], t)[component]
                }
            })
            .collect()
    }

    pub fn zero_velocity(&self) -> FieldCoeffs {
        FieldCoeffs::zeros(FieldKind::Velocity, self.velocity_dof_count())
    }

    pub fn zero_pressure(&self) -> FieldCoeffs {
        FieldCoeffs::zeros(FieldKind::Pressure, self.pressure_dof_count())
    }

    /// Nodal P2 interpolant.
    pub fn interpolate_velocity<F: Fn([f64; 2]) -> [f64; 2]>(&self, f: F) -> FieldCoeffs {
        let mut values = Vec::with_capacity(self.velocity_dof_count());
        for &p in &self.nodes {
            let v = f(p);
            values.extend_from_slice(&v);
        }
        FieldCoeffs {
            kind: FieldKind::Velocity,
            values,
        }
    }

    /// Nodal P1 interpolant.
    pub fn interpolate_pressure<F: Fn([f64; 2]) -> f64>(&self, f: F) -> FieldCoeffs {
        FieldCoeffs {
            kind: FieldKind::Pressure,
            values: self.mesh.vertices().iter().map(|&p| f(p)).collect(),
        }
    }

    /// Free-dof values of a full velocity vector (master value for slaves).
    pub fn restrict(&self, u: &FieldCoeffs) -> Vec<f64> {
        assert_eq!(u.kind, FieldKind::Velocity);
        let mut out = vec![0.0; self.n_free_velocity];
        for (dof, role) in self.velocity_roles.iter().enumerate() {
            if let DofRole::Free(k) = *role {
                if self.free_owner[k] == dof {
                    out[k] = u.values[dof];
                }
            }
        }
        out
    }

    /// Full velocity vector from free values and fixed data at time `t`.
    pub fn expand(&self, free: &[f64], t: f64) -> FieldCoeffs {
        self.expand_with(free, &self.fixed_values(t))
    }

    /// Full velocity vector from free values and explicit fixed values.
    pub fn expand_with(&self, free: &[f64], fixed_values: &[f64]) -> FieldCoeffs {
        assert_eq!(free.len(), self.n_free_velocity);
        let values = self
            .velocity_roles
            .iter()
            .map(|role| match *role {
                DofRole::Free(k) => free[k],
                DofRole::Fixed(k) => fixed_values[k],
            })
            .collect();
        FieldCoeffs {
            kind: FieldKind::Velocity,
            values,
        }
    }

    /// Overwrites fixed dofs with their data at time `t` and copies masters
    /// onto periodic slaves.
    pub fn apply_constraints(&self, u: &mut FieldCoeffs, t: f64) {
        let free = self.restrict(u);
        *u = self.expand(&free, t);
    }

    /// Largest deviation of `u` from the constraint set at time `t`.
    pub fn constraint_violation(&self, u: &FieldCoeffs, t: f64) -> Result<f64, SpaceError> {
        self.check_len(u)?;
        let mut projected = u.clone();
        self.apply_constraints(&mut projected, t);
        Ok(projected.max_abs_diff(u))
    }

    pub fn check_len(&self, u: &FieldCoeffs) -> Result<(), SpaceError> {
        let expected = match u.kind {
            FieldKind::Velocity => self.velocity_dof_count(),
            FieldKind::Pressure => self.pressure_dof_count(),
        };
        if u.len() != expected {
            return Err(SpaceError::LengthMismatch {
                expected,
                found: u.len(),
            });
        }
        Ok(())
    }

    /// Full pressure vector from free values (pinned dof is zero).
    pub fn expand_pressure(&self, free: &[f64]) -> FieldCoeffs {
        FieldCoeffs {
            kind: FieldKind::Pressure,
            values: self
                .pressure_roles
                .iter()
                .map(|r| r.map_or(0.0, |k| free[k]))
                .collect(),
        }
    }

    /// Applies the gauge: subtracts the discrete mean for
    /// [`PressureGauge::MeanZero`], otherwise leaves `p` unchanged.
    pub fn normalize_pressure(&self, p: &mut FieldCoeffs) {
        if self.gauge != PressureGauge::MeanZero {
            return;
        }
        let w = crate::assembly::pressure_mean_weights(self);
        let area: f64 = w.iter().sum();
        let mean = w.iter().zip(&p.values).map(|(a, b)| a * b).sum::<f64>() / area;
        p.values.iter_mut().for_each(|v| *v -= mean);
    }

    /// Sums full pressure-row values onto free pressure dofs.
    pub fn reduce_pressure_rows(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free_pressure];
        for (role, v) in self.pressure_roles.iter().zip(full) {
            if let Some(k) = role {
                out[*k] += v;
            }
        }
        out
    }

    pub fn restrict_pressure(&self, p: &FieldCoeffs) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free_pressure];
        let mut seen = vec![false; self.n_free_pressure];
        for (v, role) in self.pressure_roles.iter().enumerate() {
            if let Some(k) = *role {
                if !seen[k] {
                    seen[k] = true;
                    out[k] = p.values[v];
                }
            }
        }
        out
    }
}
