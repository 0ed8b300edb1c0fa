//! Conserved quantities, error norms, error lower bounds and lift/drag.
//!
//! Angular momentum is the scalar `int (u1 y - u2 x)`, the z component of
//! `(u1, u2, 0) x (x, y, 0)`.

use std::sync::OnceLock;

use thiserror::Error;

use crate::assembly::element::{eval_velocity, ReferenceTables};
use crate::assembly::quadrature::QuadratureRule;
use crate::assembly::sparse::CsrMatrix;
use crate::assembly::{
    assemble_divergence, assemble_graddiv, assemble_mass, assemble_viscous, cell_dofs, cell_geometry, gather,
    nonlinear_residual, tables, FormKind,
};
use crate::fespace::{FieldCoeffs, TaylorHoodSpace, VelocityField};
use crate::mesh::BoundaryMarker;

fn error_tables() -> &'static ReferenceTables {
    static T: OnceLock<ReferenceTables> = OnceLock::new();
    T.get_or_init(|| ReferenceTables::new(QuadratureRule::collapsed_gauss(8)))
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesRecord {
    pub t: f64,
    pub energy: f64,
    pub enstrophy: f64,
    pub momentum: [f64; 2],
    pub angular_momentum: f64,
    pub div_residual: f64,
    pub newton_iters: usize,
    /// `(L2, H1 seminorm)` against the exact solution
    pub errors: Option<(f64, f64)>,
    /// `(c_l, c_d)`
    pub lift_drag: Option<(f64, f64)>,
}

impl TimeSeriesRecord {
    /// Euclidean norm of the linear momentum.
    pub fn momentum_norm(&self) -> f64 {
        self.momentum[0].hypot(self.momentum[1])
    }
}

/// Precomputed functionals for repeated evaluation on one space.
pub struct Diagnostics<'a> {
    space: &'a TaylorHoodSpace,
    mass: CsrMatrix,
    div: CsrMatrix,
    /// `int psi_i`
    momentum_weights: Vec<f64>,
    /// `int psi_i . (y, -x)`
    angular_weights: Vec<f64>,
}

impl<'a> Diagnostics<'a> {
    pub fn new(space: &'a TaylorHoodSpace) -> Self {
        let tab = tables();
        let n = space.velocity_dof_count();
        let mut momentum_weights = vec![0.0; n];
        let mut angular_weights = vec![0.0; n];
        for (c, nodes) in space.cell_nodes().iter().enumerate() {
            let geo = cell_geometry(space, c);
            let dofs = cell_dofs(nodes);
            for q in 0..tab.rule.len() {
                let wt = tab.rule.weights[q] * 2.0 * geo.area;
                let x = geo.point(&tab.rule.points[q]);
                for a in 0..6 {
                    let phi = tab.values[q][a];
                    momentum_weights[dofs[2 * a]] += wt * phi;
                    momentum_weights[dofs[2 * a + 1]] += wt * phi;
                    angular_weights[dofs[2 * a]] += wt * phi * x[1];
                    angular_weights[dofs[2 * a + 1]] -= wt * phi * x[0];
                }
            }
        }
        Diagnostics {
            space,
            mass: assemble_mass(space),
            div: assemble_divergence(space),
            momentum_weights,
            angular_weights,
        }
    }

    pub fn space(&self) -> &TaylorHoodSpace {
        self.space
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// `(u, u) / 2`
    pub fn kinetic_energy(&self, u: &FieldCoeffs) -> f64 {
        0.5 * self.mass.bilinear(&u.values, &u.values)
    }

    /// `int u`
    pub fn momentum(&self, u: &FieldCoeffs) -> [f64; 2] {
        let mut m = [0.0; 2];
        for (i, (w, v)) in self.momentum_weights.iter().zip(&u.values).enumerate() {
            m[i % 2] += w * v;
        }
        m
    }

    /// `int (u1 y - u2 x)`
    pub fn angular_momentum(&self, u: &FieldCoeffs) -> f64 {
        self.angular_weights.iter().zip(&u.values).map(|(w, v)| w * v).sum()
    }

    /// `int omega^2 / 2` with `omega = d_x u2 - d_y u1`.
    pub fn enstrophy(&self, u: &FieldCoeffs) -> f64 {
        let tab = tables();
        let mut s = 0.0;
        for (c, nodes) in self.space.cell_nodes().iter().enumerate() {
            let geo = cell_geometry(self.space, c);
            let cu = gather(&u.values, nodes);
            for q in 0..tab.rule.len() {
                let wt = tab.rule.weights[q] * 2.0 * geo.area;
                let (_, g) = eval_velocity(&cu, &tab.values[q], &tab.gradients(&geo, q));
                let w = g[1][0] - g[0][1];
                s += wt * w * w;
            }
        }
        0.5 * s
    }

    /// Largest `|(div u, q)|` over the pressure basis.
    pub fn divergence_residual(&self, u: &FieldCoeffs) -> f64 {
        let mut r = vec![0.0; self.space.pressure_dof_count()];
        self.div.mul_vec_into(&u.values, &mut r);
        self.space
            .reduce_pressure_rows(&r)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn record(&self, t: f64, u: &FieldCoeffs, newton_iters: usize) -> TimeSeriesRecord {
        TimeSeriesRecord {
            t,
            energy: self.kinetic_energy(u),
            enstrophy: self.enstrophy(u),
            momentum: self.momentum(u),
            angular_momentum: self.angular_momentum(u),
            div_residual: self.divergence_residual(u),
            newton_iters,
            errors: None,
            lift_drag: None,
        }
    }
}

/// `(|u - exact|_{L2}, |grad (u - exact)|_{L2})`.
pub fn error_norms(space: &TaylorHoodSpace, u: &FieldCoeffs, exact: &dyn VelocityField) -> (f64, f64) {
    let tab = error_tables();
    let (mut l2, mut h1) = (0.0, 0.0);
    for (c, nodes) in space.cell_nodes().iter().enumerate() {
        let geo = cell_geometry(space, c);
        let cu = gather(&u.values, nodes);
        for q in 0..tab.rule.len() {
            let wt = tab.rule.weights[q] * 2.0 * geo.area;
            let x = geo.point(&tab.rule.points[q]);
            let (uh, gh) = eval_velocity(&cu, &tab.values[q], &tab.gradients(&geo, q));
            let (ue, ge) = (exact.value(x), exact.gradient(x));
            l2 += wt * ((uh[0] - ue[0]).powi(2) + (uh[1] - ue[1]).powi(2));
            for i in 0..2 {
                for j in 0..2 {
                    h1 += wt * (gh[i][j] - ge[i][j]).powi(2);
                }
            }
        }
    }
    (l2.sqrt(), h1.sqrt())
}

/// `max_i |e_i| / sqrt(area)` for the componentwise momentum error `e`.
pub fn momentum_lower_bound(mom_err: [f64; 2], domain_area: f64) -> f64 {
    mom_err[0].abs().max(mom_err[1].abs()) / domain_area.sqrt()
}

/// `sqrt(2) |E_true - E_h| / sqrt(E_true + E_h)`, zero when both vanish.
pub fn energy_lower_bound(e_true: f64, e_h: f64) -> f64 {
    let s = e_true + e_h;
    if s <= 0.0 {
        return 0.0;
    }
    std::f64::consts::SQRT_2 * (e_true - e_h).abs() / s.sqrt()
}

#[derive(Debug, Error, PartialEq)]
pub enum LiftDragError {
    #[error("lift/drag needs two previous velocity levels")]
    MissingHistory,
    #[error("mesh has no boundary marked '{0}'")]
    MissingMarker(BoundaryMarker),
}

/// Volume-integral lift and drag evaluation from the BDF2 residual.
pub struct LiftDrag<'a> {
    space: &'a TaylorHoodSpace,
    form: FormKind,
    dt: f64,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    div: CsrMatrix,
    v_drag: FieldCoeffs,
    v_lift: FieldCoeffs,
    scale: f64,
}

impl<'a> LiftDrag<'a> {
    /// Test functions equal `e_x` (drag) and `e_y` (lift) at the nodes of
    /// `marker` and vanish at every other node. Any extension gives the
    /// same value up to the residual of the free equations.
    pub fn new(
        space: &'a TaylorHoodSpace,
        marker: BoundaryMarker,
        form: FormKind,
        dt: f64,
        nu: f64,
        gamma: f64,
    ) -> Result<Self, LiftDragError> {
        if !space.mesh().has_marker(marker) {
            return Err(LiftDragError::MissingMarker(marker));
        }
        let mut v_drag = space.zero_velocity();
        let mut v_lift = space.zero_velocity();
        for n in 0..space.num_nodes() {
            if space.node_on_marker(n, marker) {
                v_drag.values[2 * n] = 1.0;
                v_lift.values[2 * n + 1] = 1.0;
            }
        }
        let mut stiffness = assemble_viscous(space);
        stiffness.scale(nu);
        if gamma > 0.0 {
            stiffness.add_scaled(gamma, &assemble_graddiv(space));
        }
        Ok(LiftDrag {
            space,
            form,
            dt,
            mass: assemble_mass(space),
            stiffness,
            div: assemble_divergence(space),
            v_drag,
            v_lift,
            scale: -20.0,
        })
    }

    /// Overrides the `-20` normalization.
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// Full BDF2 momentum residual at `(u^n, p^n)`.
    pub fn residual(&self, u: &[&FieldCoeffs; 3], p: &FieldCoeffs) -> Vec<f64> {
        let [un, u1, u2] = *u;
        let mut r = nonlinear_residual(self.space, self.form, un);
        self.mass.mul_vec_add(1.5 / self.dt, &un.values, &mut r);
        self.mass.mul_vec_add(-2.0 / self.dt, &u1.values, &mut r);
        self.mass.mul_vec_add(0.5 / self.dt, &u2.values, &mut r);
        self.stiffness.mul_vec_add(1.0, &un.values, &mut r);
        self.div.mul_transpose_add(-1.0, &p.values, &mut r);
        r
    }

    /// `(c_l, c_d)` at `t^n` from `[u^n, u^{n-1}, u^{n-2}]` and `p^n`.
    pub fn evaluate(&self, history: &[Option<&FieldCoeffs>; 3], p: &FieldCoeffs) -> Result<(f64, f64), LiftDragError> {
        let (Some(a), Some(b), Some(c)) = (history[0], history[1], history[2]) else {
            return Err(LiftDragError::MissingHistory);
        };
        let r = self.residual(&[a, b, c], p);
        let dot = |v: &FieldCoeffs| r.iter().zip(&v.values).map(|(x, y)| x * y).sum::<f64>();
        Ok((self.scale * dot(&self.v_lift), self.scale * dot(&self.v_drag)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::{build_space, BcSpec, BoundaryCondition};
    use crate::mesh::generate_unit_square;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn square(n: usize) -> TaylorHoodSpace {
        let bc = BcSpec::new().with(BoundaryMarker::Wall, BoundaryCondition::Natural);
        build_space(Arc::new(generate_unit_square(n)), &bc).unwrap()
    }

    fn lattice(p: [f64; 2]) -> [f64; 2] {
        let (a, b) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
        [a.sin() * b.sin(), a.cos() * b.cos()]
    }

    struct Quadratic;
    impl VelocityField for Quadratic {
        fn value(&self, p: [f64; 2]) -> [f64; 2] {
            [p[0] * p[1] - p[1] * p[1], 2.0 * p[0] * p[0] + p[0]]
        }
        fn gradient(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
            [[p[1], p[0] - 2.0 * p[1]], [4.0 * p[0] + 1.0, 0.0]]
        }
    }

    #[test]
    fn lattice_vortex_invariants() {
        let s = square(64);
        let d = Diagnostics::new(&s);
        let u = s.interpolate_velocity(lattice);
        assert!((d.kinetic_energy(&u) - 0.25).abs() < 1e-4);
        let m = d.momentum(&u);
        assert!(m[0].abs() < 1e-12 && m[1].abs() < 1e-12, "{m:?}");
        assert!(d.angular_momentum(&u).abs() < 1e-12);
        let ens = d.enstrophy(&u);
        assert!((ens / (2.0 * PI * PI) - 1.0).abs() < 1e-2, "{ens}");
    }

    #[test]
    fn elementary_fields() {
        let s = square(4);
        let d = Diagnostics::new(&s);
        let zero = s.zero_velocity();
        assert_eq!(d.kinetic_energy(&zero), 0.0);
        assert_eq!(d.angular_momentum(&zero), 0.0);
        let one = s.interpolate_velocity(|_| [1.0, 0.0]);
        let m = d.momentum(&one);
        assert!((m[0] - 1.0).abs() < 1e-14 && m[1].abs() < 1e-14);
        assert!(d.enstrophy(&one).abs() < 1e-24);
        let rot = s.interpolate_velocity(|p| [-p[1], p[0]]);
        assert!((d.angular_momentum(&rot) + 2.0 / 3.0).abs() < 1e-14);
        assert!((d.enstrophy(&rot) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn error_of_exact_quadratic_vanishes() {
        let s = square(3);
        let u = s.interpolate_velocity(|p| Quadratic.value(p));
        let (l2, h1) = error_norms(&s, &u, &Quadratic);
        assert!(l2 < 1e-13 && h1 < 1e-12, "{l2} {h1}");
        let (l2, _) = error_norms(&s, &s.zero_velocity(), &Quadratic);
        // |u|^2 integral by direct polynomial integration
        let exact = ((1.0 / 9.0) - 2.0 * (1.0 / 8.0) + (1.0 / 5.0)) + (4.0 / 5.0 + 1.0 + 1.0 / 3.0);
        assert!((l2 * l2 - exact).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_formulas() {
        assert_eq!(momentum_lower_bound([0.0, 0.0], 1.0), 0.0);
        assert!((momentum_lower_bound([0.02, 0.0], 1.0) - 0.02).abs() < 1e-16);
        assert_eq!(energy_lower_bound(0.2, 0.2), 0.0);
        assert_eq!(energy_lower_bound(0.0, 0.0), 0.0);
        let expect = 2f64.sqrt() * 0.09 / 0.41f64.sqrt();
        assert!((energy_lower_bound(0.25, 0.16) - expect).abs() < 1e-15);
    }

    #[test]
    fn lift_drag_of_rest_state_is_zero() {
        let mesh = generate_unit_square(4)
            .remarked(|m, old| if m[1] == 0.0 { BoundaryMarker::Cylinder } else { old })
            .unwrap();
        let bc = BcSpec::new()
            .with(BoundaryMarker::Wall, BoundaryCondition::no_slip())
            .with(BoundaryMarker::Cylinder, BoundaryCondition::no_slip());
        let s = build_space(Arc::new(mesh), &bc).unwrap();
        let ld = LiftDrag::new(&s, BoundaryMarker::Cylinder, FormKind::Emac, 0.01, 0.001, 0.0).unwrap();
        let z = s.zero_velocity();
        let (cl, cd) = ld.evaluate(&[Some(&z), Some(&z), Some(&z)], &s.zero_pressure()).unwrap();
        assert_eq!((cl, cd), (0.0, 0.0));
        assert_eq!(
            ld.evaluate(&[Some(&z), None, None], &s.zero_pressure()),
            Err(LiftDragError::MissingHistory)
        );
        assert!(LiftDrag::new(&s, BoundaryMarker::Inlet, FormKind::Emac, 0.01, 0.001, 0.0).is_err());
    }
}
