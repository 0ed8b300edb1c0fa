//! Discrete Stokes projection and discretely divergence-free liftings.

use super::{FieldCoeffs, FieldKind, SpaceError, TaylorHoodSpace, VelocityField};
use crate::assembly::{
    assemble_divergence, assemble_viscous, cell_dofs, cell_geometry, tables,
};

/// Velocity and pressure of a projection.
#[derive(Debug, Clone)]
pub struct Projected {
    pub velocity: FieldCoeffs,
    pub pressure: FieldCoeffs,
}

const SOLVE_TOL: f64 = 1e-12;

/// Solves `(grad u, grad v) - (p, div v) = rhs(v)`, `(div u, q) = 0` with
/// `u = base` on constrained dofs.
fn solve_stokes(space: &TaylorHoodSpace, rhs: &[f64], base: &FieldCoeffs) -> Result<Projected, SpaceError> {
    let layout = space.saddle_layout();
    let a = assemble_viscous(space);
    let b = assemble_divergence(space);
    let (nu, np) = (layout.velocity_len(), layout.pressure_len());

    let mut full_u = rhs.to_vec();
    a.mul_vec_add(-1.0, &base.values, &mut full_u);
    let mut full_p = vec![0.0; space.pressure_dof_count()];
    b.mul_vec_into(&base.values, &mut full_p);

    let mut r = vec![0.0; layout.size()];
    layout.reduce_velocity(&full_u, &mut r[..nu]);
    layout.reduce_pressure(&full_p, &mut r[nu..nu + np]);
    let mat = layout.assemble(&a, &b);
    let (x, _) = mat.solve(&r, SOLVE_TOL)?;

    let fixed: Vec<f64> = space.fixed_dofs().iter().map(|_| 0.0).collect();
    let mut velocity = space.expand_with(&x[..nu], &fixed);
    velocity.axpy(1.0, base);
    let mut pressure = layout.expand_pressure(&x[nu..nu + np]);
    space.normalize_pressure(&mut pressure);
    Ok(Projected { velocity, pressure })
}

/// Base field carrying `w`'s values on constrained dofs and zero elsewhere.
fn trace_of(space: &TaylorHoodSpace, w: &FieldCoeffs) -> FieldCoeffs {
    let fixed: Vec<f64> = space.fixed_dofs().iter().map(|f| w.values[f.dof]).collect();
    space.expand_with(&vec![0.0; space.free_velocity_count()], &fixed)
}

fn analytic_gradient_load(space: &TaylorHoodSpace, field: &dyn VelocityField) -> Vec<f64> {
    let tab = tables();
    let mut out = vec![0.0; space.velocity_dof_count()];
    for (c, nodes) in space.cell_nodes().iter().enumerate() {
        let geo = cell_geometry(space, c);
        let dofs = cell_dofs(nodes);
        for q in 0..tab.rule.len() {
            let wt = tab.rule.weights[q] * 2.0 * geo.area;
            let g = field.gradient(geo.point(&tab.rule.points[q]));
            let dphi = tab.gradients(&geo, q);
            for (i, &d) in dofs.iter().enumerate() {
                let (n, comp) = (i / 2, i % 2);
                out[d] += wt * (g[comp][0] * dphi[n][0] + g[comp][1] * dphi[n][1]);
            }
        }
    }
    out
}

/// Stokes projection of a discrete field; the trace is taken from `w`.
pub fn stokes_project(space: &TaylorHoodSpace, w: &FieldCoeffs) -> Result<Projected, SpaceError> {
    space.check_len(w)?;
    assert_eq!(w.kind, FieldKind::Velocity);
    let rhs = assemble_viscous(space).mul_vec(&w.values);
    solve_stokes(space, &rhs, &trace_of(space, w))
}

/// Stokes projection of an analytic field, with its nodal trace.
pub fn stokes_project_analytic(space: &TaylorHoodSpace, field: &dyn VelocityField) -> Result<Projected, SpaceError> {
    let w = space.interpolate_velocity(|p| field.value(p));
    let rhs = analytic_gradient_load(space, field);
    solve_stokes(space, &rhs, &trace_of(space, &w))
}

/// Stokes projection of an analytic field onto velocities vanishing on all
/// constrained dofs.
pub fn stokes_project_homogeneous(space: &TaylorHoodSpace, field: &dyn VelocityField) -> Result<Projected, SpaceError> {
    let rhs = analytic_gradient_load(space, field);
    solve_stokes(space, &rhs, &space.zero_velocity())
}

/// Discretely divergence-free field with the boundary data at time `t`
/// and minimal Dirichlet energy.
pub fn boundary_extension(space: &TaylorHoodSpace, t: f64) -> Result<Projected, SpaceError> {
    let base = space.expand(&vec![0.0; space.free_velocity_count()], t);
    solve_stokes(space, &vec![0.0; space.velocity_dof_count()], &base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_divergence;
    use crate::fespace::{build_space, BcSpec, BoundaryCondition};
    use crate::mesh::{generate_unit_square, BoundaryMarker};
    use std::f64::consts::PI;
    use std::sync::Arc;

    struct Lattice;

    impl VelocityField for Lattice {
        fn value(&self, p: [f64; 2]) -> [f64; 2] {
            let (a, b) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
            [a.sin() * b.sin(), a.cos() * b.cos()]
        }
        fn gradient(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
            let (a, b) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
            let k = 2.0 * PI;
            [
                [k * a.cos() * b.sin(), k * a.sin() * b.cos()],
                [-k * a.sin() * b.cos(), -k * a.cos() * b.sin()],
            ]
        }
    }

    fn lattice_space(n: usize) -> TaylorHoodSpace {
        let bc = BcSpec::new().with(
            BoundaryMarker::Wall,
            BoundaryCondition::dirichlet(|p, _| Lattice.value(p)),
        );
        build_space(Arc::new(generate_unit_square(n)), &bc).unwrap()
    }

    fn div_residual(space: &TaylorHoodSpace, u: &FieldCoeffs) -> f64 {
        let b = assemble_divergence(space);
        let mut r = vec![0.0; space.pressure_dof_count()];
        b.mul_vec_into(&u.values, &mut r);
        space.reduce_pressure_rows(&r).iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn projection_is_discretely_divergence_free() {
        let s = lattice_space(16);
        let p = stokes_project_analytic(&s, &Lattice).unwrap();
        assert!(div_residual(&s, &p.velocity) <= 1e-10);
        assert!(s.constraint_violation(&p.velocity, 0.0).unwrap() < 1e-14);
        let h = stokes_project_homogeneous(&s, &Lattice).unwrap();
        assert!(div_residual(&s, &h.velocity) <= 1e-10);
        for f in s.fixed_dofs() {
            assert_eq!(h.velocity.values[f.dof], 0.0);
        }
        let e = boundary_extension(&s, 0.0).unwrap();
        assert!(div_residual(&s, &e.velocity) <= 1e-10);
    }

    #[test]
    fn discrete_projection_reproduces_divergence_free_quadratics() {
        // w = (y, 0) is divergence free and in P2: projection returns it
        let bc = BcSpec::new().with(
            BoundaryMarker::Wall,
            BoundaryCondition::dirichlet(|p, _| [p[1], 0.0]),
        );
        let s = build_space(Arc::new(generate_unit_square(4)), &bc).unwrap();
        let w = s.interpolate_velocity(|p| [p[1], 0.0]);
        let p = stokes_project(&s, &w).unwrap();
        assert!(p.velocity.max_abs_diff(&w) < 1e-12);
    }

    #[test]
    fn projection_is_best_approximation_in_energy_seminorm() {
        let s = lattice_space(8);
        let w = s.interpolate_velocity(|p| Lattice.value(p));
        let st = stokes_project(&s, &w).unwrap();
        let a = assemble_viscous(&s);
        // compare against the interpolant corrected to be discretely div-free
        // on the same trace: the discrete projection minimises |grad (w - v)|.
        let mut d = w.clone();
        d.axpy(-1.0, &st.velocity);
        let e_proj = a.bilinear(&d.values, &d.values);
        let other = boundary_extension(&s, 0.0).unwrap();
        let mut d2 = w.clone();
        d2.axpy(-1.0, &other.velocity);
        assert!(e_proj <= a.bilinear(&d2.values, &d2.values));
    }
}
