//! Finite element assembly of the Taylor-Hood operators.
//!
//! All matrices are assembled on full (unconstrained) dofs using the
//! patterns stored in the space. Element work may run on the rayon pool;
//! the scatter into global storage is always serial and in cell order, so
//! results are bitwise reproducible regardless of thread count.

pub mod element;
pub mod forms;
pub mod quadrature;
pub mod sparse;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::fespace::{FieldCoeffs, TaylorHoodSpace};
use element::{ReferenceTables, TriangleGeometry, P2_VDOFS};
pub use forms::FormKind;
use forms::{flux, pair, Grad};
use quadrature::QuadratureRule;
use sparse::CsrMatrix;

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Enables or disables parallel element kernels.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

pub(crate) fn tables() -> &'static ReferenceTables {
    static T: OnceLock<ReferenceTables> = OnceLock::new();
    T.get_or_init(|| ReferenceTables::new(QuadratureRule::degree6()))
}

pub(crate) fn cell_geometry(space: &TaylorHoodSpace, cell: usize) -> TriangleGeometry {
    let t = space.mesh().triangles()[cell];
    let v = space.mesh().vertices();
    TriangleGeometry::new([v[t[0]], v[t[1]], v[t[2]]])
}

pub(crate) fn cell_dofs(nodes: &[usize; 6]) -> [usize; 12] {
    std::array::from_fn(|i| 2 * nodes[i / 2] + i % 2)
}

pub(crate) fn gather(u: &[f64], nodes: &[usize; 6]) -> [f64; 12] {
    let dofs = cell_dofs(nodes);
    std::array::from_fn(|i| u[dofs[i]])
}

fn map_cells<L, K>(space: &TaylorHoodSpace, kernel: K) -> Vec<L>
where
    L: Send,
    K: Fn(usize) -> L + Sync,
{
    let n = space.mesh().num_triangles();
    if parallel_enabled() {
        (0..n).into_par_iter().map(&kernel).collect()
    } else {
        (0..n).map(kernel).collect()
    }
}

fn scatter_vv(space: &TaylorHoodSpace, locals: &[[f64; 144]]) -> CsrMatrix {
    let pat = space.patterns();
    let mut m = pat.vv.clone();
    let vals = m.values_mut();
    for (local, map) in locals.iter().zip(&pat.vv_scatter) {
        for k in 0..144 {
            vals[map[k] as usize] += local[k];
        }
    }
    m
}

fn scatter_vec(space: &TaylorHoodSpace, locals: &[[f64; 12]]) -> Vec<f64> {
    let mut out = vec![0.0; space.velocity_dof_count()];
    for (local, nodes) in locals.iter().zip(space.cell_nodes()) {
        for (i, d) in cell_dofs(nodes).into_iter().enumerate() {
            out[d] += local[i];
        }
    }
    out
}

/// Vector-valued bilinear form built from a scalar kernel
/// `k(phi_i, dphi_i, phi_j, dphi_j)` coupling equal components only.
fn assemble_diagonal_blocks<K>(space: &TaylorHoodSpace, k: K) -> CsrMatrix
where
    K: Fn(f64, [f64; 2], f64, [f64; 2]) -> f64 + Sync,
{
    let tab = tables();
    let locals = map_cells(space, |c| {
        let geo = cell_geometry(space, c);
        let mut local = [0.0; 144];
        for q in 0..tab.rule.len() {
            let wt = tab.rule.weights[q] * 2.0 * geo.area;
            let phi = &tab.values[q];
            let dphi = tab.gradients(&geo, q);
            for a in 0..6 {
                for b in 0..6 {
                    let v = wt * k(phi[a], dphi[a], phi[b], dphi[b]);
                    local[12 * (2 * a) + 2 * b] += v;
                    local[12 * (2 * a + 1) + 2 * b + 1] += v;
                }
            }
        }
        local
    });
    scatter_vv(space, &locals)
}

/// `(u, v)`
pub fn assemble_mass(space: &TaylorHoodSpace) -> CsrMatrix {
    assemble_diagonal_blocks(space, |pi, _, pj, _| pi * pj)
}

/// `(grad u, grad v)`
pub fn assemble_viscous(space: &TaylorHoodSpace) -> CsrMatrix {
    assemble_diagonal_blocks(space, |_, gi, _, gj| gi[0] * gj[0] + gi[1] * gj[1])
}

/// `(div u, div v)`
pub fn assemble_graddiv(space: &TaylorHoodSpace) -> CsrMatrix {
    let tab = tables();
    let locals = map_cells(space, |c| {
        let geo = cell_geometry(space, c);
        let mut local = [0.0; 144];
        for q in 0..tab.rule.len() {
            let wt = tab.rule.weights[q] * 2.0 * geo.area;
            let dphi = tab.gradients(&geo, q);
            for i in 0..P2_VDOFS {
                let di = dphi[i / 2][i % 2];
                for j in 0..P2_VDOFS {
                    local[12 * i + j] += wt * di * dphi[j / 2][j % 2];
                }
            }
        }
        local
    });
    scatter_vv(space, &locals)
}

/// `B[q][j] = (phi_q, div psi_j)`, pressure rows by velocity columns.
pub fn assemble_divergence(space: &TaylorHoodSpace) -> CsrMatrix {
    let tab = tables();
    let locals = map_cells(space, |c| {
        let geo = cell_geometry(space, c);
        let mut local = [0.0; 36];
        for q in 0..tab.rule.len() {
            let wt = tab.rule.weights[q] * 2.0 * geo.area;
            let l = tab.rule.points[q];
            let dphi = tab.gradients(&geo, q);
            for (a, la) in l.iter().enumerate() {
                for j in 0..P2_VDOFS {
                    local[12 * a + j] += wt * la * dphi[j / 2][j % 2];
                }
            }
        }
        local
    });
    let pat = space.patterns();
    let mut m = pat.pv.clone();
    let vals = m.values_mut();
    for (local, map) in locals.iter().zip(&pat.pv_scatter) {
        for k in 0..36 {
            vals[map[k] as usize] += local[k];
        }
    }
    m
}

/// `(phi_q, 1)` for every pressure dof.
pub fn pressure_mean_weights(space: &TaylorHoodSpace) -> Vec<f64> {
    let mut out = vec![0.0; space.pressure_dof_count()];
    for (c, t) in space.mesh().triangles().iter().enumerate() {
        let a = space.mesh().triangle_area(c);
        for &v in t {
            out[v] += a / 3.0;
        }
    }
    out
}

/// `(f(., t), v)` for an analytic body force.
pub fn assemble_load<F>(space: &TaylorHoodSpace, f: F, t: f64) -> Vec<f64>
where
    F: Fn([f64; 2], f64) -> [f64; 2] + Sync,
{
    let tab = tables();
    let locals = map_cells(space, |c| {
        let geo = cell_geometry(space, c);
        let mut local = [0.0; 12];
        for q in 0..tab.rule.len() {
            let wt = tab.rule.weights[q] * 2.0 * geo.area;
            let fx = f(geo.point(&tab.rule.points[q]), t);
            let phi = &tab.values[q];
            for a in 0..6 {
                local[2 * a] += wt * fx[0] * phi[a];
                local[2 * a + 1] += wt * fx[1] * phi[a];
            }
        }
        local
    });
    scatter_vec(space, &locals)
}

struct PointBasis {
    phi: [f64; 6],
    dphi: [[f64; 2]; 6],
}

impl PointBasis {
    fn value(&self, i: usize) -> ([f64; 2], Grad) {
        let (n, c) = (i / 2, i % 2);
        let mut v = [0.0; 2];
        v[c] = self.phi[n];
        let mut g = [[0.0; 2]; 2];
        g[c] = self.dphi[n];
        (v, g)
    }

    /// `pair(F, G, psi_i, grad psi_i)` without materialising `psi_i`.
    #[inline]
    fn test(&self, f: &[f64; 2], g: &Grad, i: usize) -> f64 {
        let (n, c) = (i / 2, i % 2);
        f[c] * self.phi[n] + g[c][0] * self.dphi[n][0] + g[c][1] * self.dphi[n][1]
    }
}

fn eval(coeffs: &[f64; 12], b: &PointBasis) -> ([f64; 2], Grad) {
    element::eval_velocity(coeffs, &b.phi, &b.dphi)
}

fn point_bases(geo: &TriangleGeometry) -> impl Iterator<Item = (f64, PointBasis)> + '_ {
    let tab = tables();
    (0..tab.rule.len()).map(move |q| {
        (
            tab.rule.weights[q] * 2.0 * geo.area,
            PointBasis {
                phi: tab.values[q],
                dphi: tab.gradients(geo, q),
            },
        )
    })
}

/// `T(a, b, w)` for full velocity vectors.
pub fn eval_trilinear(space: &TaylorHoodSpace, form: FormKind, a: &FieldCoeffs, b: &FieldCoeffs, w: &FieldCoeffs) -> f64 {
    let parts = map_cells(space, |c| {
        let nodes = &space.cell_nodes()[c];
        let (ca, cb, cw) = (gather(&a.values, nodes), gather(&b.values, nodes), gather(&w.values, nodes));
        let geo = cell_geometry(space, c);
        let mut s = 0.0;
        for (wt, pb) in point_bases(&geo) {
            let (av, ag) = eval(&ca, &pb);
            let (bv, bg) = eval(&cb, &pb);
            let (wv, wg) = eval(&cw, &pb);
            let (f, g) = flux(form, av, &ag, bv, &bg);
            s += wt * pair(&f, &g, wv, &wg);
        }
        s
    });
    parts.into_iter().sum()
}

fn residual_local(form: FormKind, cu: &[f64; 12], geo: &TriangleGeometry) -> [f64; 12] {
    let mut local = [0.0; 12];
    for (wt, pb) in point_bases(geo) {
        let (u, gu) = eval(cu, &pb);
        let (f, g) = flux(form, u, &gu, u, &gu);
        for (i, l) in local.iter_mut().enumerate() {
            *l += wt * pb.test(&f, &g, i);
        }
    }
    local
}

fn jacobian_local(form: FormKind, cu: &[f64; 12], geo: &TriangleGeometry) -> [f64; 144] {
    let mut local = [0.0; 144];
    for (wt, pb) in point_bases(geo) {
        let (u, gu) = eval(cu, &pb);
        for j in 0..P2_VDOFS {
            let (d, gd) = pb.value(j);
            let (f1, g1) = flux(form, d, &gd, u, &gu);
            let (f2, g2) = flux(form, u, &gu, d, &gd);
            let f = [wt * (f1[0] + f2[0]), wt * (f1[1] + f2[1])];
            let g = [
                [wt * (g1[0][0] + g2[0][0]), wt * (g1[0][1] + g2[0][1])],
                [wt * (g1[1][0] + g2[1][0]), wt * (g1[1][1] + g2[1][1])],
            ];
            for i in 0..P2_VDOFS {
                local[12 * i + j] += pb.test(&f, &g, i);
            }
        }
    }
    local
}

/// `N(u)_i = T(u, u, psi_i)` on full dofs.
pub fn nonlinear_residual(space: &TaylorHoodSpace, form: FormKind, u: &FieldCoeffs) -> Vec<f64> {
    let locals = map_cells(space, |c| {
        residual_local(form, &gather(&u.values, &space.cell_nodes()[c]), &cell_geometry(space, c))
    });
    scatter_vec(space, &locals)
}

/// Exact derivative of [`nonlinear_residual`]: `J_ij = T(psi_j, u, psi_i) + T(u, psi_j, psi_i)`.
pub fn nonlinear_jacobian(space: &TaylorHoodSpace, form: FormKind, u: &FieldCoeffs) -> CsrMatrix {
    let locals = map_cells(space, |c| {
        jacobian_local(form, &gather(&u.values, &space.cell_nodes()[c]), &cell_geometry(space, c))
    });
    scatter_vv(space, &locals)
}

/// Residual and Jacobian in a single pass over the cells.
pub fn nonlinear_residual_and_jacobian(space: &TaylorHoodSpace, form: FormKind, u: &FieldCoeffs) -> (Vec<f64>, CsrMatrix) {
    let locals = map_cells(space, |c| {
        let cu = gather(&u.values, &space.cell_nodes()[c]);
        let geo = cell_geometry(space, c);
        (residual_local(form, &cu, &geo), jacobian_local(form, &cu, &geo))
    });
    let (r, j): (Vec<_>, Vec<_>) = locals.into_iter().unzip();
    (scatter_vec(space, &r), scatter_vv(space, &j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::{build_space, BcSpec, BoundaryCondition};
    use crate::mesh::{generate_periodic_strip, generate_unit_square, BoundaryMarker};
    use std::sync::Arc;

    fn natural_square(n: usize) -> TaylorHoodSpace {
        let mesh = Arc::new(generate_unit_square(n));
        build_space(mesh, &BcSpec::new().with(BoundaryMarker::Wall, BoundaryCondition::Natural)).unwrap()
    }

    fn poly(space: &TaylorHoodSpace) -> FieldCoeffs {
        space.interpolate_velocity(|p| [p[0] * p[0] - 0.5 * p[1], 0.3 * p[0] * p[1] + p[1] * p[1]])
    }

    #[test]
    fn mass_sums_to_twice_area() {
        let s = natural_square(3);
        let m = assemble_mass(&s);
        assert!((m.sum() - 2.0).abs() < 1e-13);
        assert!(m.asymmetry() < 1e-15);
    }

    #[test]
    fn viscous_annihilates_constants_and_matches_quadratic_energy() {
        let s = natural_square(3);
        let a = assemble_viscous(&s);
        let one = s.interpolate_velocity(|_| [1.0, -2.0]);
        assert!(a.mul_vec(&one.values).iter().all(|v| v.abs() < 1e-12));
        // |grad (x^2, xy)|^2 = 4x^2 + y^2 + x^2, integral over unit square = 5/3 + 1/3 = 2
        let u = s.interpolate_velocity(|p| [p[0] * p[0], p[0] * p[1]]);
        assert!((a.bilinear(&u.values, &u.values) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn divergence_of_polynomial_field() {
        let s = natural_square(2);
        let b = assemble_divergence(&s);
        let u = poly(&s);
        // div u = 2x + 0.3x + 2y, integral = 1.15 + 1.0
        let ones = vec![1.0; s.pressure_dof_count()];
        let mut bu = vec![0.0; s.pressure_dof_count()];
        b.mul_vec_into(&u.values, &mut bu);
        let total: f64 = bu.iter().zip(&ones).map(|(a, b)| a * b).sum();
        assert!((total - 2.15).abs() < 1e-12);
        let w = pressure_mean_weights(&s);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn graddiv_quadratic_form() {
        let s = natural_square(2);
        let g = assemble_graddiv(&s);
        let u = s.interpolate_velocity(|p| [p[0] * p[0], p[1]]);
        // div u = 2x + 1, integral of its square = 4/3 + 2 + 1
        assert!((g.bilinear(&u.values, &u.values) - 13.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn residual_matches_trilinear_form() {
        let s = natural_square(3);
        let u = poly(&s);
        for form in FormKind::ALL {
            let r = nonlinear_residual(&s, form, &u);
            let w = s.interpolate_velocity(|p| [p[1] - p[0] * p[1], 1.0 + p[0]]);
            let direct = eval_trilinear(&s, form, &u, &u, &w);
            let via: f64 = r.iter().zip(&w.values).map(|(a, b)| a * b).sum();
            assert!((direct - via).abs() < 1e-12 * (1.0 + direct.abs()), "{form}");
        }
    }

    #[test]
    fn convective_term_of_polynomial_is_exact() {
        // u = (x, -y): (u . grad) u = (x, y), integral against (1, 1) = 1
        let s = natural_square(2);
        let u = s.interpolate_velocity(|p| [p[0], -p[1]]);
        let w = s.interpolate_velocity(|_| [1.0, 1.0]);
        let v = eval_trilinear(&s, FormKind::Conv, &u, &u, &w);
        assert!((v - 1.0).abs() < 1e-13);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let s = natural_square(2);
        let u = poly(&s);
        let dir = s.interpolate_velocity(|p| [(3.0 * p[0]).sin(), p[0] * p[1] - 0.2]);
        for form in FormKind::ALL {
            let j = nonlinear_jacobian(&s, form, &u);
            let jd = j.mul_vec(&dir.values);
            let h = 1e-6;
            let mut up = u.clone();
            up.axpy(h, &dir);
            let mut um = u.clone();
            um.axpy(-h, &dir);
            let (rp, rm) = (nonlinear_residual(&s, form, &up), nonlinear_residual(&s, form, &um));
            for k in 0..jd.len() {
                let fd = (rp[k] - rm[k]) / (2.0 * h);
                assert!((fd - jd[k]).abs() < 1e-7, "{form} dof {k}: {fd} vs {}", jd[k]);
            }
            let (r2, j2) = nonlinear_residual_and_jacobian(&s, form, &u);
            assert_eq!(r2, nonlinear_residual(&s, form, &u));
            assert_eq!(j2.values(), j.values());
        }
    }

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        let mesh = Arc::new(generate_periodic_strip(4));
        let bc = BcSpec::new()
            .with(BoundaryMarker::PeriodicLeft, BoundaryCondition::Periodic)
            .with(BoundaryMarker::PeriodicRight, BoundaryCondition::Periodic)
            .with(BoundaryMarker::SlipBottom, BoundaryCondition::SlipNormal)
            .with(BoundaryMarker::SlipTop, BoundaryCondition::SlipNormal);
        let s = build_space(mesh, &bc).unwrap();
        let u = poly(&s);
        let par = nonlinear_jacobian(&s, FormKind::Emac, &u);
        set_parallel(false);
        let ser = nonlinear_jacobian(&s, FormKind::Emac, &u);
        set_parallel(true);
        assert_eq!(par.values(), ser.values());
    }
}
