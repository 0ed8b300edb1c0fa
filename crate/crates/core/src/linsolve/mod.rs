//! Reduced saddle-point systems and their direct solution.
//!
//! Unknowns are ordered `[u_free, p_sys]`. The matrix is
//!
//! ```text
//! [  K   -B^T ]
//! [ -B    0   ]
//! ```
//!
//! with `K` the momentum block and `B` the divergence. When the pressure is
//! only determined up to a constant, one pressure unknown is held at zero
//! inside the linear system and the requested normalization is applied
//! afterwards (see [`TaylorHoodSpace::normalize_pressure`]). A bordered
//! mean-value row would be dense and costs an order of magnitude in fill.
//!
//! The sparsity pattern depends only on the space, so the symbolic LU
//! factorization is computed once and reused.

use std::sync::OnceLock;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::MatMut;
use thiserror::Error;

use crate::assembly::sparse::CsrMatrix;
use crate::fespace::{DofRole, FieldCoeffs, FieldKind, PressureGauge, TaylorHoodSpace};

const DROPPED: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("symbolic factorization failed: {0}")]
    Symbolic(String),
    #[error("numeric factorization failed: {0}")]
    Factorization(String),
    #[error("linear residual {achieved:.3e} exceeds tolerance {tolerance:.3e}")]
    Residual { achieved: f64, tolerance: f64 },
    #[error("right-hand side has length {found}, system has {expected} unknowns")]
    Dimension { expected: usize, found: usize },
}

/// Maps from full-dof operators to the reduced saddle matrix.
pub struct SaddleLayout {
    nu: usize,
    np: usize,
    pattern: SymbolicSparseColMat<usize>,
    /// free velocity index per full velocity dof
    vel_free: Vec<Option<usize>>,
    /// system pressure index per full pressure dof
    pre_sys: Vec<Option<usize>>,
    vv_map: Vec<u32>,
    b_map: Vec<u32>,
    bt_map: Vec<u32>,
    lu_symbolic: OnceLock<Result<SymbolicLu<usize>, SolveError>>,
}

impl std::fmt::Debug for SaddleLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SaddleLayout")
            .field("nu", &self.nu)
            .field("np", &self.np)
            .field("nnz", &self.nnz())
            .finish()
    }
}

impl SaddleLayout {
    pub(crate) fn new(space: &TaylorHoodSpace) -> Self {
        let nu = space.free_velocity_count();
        let vel_free: Vec<Option<usize>> = space
            .velocity_roles()
            .iter()
            .map(|r| match *r {
                DofRole::Free(k) => Some(k),
                DofRole::Fixed(_) => None,
            })
            .collect();
        let internal_pin = space.gauge() == PressureGauge::MeanZero && space.free_pressure_count() > 0;
        let pre_sys: Vec<Option<usize>> = space
            .pressure_roles()
            .iter()
            .map(|r| match (*r, internal_pin) {
                (Some(0), true) => None,
                (Some(k), true) => Some(k - 1),
                (None, _) => None,
                (r, false) => r,
            })
            .collect();
        let np = space.free_pressure_count() - usize::from(internal_pin);
        let n = nu + np;
        let pat = space.patterns();

        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for r in 0..pat.vv.nrows() {
            let Some(kr) = vel_free[r] else { continue };
            for (c, _) in pat.vv.row(r) {
                if let Some(kc) = vel_free[c] {
                    cols[kc].push(kr);
                }
            }
        }
        for q in 0..pat.pv.nrows() {
            let Some(kq) = pre_sys[q] else { continue };
            for (c, _) in pat.pv.row(q) {
                if let Some(kc) = vel_free[c] {
                    cols[kc].push(nu + kq);
                    cols[nu + kq].push(kc);
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in &mut cols {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        let find = |r: usize, c: usize| -> u32 {
            let rows = &row_idx[col_ptr[c]..col_ptr[c + 1]];
            (col_ptr[c] + rows.binary_search(&r).expect("entry in pattern")) as u32
        };

        let mut vv_map = vec![DROPPED; pat.vv.nnz()];
        for r in 0..pat.vv.nrows() {
            let Some(kr) = vel_free[r] else { continue };
            let start = pat.vv.row_ptr()[r];
            for (off, (c, _)) in pat.vv.row(r).enumerate() {
                if let Some(kc) = vel_free[c] {
                    vv_map[start + off] = find(kr, kc);
                }
            }
        }
        let mut b_map = vec![DROPPED; pat.pv.nnz()];
        let mut bt_map = vec![DROPPED; pat.pv.nnz()];
        for q in 0..pat.pv.nrows() {
            let Some(kq) = pre_sys[q] else { continue };
            let start = pat.pv.row_ptr()[q];
            for (off, (c, _)) in pat.pv.row(q).enumerate() {
                if let Some(kc) = vel_free[c] {
                    b_map[start + off] = find(nu + kq, kc);
                    bt_map[start + off] = find(kc, nu + kq);
                }
            }
        }

        let pattern = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        SaddleLayout {
            nu,
            np,
            pattern,
            vel_free,
            pre_sys,
            vv_map,
            b_map,
            bt_map,
            lu_symbolic: OnceLock::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.nu + self.np
    }

    pub fn nnz(&self) -> usize {
        self.pattern.row_idx().len()
    }

    pub fn velocity_len(&self) -> usize {
        self.nu
    }

    pub fn pressure_len(&self) -> usize {
        self.np
    }

    /// Reduced saddle matrix from full `K` (velocity pattern) and full `B`
    /// (pressure-velocity pattern).
    pub fn assemble(&self, k: &CsrMatrix, b: &CsrMatrix) -> SaddleMatrix<'_> {
        let mut values = vec![0.0; self.nnz()];
        for (pos, v) in self.vv_map.iter().zip(k.values()) {
            if *pos != DROPPED {
                values[*pos as usize] += v;
            }
        }
        for ((pb, pbt), v) in self.b_map.iter().zip(&self.bt_map).zip(b.values()) {
            if *pb != DROPPED {
                values[*pb as usize] -= v;
                values[*pbt as usize] -= v;
            }
        }
        SaddleMatrix { layout: self, values }
    }

    /// Sums a full velocity residual into free-dof rows.
    pub fn reduce_velocity(&self, full: &[f64], out: &mut [f64]) {
        out[..self.nu].iter_mut().for_each(|v| *v = 0.0);
        for (k, v) in self.vel_free.iter().zip(full) {
            if let Some(k) = k {
                out[*k] += v;
            }
        }
    }

    /// Sums a full pressure-row residual into system pressure rows.
    pub fn reduce_pressure(&self, full: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, v) in self.pre_sys.iter().zip(full) {
            if let Some(k) = k {
                out[*k] += v;
            }
        }
    }

    /// Full pressure vector from system pressure unknowns.
    pub fn expand_pressure(&self, sys: &[f64]) -> FieldCoeffs {
        FieldCoeffs {
            kind: FieldKind::Pressure,
            values: self.pre_sys.iter().map(|k| k.map_or(0.0, |k| sys[k])).collect(),
        }
    }

    fn symbolic_lu(&self) -> Result<&SymbolicLu<usize>, SolveError> {
        self.lu_symbolic
            .get_or_init(|| {
                SymbolicLu::try_new(self.pattern.as_ref()).map_err(|e| SolveError::Symbolic(format!("{e:?}")))
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

/// Numeric values on a [`SaddleLayout`] pattern.
pub struct SaddleMatrix<'a> {
    layout: &'a SaddleLayout,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    /// `|A x - b|_inf / max(|b|_inf, tiny)` after refinement
    pub relative_residual: f64,
    pub refinement_steps: usize,
}

impl<'a> SaddleMatrix<'a> {
    pub fn layout(&self) -> &SaddleLayout {
        self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn csc(&self) -> SparseColMatRef<'_, usize, f64> {
        SparseColMatRef::new(self.layout.pattern.as_ref(), &self.values)
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let pat = &self.layout.pattern;
        let mut y = vec![0.0; self.layout.size()];
        for c in 0..self.layout.size() {
            let xc = x[c];
            for k in pat.col_ptr()[c]..pat.col_ptr()[c + 1] {
                y[pat.row_idx()[k]] += self.values[k] * xc;
            }
        }
        y
    }

    pub fn factorize(&self) -> Result<Factorization<'_>, SolveError> {
        let sym = self.layout.symbolic_lu()?.clone();
        let lu = Lu::try_new_with_symbolic(sym, self.csc()).map_err(|e| SolveError::Factorization(format!("{e:?}")))?;
        Ok(Factorization { matrix: self, lu })
    }

    /// Factorizes and solves `A x = rhs`, refining until the relative
    /// residual is below `tol` (at most three refinement steps).
    pub fn solve(&self, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats), SolveError> {
        self.factorize()?.solve(rhs, tol)
    }
}

pub struct Factorization<'a> {
    matrix: &'a SaddleMatrix<'a>,
    lu: Lu<usize, f64>,
}

impl Factorization<'_> {
    fn apply(&self, b: &mut [f64]) {
        let n = b.len();
        self.lu.solve_in_place(MatMut::from_column_major_slice_mut(b, n, 1));
    }

    pub fn solve(&self, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats), SolveError> {
        let n = self.matrix.layout.size();
        if rhs.len() != n {
            return Err(SolveError::Dimension { expected: n, found: rhs.len() });
        }
        let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut x = rhs.to_vec();
        self.apply(&mut x);
        let residual = |x: &[f64]| -> Vec<f64> {
            let ax = self.matrix.mul_vec(x);
            rhs.iter().zip(ax).map(|(b, a)| b - a).collect()
        };
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
        let mut r = residual(&x);
        let mut rel = norm(&r);
        let mut steps = 0;
        while rel > tol && steps < 3 {
            self.apply(&mut r);
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
            steps += 1;
            r = residual(&x);
            let new = norm(&r);
            if !(new < rel) {
                rel = new;
                break;
            }
            rel = new;
        }
        if !rel.is_finite() || rel > tol {
            return Err(SolveError::Residual { achieved: rel, tolerance: tol });
        }
        Ok((
            x,
            SolveStats {
                relative_residual: rel,
                refinement_steps: steps,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_divergence, assemble_viscous};
    use crate::fespace::{build_space, build_space_with_gauge, BcSpec, BoundaryCondition};
    use crate::mesh::{generate_unit_square, BoundaryMarker};
    use std::sync::Arc;

    fn walls() -> BcSpec {
        BcSpec::new().with(BoundaryMarker::Wall, BoundaryCondition::no_slip())
    }

    #[test]
    fn stokes_saddle_is_symmetric_and_solvable() {
        for gauge in [PressureGauge::MeanZero, PressureGauge::PinDof] {
            let s = build_space_with_gauge(Arc::new(generate_unit_square(4)), &walls(), gauge).unwrap();
            let layout = s.saddle_layout();
            let a = assemble_viscous(&s);
            let b = assemble_divergence(&s);
            let mat = layout.assemble(&a, &b);
            let n = layout.size();
            let x: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64 - 6.0) / 5.0).collect();
            let y: Vec<f64> = (0..n).map(|i| ((i * 3 % 11) as f64 - 4.0) / 3.0).collect();
            let ax = mat.mul_vec(&x);
            let ay = mat.mul_vec(&y);
            let xay: f64 = x.iter().zip(&ay).map(|(a, b)| a * b).sum();
            let yax: f64 = y.iter().zip(&ax).map(|(a, b)| a * b).sum();
            assert!((xay - yax).abs() < 1e-12 * xay.abs().max(1.0));
            let (sol, stats) = mat.solve(&ax, 1e-12).unwrap();
            assert!(stats.relative_residual < 1e-12);
            let err = sol.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-8, "{gauge:?}: {err}");
        }
    }

    #[test]
    fn symbolic_factorization_is_cached() {
        let s = build_space(Arc::new(generate_unit_square(3)), &walls()).unwrap();
        let layout = s.saddle_layout();
        let first = layout.symbolic_lu().unwrap() as *const _;
        let a = assemble_viscous(&s);
        let mat = layout.assemble(&a, &assemble_divergence(&s));
        mat.solve(&vec![1.0; layout.size()], 1e-10).unwrap();
        assert_eq!(first, layout.symbolic_lu().unwrap() as *const _);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = build_space(Arc::new(generate_unit_square(2)), &walls()).unwrap();
        let layout = s.saddle_layout();
        let a = assemble_viscous(&s);
        let mat = layout.assemble(&a, &assemble_divergence(&s));
        assert!(matches!(mat.solve(&[1.0], 1e-10), Err(SolveError::Dimension { .. })));
    }
}
