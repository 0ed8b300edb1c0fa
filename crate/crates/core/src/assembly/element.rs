//! P2/P1 Lagrange shape functions on triangles.
//!
//! Local P2 node order: vertices 0, 1, 2, then the midpoints of edges
//! (0,1), (1,2), (2,0). Velocity dofs are interleaved per node, so local
//! velocity dof `2 * a + c` is component `c` of node `a`.

use super::quadrature::QuadratureRule;

pub const P2_NODES: usize = 6;
pub const P2_VDOFS: usize = 12;

/// P2 basis values at barycentric point `l`.
#[inline]
pub fn p2_values(l: &[f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Derivatives of the P2 basis with respect to the three barycentric
/// coordinates (treated as independent).
#[inline]
pub fn p2_barycentric_derivatives(l: &[f64; 3]) -> [[f64; 3]; 6] {
    [
        [4.0 * l[0] - 1.0, 0.0, 0.0],
        [0.0, 4.0 * l[1] - 1.0, 0.0],
        [0.0, 0.0, 4.0 * l[2] - 1.0],
        [4.0 * l[1], 4.0 * l[0], 0.0],
        [0.0, 4.0 * l[2], 4.0 * l[1]],
        [4.0 * l[2], 0.0, 4.0 * l[0]],
    ]
}

/// Affine triangle map data.
#[derive(Debug, Clone, Copy)]
pub struct TriangleGeometry {
    pub vertices: [[f64; 2]; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
}

impl TriangleGeometry {
    pub fn new(vertices: [[f64; 2]; 3]) -> Self {
        let [p0, p1, p2] = vertices;
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let inv = 1.0 / det;
        let grad_lambda = [
            [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
            [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
            [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
        ];
        TriangleGeometry {
            vertices,
            area: 0.5 * det,
            grad_lambda,
        }
    }

    #[inline]
    pub fn point(&self, l: &[f64; 3]) -> [f64; 2] {
        let v = &self.vertices;
        [
            l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
            l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
        ]
    }

    /// Physical gradients of the P2 basis at barycentric point `l`.
    #[inline]
    pub fn p2_gradients(&self, l: &[f64; 3]) -> [[f64; 2]; 6] {
        let d = p2_barycentric_derivatives(l);
        let g = &self.grad_lambda;
        let mut out = [[0.0; 2]; 6];
        for (a, da) in d.iter().enumerate() {
            for c in 0..2 {
                out[a][c] = da[0] * g[0][c] + da[1] * g[1][c] + da[2] * g[2][c];
            }
        }
        out
    }
}

/// Basis values and barycentric derivatives tabulated once per rule.
#[derive(Debug, Clone)]
pub struct ReferenceTables {
    pub rule: QuadratureRule,
    pub values: Vec<[f64; 6]>,
    pub bary_derivs: Vec<[[f64; 3]; 6]>,
}

impl ReferenceTables {
    pub fn new(rule: QuadratureRule) -> Self {
        let values = rule.points.iter().map(p2_values).collect();
        let bary_derivs = rule.points.iter().map(p2_barycentric_derivatives).collect();
        ReferenceTables {
            rule,
            values,
            bary_derivs,
        }
    }

    /// Physical P2 gradients at quadrature point `q` of `geo`.
    #[inline]
    pub fn gradients(&self, geo: &TriangleGeometry, q: usize) -> [[f64; 2]; 6] {
        let d = &self.bary_derivs[q];
        let g = &geo.grad_lambda;
        let mut out = [[0.0; 2]; 6];
        for a in 0..6 {
            for c in 0..2 {
                out[a][c] = d[a][0] * g[0][c] + d[a][1] * g[1][c] + d[a][2] * g[2][c];
            }
        }
        out
    }
}

/// Velocity value and gradient of a local P2 field.
/// `grad[i][j]` is the derivative of component `i` along direction `j`.
#[inline]
pub fn eval_velocity(coeffs: &[f64; 12], phi: &[f64; 6], dphi: &[[f64; 2]; 6]) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut u = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for a in 0..6 {
        for c in 0..2 {
            let k = coeffs[2 * a + c];
            u[c] += k * phi[a];
            g[c][0] += k * dphi[a][0];
            g[c][1] += k * dphi[a][1];
        }
    }
    (u, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_is_nodal() {
        let nodes = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ];
        for (i, l) in nodes.iter().enumerate() {
            let v = p2_values(l);
            for (j, vj) in v.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((vj - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gradients_sum_to_zero() {
        let geo = TriangleGeometry::new([[0.1, 0.2], [1.3, 0.1], [0.4, 0.9]]);
        let g = geo.p2_gradients(&[0.2, 0.3, 0.5]);
        for c in 0..2 {
            let s: f64 = g.iter().map(|gi| gi[c]).sum();
            assert!(s.abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let geo = TriangleGeometry::new([[0.1, 0.2], [1.3, 0.1], [0.4, 0.9]]);
        let l = [0.2, 0.3, 0.5];
        let g = geo.p2_gradients(&l);
        // barycentric coordinates of a physical point
        let bary = |p: [f64; 2]| {
            let gl = geo.grad_lambda;
            let v0 = geo.vertices[0];
            let l1 = gl[1][0] * (p[0] - v0[0]) + gl[1][1] * (p[1] - v0[1]);
            let l2 = gl[2][0] * (p[0] - v0[0]) + gl[2][1] * (p[1] - v0[1]);
            [1.0 - l1 - l2, l1, l2]
        };
        let x = geo.point(&l);
        let h = 1e-6;
        for c in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[c] += h;
            xm[c] -= h;
            let (vp, vm) = (p2_values(&bary(xp)), p2_values(&bary(xm)));
            for a in 0..6 {
                let fd = (vp[a] - vm[a]) / (2.0 * h);
                assert!((fd - g[a][c]).abs() < 1e-8, "basis {a} dir {c}");
            }
        }
    }

    #[test]
    fn area_positive_for_ccw() {
        let geo = TriangleGeometry::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!((geo.area - 0.5).abs() < 1e-16);
    }
}
