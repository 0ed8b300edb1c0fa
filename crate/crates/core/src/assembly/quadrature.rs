//! Triangle quadrature rules in barycentric coordinates.

/// Points are barycentric triples; weights sum to the reference-triangle
/// area 1/2. Scale by twice the physical area to integrate on a triangle.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// 12-point symmetric rule exact for total degree 6 (Dunavant). Abscissae
    /// and weights were re-solved from the moment equations in 40-digit
    /// arithmetic.
    pub fn degree6() -> Self {
        const A1: f64 = 0.249_286_745_170_910_43;
        const A2: f64 = 0.063_089_014_491_502_23;
        const B: f64 = 0.053_145_049_844_816_945;
        const C: f64 = 0.310_352_451_033_784_4;
        const W1: f64 = 0.116_786_275_726_379_37;
        const W2: f64 = 0.050_844_906_370_206_82;
        const W3: f64 = 0.082_851_075_618_373_57;

        let mut points = Vec::with_capacity(12);
        let mut weights = Vec::with_capacity(12);
        for (a, w) in [(A1, W1), (A2, W2)] {
            let l = [1.0 - 2.0 * a, a, a];
            for k in 0..3 {
                points.push([l[k], l[(k + 1) % 3], l[(k + 2) % 3]]);
                weights.push(0.5 * w);
            }
        }
        let l = [B, C, 1.0 - B - C];
        for p in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            points.push([l[p[0]], l[p[1]], l[p[2]]]);
            weights.push(0.5 * W3);
        }
        QuadratureRule {
            points,
            weights,
            degree: 6,
        }
    }

    /// Collapsed (Duffy) tensor Gauss-Legendre rule with `n` points per
    /// direction. Exact for total degree `2n - 2`; used where integrands are
    /// not polynomial (error norms against analytic fields).
    pub fn collapsed_gauss(n: usize) -> Self {
        assert!(n >= 1);
        let (x, w) = gauss_legendre(n);
        // map [-1,1] -> [0,1]
        let s: Vec<f64> = x.iter().map(|&xi| 0.5 * (xi + 1.0)).collect();
        let ws: Vec<f64> = w.iter().map(|&wi| 0.5 * wi).collect();
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                // (u, v) in unit square -> (xi, eta) = (u, v (1 - u))
                let xi = s[i];
                let eta = s[j] * (1.0 - s[i]);
                points.push([1.0 - xi - eta, xi, eta]);
                weights.push(ws[i] * ws[j] * (1.0 - s[i]));
            }
        }
        QuadratureRule {
            points,
            weights,
            degree: 2 * n - 2,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Integral of l0^i l1^j l2^k over the reference triangle.
    fn monomial(i: usize, j: usize, k: usize) -> f64 {
        factorial(i) * factorial(j) * factorial(k) / factorial(i + j + k + 2)
    }

    fn check_exact(rule: &QuadratureRule, degree: usize, tol: f64) {
        for i in 0..=degree {
            for j in 0..=degree - i {
                for k in 0..=degree - i - j {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(l, w)| w * l[0].powi(i as i32) * l[1].powi(j as i32) * l[2].powi(k as i32))
                        .sum();
                    let exact = monomial(i, j, k);
                    assert!(
                        (q - exact).abs() <= tol,
                        "monomial ({i},{j},{k}): {q} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn degree6_weights_sum_to_half() {
        let r = QuadratureRule::degree6();
        assert_eq!(r.len(), 12);
        assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-16);
        for p in &r.points {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn degree6_is_exact() {
        check_exact(&QuadratureRule::degree6(), 6, 1e-14);
    }

    #[test]
    fn degree6_is_not_degree7() {
        let r = QuadratureRule::degree6();
        let worst = (0..=7)
            .flat_map(|i| (0..=7 - i).map(move |j| (i, j, 7 - i - j)))
            .map(|(i, j, k)| {
                let q: f64 = r
                    .points
                    .iter()
                    .zip(&r.weights)
                    .map(|(l, w)| w * l[0].powi(i as i32) * l[1].powi(j as i32) * l[2].powi(k as i32))
                    .sum();
                (q - monomial(i, j, k)).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst > 1e-10);
    }

    #[test]
    fn collapsed_gauss_is_exact() {
        for n in 1..=8 {
            let r = QuadratureRule::collapsed_gauss(n);
            check_exact(&r, 2 * n - 2, 1e-14);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((q - 2.0 / 9.0).abs() < 1e-15);
    }
}
