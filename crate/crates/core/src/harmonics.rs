//! Orthonormal complex spherical harmonics on S² and their surface gradients.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::quadrature::{SphereNode, SphereQuadrature};
use crate::Complex64;

/// Y_l^m for 0 <= l <= L, ordered by (l, m) with m running −l..=l.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub degree_cap: usize,
    pub labels: Vec<(usize, i64)>,
}

/// Values and surface gradients of every basis function at one point.
#[derive(Debug, Clone)]
pub struct BasisSample {
    pub values: Vec<Complex64>,
    pub gradients: Vec<[Complex64; 3]>,
}

impl SpectralBasis {
    pub fn new(degree_cap: usize) -> Self {
        let mut labels = Vec::with_capacity((degree_cap + 1) * (degree_cap + 1));
        for l in 0..=degree_cap {
            for m in -(l as i64)..=(l as i64) {
                labels.push((l, m));
            }
        }
        SpectralBasis { degree_cap, labels }
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(l: usize, m: i64) -> usize {
        l * l + (m + l as i64) as usize
    }

    /// Normalised associated Legendre functions P̄_l^m(cos θ) (Condon–Shortley
    /// phase, m >= 0) and their θ-derivatives, indexed [l][m].
    fn legendre_table(&self, node: &SphereNode) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let lmax = self.degree_cap;
        let x = node.cos_theta;
        let s = node.sin_theta;
        let mut p = vec![vec![0.0; lmax + 1]; lmax + 1];
        p[0][0] = 1.0 / (4.0 * PI).sqrt();
        for m in 1..=lmax {
            let mf = m as f64;
            p[m][m] = -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[m - 1][m - 1];
        }
        for m in 0..lmax {
            p[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * x * p[m][m];
        }
        for m in 0..=lmax {
            for l in (m + 2)..=lmax {
                let lf = l as f64;
                let mf = m as f64;
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
                p[l][m] = a * (x * p[l - 1][m] - b * p[l - 2][m]);
            }
        }
        let mut dp = vec![vec![0.0; lmax + 1]; lmax + 1];
        for l in 0..=lmax {
            for m in 0..=l {
                let lf = l as f64;
                let mf = m as f64;
                let lower = if l > m {
                    ((2.0 * lf + 1.0) * (lf * lf - mf * mf) / (2.0 * lf - 1.0)).sqrt() * p[l - 1][m]
                } else {
                    0.0
                };
                dp[l][m] = (lf * x * p[l][m] - lower) / s;
            }
        }
        (p, dp)
    }

    /// Values and Cartesian surface gradients ∇_S Y at a node.
    pub fn sample(&self, node: &SphereNode) -> BasisSample {
        let (p, dp) = self.legendre_table(node);
        let (e_theta, e_phi) = node.frame();
        let n = self.count();
        let mut values = Vec::with_capacity(n);
        let mut gradients = Vec::with_capacity(n);
        for &(l, m) in &self.labels {
            let ma = m.unsigned_abs() as usize;
            let phase = Complex64::from_polar(1.0, m as f64 * node.phi);
            // Y_l^{-m} = (-1)^m conj(Y_l^m) keeps P̄_l^{|m|} real with e^{imφ}.
            let sign = if m < 0 && ma % 2 == 1 { -1.0 } else { 1.0 };
            let val = phase * (sign * p[l][ma]);
            let d_theta = phase * (sign * dp[l][ma]);
            let d_phi = Complex64::new(0.0, m as f64) * val / node.sin_theta;
            let mut g = [Complex64::new(0.0, 0.0); 3];
            for c in 0..3 {
                g[c] = d_theta * e_theta[c] + d_phi * e_phi[c];
            }
            values.push(val);
            gradients.push(g);
        }
        BasisSample { values, gradients }
    }

    /// Value matrix (nodes × basis) over a quadrature rule.
    pub fn value_matrix(&self, quad: &SphereQuadrature) -> DMatrix<Complex64> {
        let samples: Vec<BasisSample> = crate::par_map(&quad.nodes, |n| self.sample(n));
        DMatrix::from_fn(quad.len(), self.count(), |j, i| samples[j].values[i])
    }

    /// Gram matrix ∫ Y_n conj(Y_m) dS under the given rule.
    pub fn gram(&self, quad: &SphereQuadrature) -> DMatrix<Complex64> {
        let v = self.value_matrix(quad);
        let w = DMatrix::from_fn(quad.len(), self.count(), |j, i| v[(j, i)] * quad.weights[j]);
        v.adjoint() * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_is_identity() {
        let basis = SpectralBasis::new(8);
        let quad = SphereQuadrature::build(3, 12).unwrap();
        let g = basis.gram(&quad);
        let n = basis.count();
        assert_eq!(n, 81);
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - Complex64::new(target, 0.0)).norm() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn y20_normalised_on_24_point_rule() {
        let basis = SpectralBasis::new(2);
        let quad = SphereQuadrature::build(3, 24).unwrap();
        let idx = SpectralBasis::index_of(2, 0);
        let norm = quad.integrate(|n| basis.sample(n).values[idx].norm_sqr());
        assert!((norm - 1.0).abs() < 1e-12);
        // Closed form Y_2^0 = sqrt(5/16π)(3cos²θ − 1).
        let node = SphereNode::from_angles(0.7, 1.3);
        let y = basis.sample(&node).values[idx];
        let exact = (5.0 / (16.0 * PI)).sqrt() * (3.0 * 0.7f64.cos().powi(2) - 1.0);
        assert!((y.re - exact).abs() < 1e-14 && y.im.abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let basis = SpectralBasis::new(5);
        let theta = 1.1;
        let phi = 0.4;
        let node = SphereNode::from_angles(theta, phi);
        let s = basis.sample(&node);
        let h = 1e-6;
        let tp = basis.sample(&SphereNode::from_angles(theta + h, phi));
        let tm = basis.sample(&SphereNode::from_angles(theta - h, phi));
        let pp = basis.sample(&SphereNode::from_angles(theta, phi + h));
        let pm = basis.sample(&SphereNode::from_angles(theta, phi - h));
        let (et, ep) = node.frame();
        for i in 0..basis.count() {
            let dth = (tp.values[i] - tm.values[i]) / (2.0 * h);
            let dph = (pp.values[i] - pm.values[i]) / (2.0 * h) / theta.sin();
            let g = s.gradients[i];
            let gt = g[0] * et[0] + g[1] * et[1] + g[2] * et[2];
            let gp = g[0] * ep[0] + g[1] * ep[1] + g[2] * ep[2];
            let gr = g[0] * node.point[0] + g[1] * node.point[1] + g[2] * node.point[2];
            assert!((gt - dth).norm() < 1e-7, "theta derivative {i}");
            assert!((gp - dph).norm() < 1e-7, "phi derivative {i}");
            assert!(gr.norm() < 1e-14, "gradient must be tangent");
        }
    }

    #[test]
    fn laplace_beltrami_quadratic_form_is_diagonal() {
        let basis = SpectralBasis::new(4);
        let quad = SphereQuadrature::build(3, 8).unwrap();
        for (i, &(l, _)) in basis.labels.iter().enumerate() {
            let e = quad.integrate(|n| {
                let g = basis.sample(n).gradients[i];
                g.iter().map(|c| c.norm_sqr()).sum()
            });
            assert!((e - (l * (l + 1)) as f64).abs() < 1e-11);
        }
    }
}
