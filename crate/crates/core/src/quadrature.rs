//! Gauss–Legendre rules on intervals and product rules on the unit sphere S².

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|&xi| mid + half * xi).collect(),
        w.iter().map(|&wi| half * wi).collect(),
    )
}

/// A quadrature node on S² with its spherical coordinates cached.
#[derive(Debug, Clone, Copy)]
pub struct SphereNode {
    pub point: [f64; 3],
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub phi: f64,
}

impl SphereNode {
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        Self::from_cos_phi(ct, st, phi)
    }

    fn from_cos_phi(cos_theta: f64, sin_theta: f64, phi: f64) -> Self {
        let (sp, cp) = phi.sin_cos();
        SphereNode {
            point: [sin_theta * cp, sin_theta * sp, cos_theta],
            cos_theta,
            sin_theta,
            phi,
        }
    }

    /// Node for an arbitrary unit vector. Points within 1e-9 of a pole are
    /// nudged off it so that the azimuthal frame stays defined.
    pub fn from_point(p: [f64; 3]) -> Self {
        let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let z = (p[2] / norm).clamp(-1.0, 1.0);
        let mut theta = z.acos();
        theta = theta.clamp(1e-9, PI - 1e-9);
        let phi = p[1].atan2(p[0]);
        Self::from_angles(theta, phi)
    }

    /// Unit vectors e_theta and e_phi of the local frame.
    pub fn frame(&self) -> ([f64; 3], [f64; 3]) {
        let (sp, cp) = self.phi.sin_cos();
        (
            [self.cos_theta * cp, self.cos_theta * sp, -self.sin_theta],
            [-sp, cp, 0.0],
        )
    }
}

/// Product rule: Gauss–Legendre in cos(theta) times the uniform rule in phi.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub nodes: Vec<SphereNode>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
    pub resolution: usize,
}

impl SphereQuadrature {
    /// `resolution` polar nodes and `2·resolution` azimuthal nodes; exact for
    /// polynomials of total degree `2·resolution − 1`.
    pub fn build(dim: usize, resolution: usize) -> Result<Self> {
        if dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if resolution < 4 {
            return Err(Error::InvalidArgument(format!(
                "sphere quadrature resolution must be >= 4, got {resolution}"
            )));
        }
        let (x, w) = gauss_legendre(resolution);
        let n_phi = 2 * resolution;
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(resolution * n_phi);
        let mut weights = Vec::with_capacity(resolution * n_phi);
        for (&ct, &wt) in x.iter().zip(&w) {
            let st = (1.0 - ct * ct).sqrt();
            for j in 0..n_phi {
                let phi = (j as f64 + 0.5) * dphi;
                nodes.push(SphereNode::from_cos_phi(ct, st, phi));
                weights.push(wt * dphi);
            }
        }
        Ok(SphereQuadrature {
            nodes,
            weights,
            exactness_degree: 2 * resolution - 1,
            resolution,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: Fn(&SphereNode) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(n, w)| w * f(n))
            .sum()
    }

    /// Largest absolute error over all monomials x^a y^b z^c with
    /// a + b + c <= `degree`.
    pub fn monomial_error(&self, degree: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..=degree {
            for b in 0..=(degree - a) {
                for c in 0..=(degree - a - b) {
                    let got = self.integrate(|n| {
                        n.point[0].powi(a as i32) * n.point[1].powi(b as i32) * n.point[2].powi(c as i32)
                    });
                    worst = worst.max((got - sphere_monomial_integral(a, b, c)).abs());
                }
            }
        }
        worst
    }
}

/// Exact ∫_{S²} x^a y^b z^c dS.
pub fn sphere_monomial_integral(a: usize, b: usize, c: usize) -> f64 {
    if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
        return 0.0;
    }
    let df = |k: usize| -> f64 {
        // (k-1)!! for even k
        let mut acc = 1.0;
        let mut j = k as i64 - 1;
        while j > 1 {
            acc *= j as f64;
            j -= 2;
        }
        acc
    };
    let mut denom = 1.0;
    let mut j = (a + b + c + 1) as i64;
    while j > 1 {
        denom *= j as f64;
        j -= 2;
    }
    4.0 * PI * df(a) * df(b) * df(c) / denom
}

/// Surface measure ω_{N−1} of the unit sphere S^{N−1}.
pub fn sphere_area(dim: usize) -> f64 {
    // ω_{N−1} = 2 π^{N/2} / Γ(N/2), by the recursion ω_{N+1} = 2π ω_{N-1} / N.
    let mut area = if dim % 2 == 0 { 2.0 * PI } else { 4.0 * PI };
    let mut d = if dim % 2 == 0 { 2 } else { 3 };
    while d < dim {
        area *= 2.0 * PI / d as f64;
        d += 2;
    }
    area
}
