//! Chebyshev–Lobatto grid in t = ln r on [ln r_min, ln R] with barycentric
//! interpolation, spectral differentiation and cumulative integration.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::Complex64;

#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub r_min: f64,
    pub r_max: f64,
    /// ln r at the nodes, strictly increasing.
    pub t: Vec<f64>,
    /// r at the nodes, strictly increasing.
    pub nodes: Vec<f64>,
    bary: Vec<f64>,
    diff: DMatrix<f64>,
    cumint: DMatrix<f64>,
}

impl RadialGrid {
    /// `count` nodes between `r_min_factor·r_max` and `r_max`.
    pub fn new(r_max: f64, r_min_factor: f64, count: usize) -> Result<Self> {
        if !(r_max > 0.0) || !(r_min_factor > 0.0 && r_min_factor < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "radial grid needs R > 0 and 0 < r_min/R < 1, got R = {r_max}, factor = {r_min_factor}"
            )));
        }
        if count < 8 {
            return Err(Error::InvalidArgument(format!("radial grid needs >= 8 nodes, got {count}")));
        }
        let r_min = r_min_factor * r_max;
        let a = r_min.ln();
        let b = r_max.ln();
        let n = count - 1;
        let t: Vec<f64> = (0..=n)
            .map(|j| {
                let x = -(PI * j as f64 / n as f64).cos();
                0.5 * (a + b) + 0.5 * (b - a) * x
            })
            .collect();
        let mut t = t;
        t[0] = a;
        t[n] = b;
        let nodes: Vec<f64> = t.iter().map(|x| x.exp()).collect();
        let bary: Vec<f64> = (0..=n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let mut diff = DMatrix::zeros(n + 1, n + 1);
        for i in 0..=n {
            let mut row = 0.0;
            for j in 0..=n {
                if i != j {
                    let d = bary[j] / bary[i] / (t[i] - t[j]);
                    diff[(i, j)] = d;
                    row += d;
                }
            }
            diff[(i, i)] = -row;
        }
        let half = 0.5 * (b - a);
        let mut cumint = DMatrix::zeros(n + 1, n + 1);
        for col in 0..=n {
            let mut e = vec![0.0; n + 1];
            e[col] = 1.0;
            let c = cumulative_unit(&e);
            for i in 0..=n {
                cumint[(i, col)] = half * c[i];
            }
        }
        Ok(RadialGrid {
            r_min,
            r_max,
            t,
            nodes,
            bary,
            diff,
            cumint,
        })
    }

    pub fn count(&self) -> usize {
        self.t.len()
    }

    pub fn a(&self) -> f64 {
        self.t[0]
    }

    pub fn b(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.r_min * (1.0 - 1e-12) && r <= self.r_max * (1.0 + 1e-12)
    }

    pub fn check(&self, r: f64) -> Result<()> {
        if self.contains(r) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "radius {r:.6e} outside grid [{:.6e}, {:.6e}]",
                self.r_min, self.r_max
            )))
        }
    }

    pub fn diff_matrix(&self) -> &DMatrix<f64> {
        &self.diff
    }

    /// Barycentric weights λ_j(t) with Σ λ_j f_j the interpolant at t.
    pub fn interp_weights(&self, t: f64) -> Vec<f64> {
        let n = self.t.len();
        let mut out = vec![0.0; n];
        for j in 0..n {
            if (t - self.t[j]).abs() < 1e-14 * (1.0 + t.abs()) {
                out[j] = 1.0;
                return out;
            }
        }
        let mut total = 0.0;
        for j in 0..n {
            let c = self.bary[j] / (t - self.t[j]);
            out[j] = c;
            total += c;
        }
        for o in &mut out {
            *o /= total;
        }
        out
    }

    pub fn interpolate(&self, values: &[Complex64], t: f64) -> Complex64 {
        self.interp_weights(t)
            .iter()
            .zip(values)
            .map(|(w, v)| v * *w)
            .sum()
    }

    pub fn interpolate_real(&self, values: &[f64], t: f64) -> f64 {
        self.interp_weights(t).iter().zip(values).map(|(w, v)| v * w).sum()
    }

    /// d/dt at the nodes.
    pub fn derivative(&self, values: &[Complex64]) -> Vec<Complex64> {
        apply(&self.diff, values)
    }

    pub fn derivative_real(&self, values: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(values);
        (&self.diff * v).iter().cloned().collect()
    }

    /// ∫_a^{t_i} f dt at every node.
    pub fn cumulative(&self, values: &[Complex64]) -> Vec<Complex64> {
        apply(&self.cumint, values)
    }

    pub fn cumulative_real(&self, values: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(values);
        (&self.cumint * v).iter().cloned().collect()
    }

    /// ∫_a^b f dt (Clenshaw–Curtis).
    pub fn integral(&self, values: &[Complex64]) -> Complex64 {
        let n = self.t.len() - 1;
        (0..=n).map(|j| values[j] * self.cumint[(n, j)]).sum()
    }

    /// Solves K' + c K = p with K(a) = k_a by collocation (stable for Re c ≥ 0).
    pub fn solve_first_order(&self, c: Complex64, p: &[Complex64], k_a: Complex64) -> Result<Vec<Complex64>> {
        let n = self.t.len();
        let mut m = DMatrix::<Complex64>::from_fn(n, n, |i, j| Complex64::new(self.diff[(i, j)], 0.0));
        for i in 0..n {
            m[(i, i)] += c;
        }
        let mut rhs = DVector::from_column_slice(p);
        for j in 0..n {
            m[(0, j)] = Complex64::new(0.0, 0.0);
        }
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        rhs[0] = k_a;
        let sol = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NumericFailure("first-order collocation system is singular".into()))?;
        Ok(sol.iter().cloned().collect())
    }

    /// ∫_a^{t_i} e^{c τ} p(τ) dτ at the nodes, returned as the smooth factor
    /// K with ∫ = e^{c t_i} K_i. Needs c > 0.
    pub fn weighted_cumulative(&self, c: f64, p: &[Complex64]) -> Result<Vec<Complex64>> {
        // I = e^{ct} K ⇒ K' + cK = p, K(a) = 0.
        self.solve_first_order(Complex64::new(c, 0.0), p, Complex64::new(0.0, 0.0))
    }

    /// Midpoints in t between consecutive nodes.
    pub fn midpoints(&self) -> Vec<f64> {
        self.t.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

fn apply(m: &DMatrix<f64>, values: &[Complex64]) -> Vec<Complex64> {
    let n = m.nrows();
    (0..n)
        .map(|i| (0..values.len()).map(|j| values[j] * m[(i, j)]).sum())
        .collect()
}

/// Cumulative integral on [−1, 1] of the Chebyshev interpolant through
/// values at ascending Lobatto nodes, evaluated at those nodes.
fn cumulative_unit(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    // Node k (descending x_k = cos(πk/n)) carries values[n − k].
    let f = |k: usize| values[n - k];
    let mut a = vec![0.0; n + 1];
    for (m, am) in a.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in 0..=n {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            s += w * f(k) * (PI * (m * k) as f64 / n as f64).cos();
        }
        *am = 2.0 * s / n as f64;
    }
    a[0] *= 0.5;
    a[n] *= 0.5;
    // Antiderivative coefficients b_0..b_{n+1}.
    let mut b = vec![0.0; n + 2];
    for m in 0..=n {
        let am = a[m];
        match m {
            0 => b[1] += am,
            1 => {
                b[2] += am / 4.0;
                b[0] -= am / 4.0;
            }
            _ => {
                let mf = m as f64;
                b[m + 1] += am / (2.0 * (mf + 1.0));
                b[m - 1] -= am / (2.0 * (mf - 1.0));
            }
        }
    }
    // F(x) − F(−1); T_m(−1) = (−1)^m.
    let f_left: f64 = b
        .iter()
        .enumerate()
        .map(|(m, bm)| if m % 2 == 0 { *bm } else { -*bm })
        .sum();
    let mut out = vec![0.0; n + 1];
    for k in 0..=n {
        let val: f64 = b
            .iter()
            .enumerate()
            .map(|(m, bm)| bm * (PI * (m * k) as f64 / n as f64).cos())
            .sum();
        out[n - k] = val - f_left;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn nodes_are_increasing_and_span() {
        let g = RadialGrid::new(2.0, 1e-4, 40).unwrap();
        assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!((g.nodes[0] - 2e-4).abs() < 1e-16 && (g.nodes[39] - 2.0).abs() < 1e-14);
        assert!(RadialGrid::new(1.0, 1e-4, 4).is_err());
        assert!(RadialGrid::new(-1.0, 1e-4, 40).is_err());
    }

    #[test]
    fn spectral_calculus_on_exponential() {
        let g = RadialGrid::new(1.0, 1e-4, 64).unwrap();
        let f: Vec<Complex64> = g.t.iter().map(|t| c((0.7 * t).exp())).collect();
        let d = g.derivative(&f);
        let ci = g.cumulative(&f);
        let a = g.a();
        for (i, t) in g.t.iter().enumerate() {
            assert!((d[i].re - 0.7 * (0.7 * t).exp()).abs() < 1e-11);
            let exact = ((0.7 * t).exp() - (0.7 * a).exp()) / 0.7;
            assert!((ci[i].re - exact).abs() < 1e-13);
        }
        let tm = -3.3;
        assert!((g.interpolate(&f, tm).re - (0.7 * tm).exp()).abs() < 1e-14);
        assert!((g.integral(&f).re - (1.0 - (0.7 * a).exp()) / 0.7).abs() < 1e-13);
    }

    #[test]
    fn weighted_cumulative_is_relative_accurate() {
        // ∫_a^t e^{5τ} dτ spans 20 orders of magnitude.
        let g = RadialGrid::new(1.0, 1e-4, 48).unwrap();
        let p = vec![c(1.0); g.count()];
        let k = g.weighted_cumulative(5.0, &p).unwrap();
        let a = g.a();
        for (i, t) in g.t.iter().enumerate().skip(1) {
            let exact = (1.0 - (5.0 * (a - t)).exp()) / 5.0;
            assert!((k[i].re - exact).abs() < 1e-12 * exact.abs(), "{i} {} {exact}", k[i].re);
        }
    }
}
