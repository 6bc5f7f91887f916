//! Separable perturbations h(x) = ρ(|x|)χ(x/|x|) and nonlinearities
//! f(x, z) = g(x, |z|²)z with primitive G(x, s) = ½∫₀ˢ g(x, t)dt.

use std::fmt;

use crate::error::{Error, Result};
use crate::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub enum RadialProfile {
    Zero,
    /// ρ(r) = c·r^{−2+ε}.
    InverseSquareEps { c: f64, eps: f64 },
    Table(RadialTable),
}

/// ρ tabulated against r; cubic Hermite in ln r between rows and power-law
/// continuation outside the table.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTable {
    log_r: Vec<f64>,
    values: Vec<Complex64>,
    slopes: Vec<Complex64>,
}

impl RadialTable {
    /// Rows `r re [im]`, whitespace or comma separated, `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<(f64, Complex64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<f64> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("radial table line {}: {e}", lineno + 1)))?;
            let (r, v) = match fields.as_slice() {
                [r, re] => (*r, Complex64::new(*re, 0.0)),
                [r, re, im] => (*r, Complex64::new(*re, *im)),
                _ => {
                    return Err(Error::Config(format!(
                        "radial table line {}: expected 2 or 3 columns",
                        lineno + 1
                    )))
                }
            };
            if !(r > 0.0) {
                return Err(Error::Config(format!("radial table line {}: r must be positive", lineno + 1)));
            }
            rows.push((r, v));
        }
        if rows.len() < 3 {
            return Err(Error::Config("radial table needs at least 3 rows".into()));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config("radial table has repeated radii".into()));
        }
        let log_r: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
        let values: Vec<Complex64> = rows.iter().map(|r| r.1).collect();
        let n = values.len();
        let slopes = (0..n)
            .map(|i| {
                let (lo, hi) = if i == 0 {
                    (0, 1)
                } else if i == n - 1 {
                    (n - 2, n - 1)
                } else {
                    (i - 1, i + 1)
                };
                (values[hi] - values[lo]) / (log_r[hi] - log_r[lo])
            })
            .collect();
        Ok(RadialTable { log_r, values, slopes })
    }

    /// (ρ, dρ/d ln r).
    fn eval(&self, r: f64) -> (Complex64, Complex64) {
        let t = r.ln();
        let n = self.log_r.len();
        if t <= self.log_r[0] || t >= self.log_r[n - 1] {
            let (i, j) = if t <= self.log_r[0] { (0, 1) } else { (n - 2, n - 1) };
            let anchor = if t <= self.log_r[0] { i } else { j };
            let v0 = self.values[anchor];
            // Power law through the two end rows when both are nonzero.
            if self.values[i].norm() > 0.0 && self.values[j].norm() > 0.0 {
                let p = (self.values[j].norm() / self.values[i].norm()).ln() / (self.log_r[j] - self.log_r[i]);
                let v = v0 * (p * (t - self.log_r[anchor])).exp();
                return (v, v * p);
            }
            return (v0, Complex64::new(0.0, 0.0));
        }
        let k = self.log_r.partition_point(|&x| x <= t) - 1;
        let h = self.log_r[k + 1] - self.log_r[k];
        let s = (t - self.log_r[k]) / h;
        let (p0, p1, m0, m1) = (self.values[k], self.values[k + 1], self.slopes[k] * h, self.slopes[k + 1] * h);
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        let v = p0 * h00 + m0 * h10 + p1 * h01 + m1 * h11;
        let d00 = 6.0 * s * s - 6.0 * s;
        let d10 = 3.0 * s * s - 4.0 * s + 1.0;
        let d01 = -6.0 * s * s + 6.0 * s;
        let d11 = 3.0 * s * s - 2.0 * s;
        let dv = (p0 * d00 + m0 * d10 + p1 * d01 + m1 * d11) / h;
        (v, dv)
    }
}

/// h(x) = ρ(|x|)·χ(x/|x|) with χ(θ) = 1 + b·θ₃.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub radial: RadialProfile,
    pub zonal: f64,
}

impl PerturbationSpec {
    pub fn zero() -> Self {
        PerturbationSpec {
            radial: RadialProfile::Zero,
            zonal: 0.0,
        }
    }

    pub fn inverse_square_eps(c: f64, eps: f64) -> Self {
        PerturbationSpec {
            radial: RadialProfile::InverseSquareEps { c, eps },
            zonal: 0.0,
        }
    }

    pub fn table(table: RadialTable) -> Self {
        PerturbationSpec {
            radial: RadialProfile::Table(table),
            zonal: 0.0,
        }
    }

    pub fn with_zonal(mut self, b: f64) -> Self {
        self.zonal = b;
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        let radial = match &self.radial {
            RadialProfile::Zero => RadialProfile::Zero,
            RadialProfile::InverseSquareEps { c, eps } => RadialProfile::InverseSquareEps { c: c * s, eps: *eps },
            RadialProfile::Table(t) => {
                let mut t = t.clone();
                t.values.iter_mut().for_each(|v| *v *= s);
                t.slopes.iter_mut().for_each(|v| *v *= s);
                RadialProfile::Table(t)
            }
        };
        PerturbationSpec {
            radial,
            zonal: self.zonal,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.radial {
            RadialProfile::Zero => true,
            RadialProfile::InverseSquareEps { c, .. } => *c == 0.0,
            RadialProfile::Table(t) => t.values.iter().all(|v| v.norm() == 0.0),
        }
    }

    pub fn is_radial(&self) -> bool {
        self.zonal == 0.0
    }

    /// The same ρ with χ ≡ 1.
    pub fn radial_part(&self) -> Self {
        PerturbationSpec {
            radial: self.radial.clone(),
            zonal: 0.0,
        }
    }

    pub fn rho(&self, r: f64) -> Complex64 {
        self.rho_and_log_derivative(r).0
    }

    /// (ρ(r), r ρ′(r)).
    pub fn rho_and_log_derivative(&self, r: f64) -> (Complex64, Complex64) {
        match &self.radial {
            RadialProfile::Zero => (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
            RadialProfile::InverseSquareEps { c, eps } => {
                let v = c * r.powf(eps - 2.0);
                (Complex64::new(v, 0.0), Complex64::new((eps - 2.0) * v, 0.0))
            }
            RadialProfile::Table(t) => t.eval(r),
        }
    }

    pub fn chi(&self, theta: &[f64; 3]) -> f64 {
        1.0 + self.zonal * theta[2]
    }

    /// h at x = rθ.
    pub fn h(&self, r: f64, theta: &[f64; 3]) -> Complex64 {
        self.rho(r) * self.chi(theta)
    }

    /// x·∇h at x = rθ, which is r ρ′(r) χ(θ) for a separable h.
    pub fn x_grad_h(&self, r: f64, theta: &[f64; 3]) -> Complex64 {
        self.rho_and_log_derivative(r).1 * self.chi(theta)
    }

    pub fn eps(&self) -> Option<f64> {
        match &self.radial {
            RadialProfile::InverseSquareEps { eps, .. } => Some(*eps),
            _ => None,
        }
    }

    /// Exponent q with |r²ρ(r)| ~ r^q near r, from the log-derivative.
    pub fn scaled_exponent(&self, r: f64) -> f64 {
        let (v, d) = self.rho_and_log_derivative(r);
        if v.norm() == 0.0 {
            return 2.0;
        }
        2.0 + (d / v).re
    }

    pub fn label(&self) -> String {
        let base = match &self.radial {
            RadialProfile::Zero => "zero".to_string(),
            RadialProfile::InverseSquareEps { c, eps } => format!("inverse_square_eps({c}, {eps})"),
            RadialProfile::Table(_) => "radial_table".to_string(),
        };
        if self.zonal != 0.0 {
            format!("{base}*(1+{}*theta3)", self.zonal)
        } else {
            base
        }
    }
}

/// A nonlinearity f(x, z) = g(x, |z|²)z.
pub trait Nonlinearity: fmt::Debug + Send + Sync {
    fn g(&self, x: &[f64; 3], s: f64) -> f64;
    /// G(x, s) = ½∫₀ˢ g(x, t)dt.
    fn big_g(&self, x: &[f64; 3], s: f64) -> f64;
    /// ∇_x G(x, s)·x.
    fn x_grad_big_g(&self, x: &[f64; 3], s: f64) -> f64;
    fn growth_constant(&self) -> f64;
    fn label(&self) -> String;
    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoNonlinearity;

impl Nonlinearity for NoNonlinearity {
    fn g(&self, _: &[f64; 3], _: f64) -> f64 {
        0.0
    }
    fn big_g(&self, _: &[f64; 3], _: f64) -> f64 {
        0.0
    }
    fn x_grad_big_g(&self, _: &[f64; 3], _: f64) -> f64 {
        0.0
    }
    fn growth_constant(&self) -> f64 {
        0.0
    }
    fn label(&self) -> String {
        "zero".into()
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// g(x, s) = coupling·s^p.
#[derive(Debug, Clone, Copy)]
pub struct PowerNonlinearity {
    pub p: f64,
    pub coupling: f64,
}

impl Nonlinearity for PowerNonlinearity {
    fn g(&self, _: &[f64; 3], s: f64) -> f64 {
        self.coupling * s.powf(self.p)
    }
    fn big_g(&self, _: &[f64; 3], s: f64) -> f64 {
        self.coupling * s.powf(self.p + 1.0) / (2.0 * (self.p + 1.0))
    }
    fn x_grad_big_g(&self, _: &[f64; 3], _: f64) -> f64 {
        0.0
    }
    fn growth_constant(&self) -> f64 {
        self.coupling.abs()
    }
    fn label(&self) -> String {
        format!("power({}, {})", self.p, self.coupling)
    }
    fn is_zero(&self) -> bool {
        self.coupling == 0.0
    }
}

/// Samples the growth bound |g s| + |∇_xG·x| ≤ C_g(s + s^{2*/2}) and the
/// primitive relation 2∂_sG = g on a lattice of points and amplitudes.
pub fn validate_nonlinearity(g: &dyn Nonlinearity, dim: usize) -> Result<()> {
    if dim < 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let crit_half = dim as f64 / (dim as f64 - 2.0);
    let cg = g.growth_constant();
    let radii = [1e-3, 0.1, 0.5, 1.0];
    let amplitudes = [0.0, 1e-6, 1e-3, 0.1, 0.5, 1.0, 2.0, 10.0, 1e3, 1e6];
    let dirs = [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [-0.48, 0.6, -0.64]];
    for &r in &radii {
        for d in &dirs {
            let x = [r * d[0], r * d[1], r * d[2]];
            for &s in &amplitudes {
                let lhs = (g.g(&x, s) * s).abs() + g.x_grad_big_g(&x, s).abs();
                let rhs = cg * (s + s.powf(crit_half));
                if !lhs.is_finite() || lhs > rhs * (1.0 + 1e-12) + 1e-300 {
                    return Err(Error::InvalidNonlinearity(format!(
                        "{}: growth bound fails at |x| = {r}, s = {s}: {lhs:.4e} > C_g·(s + s^(2*/2)) = {rhs:.4e}",
                        g.label()
                    )));
                }
                if s > 0.0 {
                    let hstep = 1e-5 * s;
                    let ds = (g.big_g(&x, s + hstep) - g.big_g(&x, s - hstep)) / (2.0 * hstep);
                    let gv = g.g(&x, s);
                    if (2.0 * ds - gv).abs() > 1e-6 * gv.abs().max(1e-300) + 1e-300 {
                        return Err(Error::InvalidNonlinearity(format!(
                            "{}: 2 dG/ds = {:.6e} differs from g = {gv:.6e} at s = {s}",
                            g.label(),
                            2.0 * ds
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_radial_derivative() {
        let h = PerturbationSpec::inverse_square_eps(0.1, 0.5).with_zonal(0.3);
        let th = [0.0, 0.6, 0.8];
        let r = 0.2;
        let step = 1e-6;
        let fd = (h.h(r + step, &th) - h.h(r - step, &th)) / (2.0 * step) * r;
        assert!((fd - h.x_grad_h(r, &th)).norm() < 1e-7);
        assert!((h.scaled_exponent(0.01) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn table_reproduces_power_law() {
        let mut text = String::new();
        for i in 0..60 {
            let r = 1e-5 * 10f64.powf(i as f64 / 10.0);
            text.push_str(&format!("{r:e} {}\n", 0.1 * r.powf(-1.5)));
        }
        let table = PerturbationSpec::table(RadialTable::parse(&text).unwrap());
        let exact = PerturbationSpec::inverse_square_eps(0.1, 0.5);
        for r in [1e-6, 3e-4, 0.02, 0.7] {
            let a = table.rho_and_log_derivative(r);
            let b = exact.rho_and_log_derivative(r);
            assert!((a.0 - b.0).norm() < 1e-3 * b.0.norm());
            assert!((a.1 - b.1).norm() < 3e-2 * b.1.norm());
        }
    }

    #[test]
    fn power_nonlinearity_validity() {
        validate_nonlinearity(&PowerNonlinearity { p: 1.0, coupling: 1.0 }, 3).unwrap();
        validate_nonlinearity(&PowerNonlinearity { p: 2.0, coupling: 0.5 }, 3).unwrap();
        validate_nonlinearity(&NoNonlinearity, 3).unwrap();
        assert!(matches!(
            validate_nonlinearity(&PowerNonlinearity { p: 2.5, coupling: 1.0 }, 3),
            Err(Error::InvalidNonlinearity(_))
        ));
        assert!(validate_nonlinearity(&PowerNonlinearity { p: 1.5, coupling: 1.0 }, 4).is_err());
    }
}
