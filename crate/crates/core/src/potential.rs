//! Angular coefficients A: S² → R³ (tangent) and a: S² → R of the operator
//! (−i∇_S + A)² − a.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::SphereQuadrature;

pub type VectorSampler = Arc<dyn Fn(&[f64; 3]) -> [f64; 3] + Send + Sync>;
pub type ScalarSampler = Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct AngularPotential {
    pub dim: usize,
    pub magnetic: VectorSampler,
    pub electric: ScalarSampler,
    pub smoothness_tag: String,
    pub label: String,
}

impl fmt::Debug for AngularPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AngularPotential")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("smoothness_tag", &self.smoothness_tag)
            .finish()
    }
}

/// Built-in smooth gauge functions φ on S², given as restrictions of
/// polynomials on R³.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaugeFunction(pub u32);

impl GaugeFunction {
    pub fn value(&self, p: &[f64; 3]) -> f64 {
        let [x, y, z] = *p;
        match self.0 {
            1 => 0.5 * z,
            2 => 0.3 * x * y,
            _ => 0.25 * (x * x - y * y) + 0.2 * z,
        }
    }

    fn ambient_gradient(&self, p: &[f64; 3]) -> [f64; 3] {
        let [x, y, _] = *p;
        match self.0 {
            1 => [0.0, 0.0, 0.5],
            2 => [0.3 * y, 0.3 * x, 0.0],
            _ => [0.5 * x, -0.5 * y, 0.2],
        }
    }

    /// Tangential gradient ∇_S φ = ∇φ − (θ·∇φ)θ.
    pub fn surface_gradient(&self, p: &[f64; 3]) -> [f64; 3] {
        let g = self.ambient_gradient(p);
        let radial = dot(&g, p);
        [g[0] - radial * p[0], g[1] - radial * p[1], g[2] - radial * p[2]]
    }

    pub fn is_known(id: u32) -> bool {
        (1..=3).contains(&id)
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl AngularPotential {
    pub fn zero(dim: usize) -> Self {
        AngularPotential {
            dim,
            magnetic: Arc::new(|_| [0.0; 3]),
            electric: Arc::new(|_| 0.0),
            smoothness_tag: "analytic".into(),
            label: "zero".into(),
        }
    }

    pub fn constant_a(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.electric = Arc::new(move |_| c);
        p.label = format!("constant_a({c})");
        p
    }

    /// A(θ) = α(−θ₂, θ₁, 0): a rigid rotation field, tangent to S².
    pub fn rotation(dim: usize, alpha: f64) -> Self {
        let mut p = Self::zero(dim);
        p.magnetic = Arc::new(move |t| [-alpha * t[1], alpha * t[0], 0.0]);
        p.label = format!("rotation_A({alpha})");
        p
    }

    /// A = ∇_S φ, a pure gauge field.
    pub fn gradient_gauge(dim: usize, phi: GaugeFunction) -> Self {
        Self::zero(dim).with_gauge(phi)
    }

    pub fn custom(dim: usize, magnetic: VectorSampler, electric: ScalarSampler, label: &str) -> Self {
        AngularPotential {
            dim,
            magnetic,
            electric,
            smoothness_tag: "user".into(),
            label: label.into(),
        }
    }

    /// Adds ∇_S φ to the magnetic part.
    pub fn with_gauge(mut self, phi: GaugeFunction) -> Self {
        let base = self.magnetic.clone();
        self.magnetic = Arc::new(move |t| {
            let a = base(t);
            let g = phi.surface_gradient(t);
            [a[0] + g[0], a[1] + g[1], a[2] + g[2]]
        });
        self.label = format!("{}+gradient_gauge({})", self.label, phi.0);
        self
    }

    /// Adds a constant to a.
    pub fn plus_constant_a(mut self, c: f64) -> Self {
        if c != 0.0 {
            let base = self.electric.clone();
            self.electric = Arc::new(move |t| base(t) + c);
            self.label = format!("{}+constant_a({c})", self.label);
        }
        self
    }

    pub fn from_table(dim: usize, table: PotentialTable) -> Self {
        let table = Arc::new(table);
        let t1 = table.clone();
        let t2 = table;
        AngularPotential {
            dim,
            magnetic: Arc::new(move |p| t1.magnetic(p)),
            electric: Arc::new(move |p| t2.electric(p)),
            smoothness_tag: "bilinear".into(),
            label: "table".into(),
        }
    }

    /// Checks transversality A(θ)·θ = 0 and boundedness of a on the nodes.
    pub fn validate(&self, quad: &SphereQuadrature) -> Result<()> {
        for node in &quad.nodes {
            let a = (self.magnetic)(&node.point);
            let norm = dot(&a, &a).sqrt();
            let normal = dot(&a, &node.point).abs();
            if normal > 1e-12 * (1.0 + norm) {
                return Err(Error::InvalidPotential(format!(
                    "transversality fails at {:?}: |A·θ| = {normal:.3e}",
                    node.point
                )));
            }
            if !a.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidPotential("A is not finite".into()));
            }
            let e = (self.electric)(&node.point);
            if !e.is_finite() {
                return Err(Error::InvalidPotential(format!("a is unbounded at {:?}", node.point)));
            }
        }
        Ok(())
    }
}

/// Tabulated coefficients on a colatitude × longitude grid. Rows are
/// `colatitude longitude a A_theta A_phi` (radians); the magnetic part is
/// stored in the local frame so that it is tangent by construction.
#[derive(Debug, Clone)]
pub struct PotentialTable {
    colat: Vec<f64>,
    lon: Vec<f64>,
    // [i_colat][i_lon] -> (a, A_theta, A_phi)
    values: Vec<Vec<[f64; 3]>>,
}

impl PotentialTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<[f64; 5]> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<f64> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("potential table line {}: {e}", lineno + 1)))?;
            let row = match fields.len() {
                3 => [fields[0], fields[1], fields[2], 0.0, 0.0],
                5 => [fields[0], fields[1], fields[2], fields[3], fields[4]],
                n => {
                    return Err(Error::Config(format!(
                        "potential table line {}: expected 3 or 5 columns, found {n}",
                        lineno + 1
                    )))
                }
            };
            rows.push(row);
        }
        let mut colat: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let mut lon: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        for v in [&mut colat, &mut lon] {
            v.sort_by(|a, b| a.total_cmp(b));
            v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        }
        if colat.len() < 2 || lon.len() < 2 || colat.len() * lon.len() != rows.len() {
            return Err(Error::Config(format!(
                "potential table must be a full grid: {} colatitudes × {} longitudes vs {} rows",
                colat.len(),
                lon.len(),
                rows.len()
            )));
        }
        let mut values = vec![vec![[f64::NAN; 3]; lon.len()]; colat.len()];
        for r in &rows {
            let i = colat.iter().position(|c| (c - r[0]).abs() < 1e-12).unwrap();
            let j = lon.iter().position(|c| (c - r[1]).abs() < 1e-12).unwrap();
            values[i][j] = [r[2], r[3], r[4]];
        }
        if values.iter().flatten().any(|v| v[0].is_nan()) {
            return Err(Error::Config("potential table has duplicate rows".into()));
        }
        Ok(PotentialTable { colat, lon, values })
    }

    fn interpolate(&self, p: &[f64; 3]) -> [f64; 3] {
        let theta = p[2].clamp(-1.0, 1.0).acos();
        let phi = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
        let (i0, i1, s) = bracket(&self.colat, theta, false);
        let (j0, j1, t) = bracket(&self.lon, phi, true);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let v00 = self.values[i0][j0][c];
            let v01 = self.values[i0][j1][c];
            let v10 = self.values[i1][j0][c];
            let v11 = self.values[i1][j1][c];
            out[c] = (1.0 - s) * ((1.0 - t) * v00 + t * v01) + s * ((1.0 - t) * v10 + t * v11);
        }
        out
    }

    pub fn electric(&self, p: &[f64; 3]) -> f64 {
        self.interpolate(p)[0]
    }

    pub fn magnetic(&self, p: &[f64; 3]) -> [f64; 3] {
        let v = self.interpolate(p);
        let node = crate::quadrature::SphereNode::from_point(*p);
        let (et, ep) = node.frame();
        let mut a = [0.0; 3];
        for c in 0..3 {
            a[c] = v[1] * et[c] + v[2] * ep[c];
        }
        // Remove the O(1e-9) normal leak introduced by the pole nudge.
        let n = dot(&a, p);
        [a[0] - n * p[0], a[1] - n * p[1], a[2] - n * p[2]]
    }
}

fn bracket(grid: &[f64], x: f64, periodic: bool) -> (usize, usize, f64) {
    let n = grid.len();
    if periodic {
        let period = 2.0 * PI;
        for j in 0..n {
            let a = grid[j];
            let b = if j + 1 < n { grid[j + 1] } else { grid[0] + period };
            let xx = if x < a { x + period } else { x };
            if xx >= a && xx <= b {
                return (j, (j + 1) % n, (xx - a) / (b - a));
            }
        }
        // x lies before grid[0]: wrap from the last node.
        let a = grid[n - 1] - period;
        let b = grid[0];
        return (n - 1, 0, (x - a) / (b - a));
    }
    if x <= grid[0] {
        return (0, 0, 0.0);
    }
    if x >= grid[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    let j = grid.partition_point(|&g| g <= x) - 1;
    (j, j + 1, (x - grid[j]) / (grid[j + 1] - grid[j]))
}
