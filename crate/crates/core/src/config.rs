//! Experiment configuration: TOML, unknown keys rejected, every default
//! materialised so the echoed file reproduces the run on its own.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturbation::{NoNonlinearity, Nonlinearity, PerturbationSpec, PowerNonlinearity, RadialTable};
use crate::potential::{AngularPotential, GaugeFunction, PotentialTable};
use crate::radial::RadialGrid;
use crate::spectrum::AngularModel;
use crate::Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub output: String,
    pub potential: PotentialConfig,
    pub basis: BasisConfig,
    pub grid: GridConfig,
    pub perturbation: PerturbationConfig,
    pub nonlinearity: NonlinearityConfig,
    pub boundary: BoundaryConfig,
    pub solver: SolverConfig,
    pub radii: RadiiConfig,
    pub quotients: QuotientConfig,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dimension: 3,
            seed: 42,
            threads: 0,
            output: "out".into(),
            potential: PotentialConfig::default(),
            basis: BasisConfig::default(),
            grid: GridConfig::default(),
            perturbation: PerturbationConfig::default(),
            nonlinearity: NonlinearityConfig::default(),
            boundary: BoundaryConfig::default(),
            solver: SolverConfig::default(),
            radii: RadiiConfig::default(),
            quotients: QuotientConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

/// family: zero | constant_a | rotation | gradient_gauge | table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    pub family: String,
    /// a for constant_a, α for rotation.
    pub strength: f64,
    /// Gauge function added to A (0 = none).
    pub gauge: u32,
    /// Constant added to a.
    pub shift: f64,
    /// Path of a colatitude/longitude table, relative to the config file.
    pub table: String,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            family: "zero".into(),
            strength: 0.0,
            gauge: 0,
            shift: 0.0,
            table: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    /// Spherical-harmonic degree cap L.
    pub degree: usize,
    /// Quadrature resolution; 0 selects 2L + 8.
    pub resolution: usize,
    /// Retained eigenpairs K.
    pub modes: usize,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            degree: 8,
            resolution: 0,
            modes: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub radius: f64,
    pub r_min_factor: f64,
    pub nodes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            radius: 1.0,
            r_min_factor: 1e-4,
            nodes: 64,
        }
    }
}

/// family: zero | inverse_square_eps | radial_table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    pub family: String,
    pub c: f64,
    pub eps: f64,
    /// b in the angular factor 1 + b·θ₃.
    pub zonal: f64,
    pub table: String,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            family: "zero".into(),
            c: 0.1,
            eps: 0.5,
            zonal: 0.0,
            table: String::new(),
        }
    }
}

/// family: zero | power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearityConfig {
    pub family: String,
    pub p: f64,
    pub coupling: f64,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        NonlinearityConfig {
            family: "zero".into(),
            p: 1.0,
            coupling: 1.0,
        }
    }
}

/// φ_k(R) = re[i] + i·im[i] for k = modes[i]; other modes vanish at R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    pub modes: Vec<usize>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig {
            modes: vec![1],
            re: vec![1.0],
            im: vec![0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            damping: 1.0,
            max_iter: 30,
            tol: 1e-8,
        }
    }
}

/// Log-spaced radii between lo·R and hi·R, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadiiConfig {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub explicit: Vec<f64>,
}

impl Default for RadiiConfig {
    fn default() -> Self {
        RadiiConfig {
            lo: 2e-3,
            hi: 0.5,
            count: 25,
            explicit: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuotientConfig {
    pub degree: usize,
    pub radial: usize,
    pub ratio: f64,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Default for QuotientConfig {
    fn default() -> Self {
        QuotientConfig {
            degree: 4,
            radial: 12,
            ratio: 0.6,
            lo: 1e-2,
            hi: 1.0,
            count: 9,
        }
    }
}

/// Thresholds of the acceptance suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub spectrum: f64,
    pub indicial: f64,
    pub frequency_constancy: f64,
    pub d_identity: f64,
    pub decomposition: f64,
    pub nu1_floor: f64,
    pub gamma_match: f64,
    pub log_amplitude: f64,
    pub beta_planted: f64,
    pub r_independence: f64,
    pub blowup_final: f64,
    pub pohozaev_exact: f64,
    pub pohozaev_solved: f64,
    pub pohozaev_order: f64,
    pub pohozaev_corrupted: f64,
    pub eta_linearity: f64,
    pub eta_exponent: f64,
    pub picard_iterations: usize,
    pub picard_residual: f64,
    pub runtime_spectrum: f64,
    pub runtime_frequency: f64,
    pub runtime_perturbed: f64,
    pub runtime_verify: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            spectrum: 1e-10,
            indicial: 1e-12,
            frequency_constancy: 1e-8,
            d_identity: 2e-6,
            decomposition: 5e-5,
            nu1_floor: 1e-10,
            gamma_match: 1e-3,
            log_amplitude: 1e-3,
            beta_planted: 1e-9,
            r_independence: 1e-4,
            blowup_final: 1e-3,
            pohozaev_exact: 1e-7,
            pohozaev_solved: 1e-5,
            pohozaev_order: 2.0,
            pohozaev_corrupted: 1e-2,
            eta_linearity: 1e-12,
            eta_exponent: 0.05,
            picard_iterations: 30,
            picard_residual: 1e-6,
            runtime_spectrum: 5.0,
            runtime_frequency: 30.0,
            runtime_perturbed: 120.0,
            runtime_verify: 600.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The fully materialised configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension != 3 {
            return Err(Error::UnsupportedDimension(self.dimension));
        }
        let known = |v: &str, options: &[&str], what: &str| {
            if options.contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("unknown {what} family '{v}', expected one of {options:?}")))
            }
        };
        known(
            &self.potential.family,
            &["zero", "constant_a", "rotation", "gradient_gauge", "table"],
            "potential",
        )?;
        known(
            &self.perturbation.family,
            &["zero", "inverse_square_eps", "radial_table"],
            "perturbation",
        )?;
        known(&self.nonlinearity.family, &["zero", "power"], "nonlinearity")?;
        let b = &self.boundary;
        if b.modes.len() != b.re.len() || b.modes.len() != b.im.len() {
            return Err(Error::Config("boundary.modes, boundary.re and boundary.im differ in length".into()));
        }
        if let Some(k) = b.modes.iter().find(|&&k| k >= self.basis.modes) {
            return Err(Error::Config(format!("boundary mode {k} exceeds basis.modes = {}", self.basis.modes)));
        }
        if self.basis.modes == 0 || self.basis.modes > (self.basis.degree + 1).pow(2) {
            return Err(Error::Config(format!(
                "basis.modes must lie in 1..={} for degree {}",
                (self.basis.degree + 1).pow(2),
                self.basis.degree
            )));
        }
        if !(self.radii.lo > 0.0 && self.radii.hi > self.radii.lo) || self.radii.count < 2 {
            return Err(Error::Config("radii need 0 < lo < hi and count >= 2".into()));
        }
        if self.perturbation.zonal.abs() >= 1.0 {
            return Err(Error::Config("perturbation.zonal must satisfy |b| < 1".into()));
        }
        Ok(())
    }

    fn resolve(base: &Path, file: &str) -> PathBuf {
        let p = Path::new(file);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    /// `base` is the directory table paths are relative to.
    pub fn build_potential(&self, base: &Path) -> Result<AngularPotential> {
        let p = &self.potential;
        let dim = self.dimension;
        let pot = match p.family.as_str() {
            "zero" => AngularPotential::zero(dim),
            "constant_a" => AngularPotential::constant_a(dim, p.strength),
            "rotation" => AngularPotential::rotation(dim, p.strength),
            "gradient_gauge" => {
                if !GaugeFunction::is_known(p.gauge) {
                    return Err(Error::Config(format!("unknown gauge function {}", p.gauge)));
                }
                AngularPotential::gradient_gauge(dim, GaugeFunction(p.gauge))
            }
            "table" => {
                let path = Self::resolve(base, &p.table);
                let text =
                    std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                AngularPotential::from_table(dim, PotentialTable::parse(&text)?)
            }
            other => return Err(Error::Config(format!("unknown potential family '{other}'"))),
        };
        let pot = if p.gauge != 0 && p.family != "gradient_gauge" {
            if !GaugeFunction::is_known(p.gauge) {
                return Err(Error::Config(format!("unknown gauge function {}", p.gauge)));
            }
            pot.with_gauge(GaugeFunction(p.gauge))
        } else {
            pot
        };
        Ok(pot.plus_constant_a(p.shift))
    }

    pub fn build_model(&self, base: &Path) -> Result<AngularModel> {
        AngularModel::build(
            self.build_potential(base)?,
            self.basis.degree,
            self.basis.resolution,
            self.basis.modes,
        )
    }

    pub fn build_grid(&self) -> Result<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::new(
            self.grid.radius,
            self.grid.r_min_factor,
            self.grid.nodes,
        )?))
    }

    pub fn build_perturbation(&self, base: &Path) -> Result<PerturbationSpec> {
        let p = &self.perturbation;
        let spec = match p.family.as_str() {
            "zero" => PerturbationSpec::zero(),
            "inverse_square_eps" => PerturbationSpec::inverse_square_eps(p.c, p.eps),
            "radial_table" => {
                let path = Self::resolve(base, &p.table);
                let text =
                    std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                PerturbationSpec::table(RadialTable::parse(&text)?)
            }
            other => return Err(Error::Config(format!("unknown perturbation family '{other}'"))),
        };
        Ok(spec.with_zonal(p.zonal))
    }

    pub fn build_nonlinearity(&self) -> Result<Box<dyn Nonlinearity>> {
        let n = &self.nonlinearity;
        match n.family.as_str() {
            "zero" => Ok(Box::new(NoNonlinearity)),
            "power" => Ok(Box::new(PowerNonlinearity {
                p: n.p,
                coupling: n.coupling,
            })),
            other => Err(Error::Config(format!("unknown nonlinearity family '{other}'"))),
        }
    }

    /// φ_k(R) for k < K.
    pub fn boundary_vector(&self, count: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); count];
        for ((k, re), im) in self.boundary.modes.iter().zip(&self.boundary.re).zip(&self.boundary.im) {
            if *k < count {
                out[*k] += Complex64::new(*re, *im);
            }
        }
        out
    }

    pub fn radii_list(&self) -> Vec<f64> {
        if !self.radii.explicit.is_empty() {
            return self.radii.explicit.clone();
        }
        crate::frequency::log_radii(self.grid.radius, self.radii.lo, self.radii.hi, self.radii.count)
    }

    pub fn quotient_radii(&self) -> Vec<f64> {
        let q = &self.quotients;
        crate::frequency::log_radii(self.grid.radius, q.lo, q.hi, q.count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_materialises_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let echoed = cfg.to_toml();
        assert!(echoed.contains("seed = 42"));
        assert!(echoed.contains("[tolerances]"));
        assert_eq!(ExperimentConfig::from_toml(&echoed).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ExperimentConfig::from_toml("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(
            ExperimentConfig::from_toml("[grid]\nnodez = 3"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("[potential]\nfamily = \"dipole\""),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("dimension = 4"),
            Err(Error::UnsupportedDimension(4))
        ));
    }

    #[test]
    fn boundary_vector_places_coefficients() {
        let cfg = ExperimentConfig::from_toml("[boundary]\nmodes = [0, 2]\nre = [1.0, 0.5]\nim = [0.0, -1.0]").unwrap();
        let b = cfg.boundary_vector(4);
        assert_eq!(b[2], Complex64::new(0.5, -1.0));
        assert_eq!(b[1], Complex64::new(0.0, 0.0));
    }
}
