//! Browser bindings. Each export takes plain numbers and returns a JSON
//! string; errors come back as `{"error": "..."}` so the page never throws.

use std::sync::Arc;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use freqlab::field::solve_perturbed;
use freqlab::frequency::{estimate_gamma, log_radii, FrequencyContext};
use freqlab::perturbation::{NoNonlinearity, PerturbationSpec};
use freqlab::potential::AngularPotential;
use freqlab::quotients::{check_eta_hypotheses, envelope, BallBasis};
use freqlab::radial::RadialGrid;
use freqlab::spectrum::AngularModel;
use freqlab::{Complex64, Error};

const DEGREE: usize = 6;

fn respond<T: Serialize>(result: Result<T, Error>) -> String {
    match result {
        Ok(v) => serde_json::to_string(&v).expect("serialisable"),
        Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
    }
}

fn potential(family: &str, strength: f64) -> Result<AngularPotential, Error> {
    match family {
        "rotation" => Ok(AngularPotential::rotation(3, strength)),
        "constant_a" => Ok(AngularPotential::constant_a(3, strength)),
        "zero" => Ok(AngularPotential::zero(3)),
        other => Err(Error::InvalidArgument(format!("unknown potential family {other}"))),
    }
}

#[derive(Serialize)]
pub struct SpectrumRow {
    pub strength: f64,
    pub mu: Vec<f64>,
    /// Empty when positivity fails.
    pub sigma_plus: Vec<f64>,
    pub positive: bool,
}

/// First `modes` eigenvalues and σ⁺ at `steps` strengths in [0, max].
pub fn spectrum_sweep_rows(family: &str, max: f64, steps: usize, modes: usize) -> Result<Vec<SpectrumRow>, Error> {
    if steps < 2 || modes == 0 || modes > (DEGREE + 1) * (DEGREE + 1) {
        return Err(Error::InvalidArgument(format!("bad sweep: steps {steps}, modes {modes}")));
    }
    (0..steps)
        .map(|i| {
            let strength = max * i as f64 / (steps - 1) as f64;
            let model = AngularModel::build(potential(family, strength)?, DEGREE, 0, modes)?;
            let roots = model.roots().ok();
            Ok(SpectrumRow {
                strength,
                mu: model.spectrum.eigenvalues.clone(),
                positive: roots.is_some(),
                sigma_plus: roots.map(|r| r.iter().map(|p| p.0).collect()).unwrap_or_default(),
            })
        })
        .collect()
}

#[wasm_bindgen]
pub fn spectrum_sweep(family: &str, max: f64, steps: usize, modes: usize) -> String {
    respond(spectrum_sweep_rows(family, max, steps, modes))
}

#[derive(Serialize)]
pub struct Profile {
    pub radii: Vec<f64>,
    pub n: Vec<f64>,
    pub h: Vec<f64>,
    pub gamma: Option<f64>,
    pub sigma_plus: Vec<f64>,
    pub note: Option<String>,
}

/// N(r) and H(r) for h = c·r^{−2+ε} with unit data on eigenmode `mode`
/// of the rotation model of strength `alpha`.
pub fn profile_data(alpha: f64, c: f64, eps: f64, mode: usize) -> Result<Profile, Error> {
    let model = Arc::new(AngularModel::build(AngularPotential::rotation(3, alpha), DEGREE, 0, 16)?);
    if mode >= model.modes() {
        return Err(Error::InvalidArgument(format!("mode {mode} >= {}", model.modes())));
    }
    let grid = Arc::new(RadialGrid::new(1.0, 1e-4, 48)?);
    let h = PerturbationSpec::inverse_square_eps(c, eps);
    let mut data = vec![Complex64::new(0.0, 0.0); mode + 1];
    data[mode] = Complex64::new(1.0, 0.0);
    let field = solve_perturbed(model.clone(), &h, &data, grid)?;
    let ctx = FrequencyContext::new(&field, &h, &NoNonlinearity)?;
    let profile = ctx.profile(&log_radii(1.0, 2e-3, 0.9, 30))?;
    let (gamma, note) = match estimate_gamma(&profile) {
        Ok((g, _)) => (Some(g), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(Profile {
        sigma_plus: model.roots()?.iter().map(|p| p.0).collect(),
        radii: profile.radii,
        n: profile.n,
        h: profile.h,
        gamma,
        note,
    })
}

#[wasm_bindgen]
pub fn frequency_profile(alpha: f64, c: f64, eps: f64, mode: usize) -> String {
    respond(profile_data(alpha, c, eps, mode))
}

#[derive(Serialize)]
pub struct Envelope {
    pub radii: Vec<f64>,
    pub eta0: Vec<f64>,
    pub eta1: Vec<f64>,
    pub exponent: Option<f64>,
    pub holds: Option<bool>,
    pub note: Option<String>,
}

/// η₀, η₁ for h = c·r^{−2+ε}(1 + b θ₃) over two decades.
pub fn envelope_data(c: f64, eps: f64, zonal: f64) -> Result<Envelope, Error> {
    let basis = BallBasis::new(&AngularPotential::zero(3), 2, 10, 0.6)?;
    let h = PerturbationSpec::inverse_square_eps(c, eps).with_zonal(zonal);
    let env = envelope(&h, &basis, &log_radii(1.0, 1e-2, 1.0, 9))?;
    let (exponent, holds, note) = match check_eta_hypotheses(&env) {
        Ok(r) => (r.eta0.fit.as_ref().map(|f| f.p), Some(r.holds), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    Ok(Envelope {
        radii: env.radii,
        eta0: env.eta0,
        eta1: env.eta1,
        exponent,
        holds,
        note,
    })
}

#[wasm_bindgen]
pub fn eta_envelope(c: f64, eps: f64, zonal: f64) -> String {
    respond(envelope_data(c, eps, zonal))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_sweep_starts_at_sphere_eigenvalues() {
        let rows = spectrum_sweep_rows("rotation", 0.5, 3, 4).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].mu.iter().zip([0.0, 2.0, 2.0, 2.0]).all(|(a, b)| (a - b).abs() < 1e-10));
        assert!(rows.iter().all(|r| r.positive));
    }

    #[test]
    fn negative_electric_potential_loses_positivity() {
        let rows = spectrum_sweep_rows("constant_a", 0.4, 2, 1).unwrap();
        assert!(rows[0].positive && !rows[1].positive && rows[1].sigma_plus.is_empty());
    }

    #[test]
    fn profile_limit_is_an_indicial_root() {
        let p = profile_data(0.0, 0.1, 0.5, 1).unwrap();
        assert!((p.gamma.unwrap() - 1.0).abs() < 1e-3);
        assert_eq!(p.radii.len(), p.n.len());
    }

    #[test]
    fn envelope_verdicts() {
        let e = envelope_data(0.1, 0.5, 0.3).unwrap();
        assert!((e.exponent.unwrap() - 0.5).abs() < 0.05);
        assert_eq!(e.holds, Some(true));
        assert_eq!(envelope_data(0.1, 0.0, 0.0).unwrap().holds, Some(false));
    }

    #[test]
    fn errors_are_reported_as_json() {
        let out = spectrum_sweep("nonsense", 1.0, 3, 4);
        assert!(out.starts_with("{\"error\""));
    }
}
