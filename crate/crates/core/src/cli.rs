//! Subcommand bodies of the `freqlab` binary. Each writes its artifacts into
//! the output directory, always including the materialised `config.toml`,
//! and returns a one-line summary. Outputs carry no timestamps or timings.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::extraction::{blowup_trace, halving_sequence, r_independence, BlowupReport};
use crate::field::{solve_perturbed, solve_picard, FourierRadialField};
use crate::frequency::{estimate_gamma, height_scaling, FrequencyContext, FrequencyProfile};
use crate::io::{basis_fingerprint, csv_table, leading_term_json, spectrum_csv, to_json, write_file};
use crate::perturbation::{Nonlinearity, PerturbationSpec};
use crate::quotients::{check_eta_hypotheses, envelope, pohozaev_with, BallBasis, EtaReport, QuotientEnvelope};
use crate::spectrum::{check_positive_definiteness, AngularModel};
use crate::verify::{run_suite, SuiteReport};

/// Longest λ-halving sequence used for blow-up traces.
const MAX_HALVINGS: usize = 13;

pub struct Run {
    pub config: ExperimentConfig,
    /// Directory relative table paths resolve against.
    pub base: PathBuf,
    pub out: PathBuf,
}

impl Run {
    pub fn new(config: ExperimentConfig, base: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let out = PathBuf::from(&config.output);
        Ok(Run {
            config,
            base: base.into(),
            out,
        })
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        write_file(&self.out, name, contents)
    }

    fn echo_config(&self) -> Result<()> {
        self.write("config.toml", &self.config.to_toml()).map(|_| ())
    }
}

/// Comma-separated positive radii.
pub fn parse_radii(text: &str) -> Result<Vec<f64>> {
    let radii = text
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|r| *r > 0.0 && r.is_finite())
                .ok_or_else(|| Error::Config(format!("invalid radius '{s}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if radii.is_empty() {
        return Err(Error::Config("empty radius list".into()));
    }
    Ok(radii)
}

fn spectrum_json(model: &AngularModel, cfg: &ExperimentConfig) -> Value {
    let s = &model.spectrum;
    let (pd, margin) = check_positive_definiteness(s, model.dim());
    let clusters: Vec<[usize; 2]> = s.clusters().iter().map(|c| [c.start, c.end]).collect();
    json!({
        "potential": model.potential.label,
        "dimension": model.dim(),
        "degree": cfg.basis.degree,
        "modes": s.len(),
        "eigenvalues": s.eigenvalues,
        "clusters": clusters,
        "indicial_roots": s.indicial_roots,
        "positive_definite": pd,
        "pd_margin": margin,
        "q_norm": s.q_norm,
        "basis_fingerprint": basis_fingerprint(model),
    })
}

/// Spectrum CSV and JSON. Positivity failure is reported after the files
/// are written.
pub fn run_spectrum(run: &Run) -> Result<String> {
    run.echo_config()?;
    let cfg = &run.config;
    let model = cfg.build_model(&run.base)?;
    run.write("spectrum.csv", &spectrum_csv(&model))?;
    run.write("spectrum.json", &to_json(&spectrum_json(&model, cfg)))?;
    let (pd, margin) = check_positive_definiteness(&model.spectrum, model.dim());
    let mu1 = model.spectrum.eigenvalues[0];
    if !pd {
        return Err(Error::PositivityViolation {
            mu1,
            bound: mu1 - margin,
        });
    }
    let sigma = model.spectrum.sigma_plus(0)?;
    Ok(format!("mu_1 = {mu1:.12e}, sigma+_1 = {sigma:.12e}, pd margin = {margin:.6e}"))
}

fn positive_model(run: &Run) -> Result<Arc<AngularModel>> {
    let model = run.config.build_model(&run.base)?;
    let (pd, margin) = check_positive_definiteness(&model.spectrum, model.dim());
    if !pd {
        let mu1 = model.spectrum.eigenvalues[0];
        return Err(Error::PositivityViolation {
            mu1,
            bound: mu1 - margin,
        });
    }
    Ok(Arc::new(model))
}

/// Linear solve for radial h without g, Picard otherwise.
pub fn solve_configured(
    cfg: &ExperimentConfig,
    model: Arc<AngularModel>,
    h: &PerturbationSpec,
    g: &dyn Nonlinearity,
) -> Result<FourierRadialField> {
    let grid = cfg.build_grid()?;
    let boundary = cfg.boundary_vector(model.modes());
    if g.is_zero() && h.is_radial() {
        solve_perturbed(model, h, &boundary, grid)
    } else {
        let s = &cfg.solver;
        solve_picard(model, h, g, &boundary, grid, s.damping, s.max_iter, s.tol)
    }
}

fn profile_csv(p: &FrequencyProfile) -> String {
    let rows: Vec<Vec<f64>> = (0..p.radii.len())
        .map(|i| {
            vec![
                p.radii[i],
                p.h[i],
                p.d[i],
                p.n[i],
                p.nu1[i],
                p.nu2_direct[i],
                p.nu2_residual[i],
                p.d_identity_residual[i],
            ]
        })
        .collect();
    csv_table(
        &["r", "H", "D", "N", "nu1", "nu2_direct", "nu2_residual", "d_identity_residual"],
        &rows,
    )
}

fn blowup_csv(b: &BlowupReport) -> String {
    let rows: Vec<Vec<f64>> = (0..b.lambdas.len()).map(|i| vec![b.lambdas[i], b.e0[i], b.e1[i]]).collect();
    csv_table(&["lambda", "e0", "e1"], &rows)
}

fn eta_csv(env: &QuotientEnvelope, report: Option<&EtaReport>) -> String {
    let p = |v: Option<&crate::quotients::HypothesisVerdict>| {
        v.and_then(|v| v.fit.as_ref()).map(|f| f.p).unwrap_or(f64::NAN)
    };
    let p0 = p(report.map(|r| &r.eta0));
    let p1 = p(report.map(|r| &r.eta1));
    let rows: Vec<Vec<f64>> = (0..env.radii.len())
        .map(|i| vec![env.radii[i], env.eta0[i], env.eta1[i], p0, p1, env.gap0[i], env.gap1[i]])
        .collect();
    csv_table(&["r", "eta0", "eta1", "p0", "p1", "gap0", "gap1"], &rows)
}

fn eta_stage(run: &Run, h: &PerturbationSpec) -> Result<(QuotientEnvelope, Result<EtaReport>)> {
    let cfg = &run.config;
    let q = &cfg.quotients;
    let basis = BallBasis::new(&cfg.build_potential(&run.base)?, q.degree, q.radial, q.ratio)?;
    let env = envelope(h, &basis, &cfg.quotient_radii())?;
    let report = check_eta_hypotheses(&env);
    run.write("eta.csv", &eta_csv(&env, report.as_ref().ok()))?;
    let verdict = match &report {
        Ok(r) => serde_json::to_value(r).expect("report serialises"),
        Err(e) => json!({ "error": e.to_string() }),
    };
    run.write("eta.json", &to_json(&verdict))?;
    Ok((env, report))
}

/// η envelopes and hypothesis verdicts.
pub fn run_quotients(run: &Run) -> Result<String> {
    run.echo_config()?;
    let h = run.config.build_perturbation(&run.base)?;
    let (_, report) = eta_stage(run, &h)?;
    let r = report?;
    let p = |v: &crate::quotients::HypothesisVerdict| v.fit.as_ref().map(|f| f.p).unwrap_or(f64::INFINITY);
    Ok(format!(
        "eta0 exponent = {:.6}, eta1 exponent = {:.6}, hypotheses hold = {}",
        p(&r.eta0),
        p(&r.eta1),
        r.holds
    ))
}

/// Pohozaev residual and term breakdown at every configured radius.
pub fn run_pohozaev(run: &Run) -> Result<String> {
    run.echo_config()?;
    let cfg = &run.config;
    let model = positive_model(run)?;
    let h = cfg.build_perturbation(&run.base)?;
    let g = cfg.build_nonlinearity()?;
    let field = solve_configured(cfg, model, &h, g.as_ref())?;
    let ctx = FrequencyContext::new(&field, &h, g.as_ref())?;
    let reports = cfg
        .radii_list()
        .iter()
        .map(|&r| pohozaev_with(&ctx, r))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = reports.iter().map(|p| vec![p.r, p.residual]).collect();
    run.write("pohozaev.csv", &csv_table(&["r", "residual"], &rows))?;
    run.write("pohozaev.json", &to_json(&reports))?;
    let worst = reports.iter().map(|p| p.residual.abs()).fold(0.0, f64::max);
    Ok(format!("max Pohozaev residual over {} radii = {worst:.3e}", reports.len()))
}

/// Full pipeline: solve, frequency profile, γ, leading term, blow-up
/// traces, Pohozaev residual and η verdicts.
pub fn run_asymptotics(run: &Run) -> Result<String> {
    run.echo_config()?;
    let cfg = &run.config;
    let model = positive_model(run)?;
    let h = cfg.build_perturbation(&run.base)?;
    let g = cfg.build_nonlinearity()?;
    let field = solve_configured(cfg, model.clone(), &h, g.as_ref())?;
    let ctx = FrequencyContext::new(&field, &h, g.as_ref())?;
    let profile = ctx.profile(&cfg.radii_list())?;
    run.write("frequency.csv", &profile_csv(&profile))?;
    run.write("frequency.json", &to_json(&profile))?;
    let (gamma, _) = estimate_gamma(&profile)?;

    let r_max = cfg.grid.radius;
    let r_values = [r_max, 0.7 * r_max, 0.5 * r_max];
    let (terms, deviation) = r_independence(&field, &h, g.as_ref(), gamma, &r_values)?;
    let leading = &terms[0];
    let sigma = leading.gamma;
    let scaling = height_scaling(&profile, sigma);
    run.write(
        "leading_term.json",
        &to_json(&json!({
            "gamma_estimate": gamma,
            "leading": leading_term_json(leading),
            "r_values": r_values,
            "betas_by_r": terms.iter().map(leading_term_json).collect::<Vec<_>>(),
            "max_beta_deviation": deviation,
            "height_scaling": scaling,
        })),
    )?;

    let halvings = ((0.5 / cfg.grid.r_min_factor).log2().floor() as usize + 1).min(MAX_HALVINGS);
    let blowup = blowup_trace(&field, &halving_sequence(0.5 * r_max, halvings), leading)?;
    run.write("blowup.csv", &blowup_csv(&blowup))?;
    run.write("blowup.json", &to_json(&blowup))?;

    let pohozaev = pohozaev_with(&ctx, 0.5 * r_max)?;
    run.write("pohozaev.json", &to_json(&pohozaev))?;

    let (_, eta) = eta_stage(run, &h)?;
    let eta_verdict = match &eta {
        Ok(r) => json!(r.holds),
        Err(e) => json!(e.to_string()),
    };

    let summary = json!({
        "gamma": gamma,
        "gamma_fit_error": profile.gamma_fit_error,
        "sigma_plus": sigma,
        "k0": leading.k0,
        "eigenspace": [leading.eigenspace.start, leading.eigenspace.end],
        "max_beta_deviation": deviation,
        "picard_iterations": field.log.iterations,
        "equation_residual": field.log.residual,
        "tail_warning": profile.tail_warning,
        "positive_limit": scaling.positive_limit,
        "log_amplitude": scaling.log_amplitude,
        "blowup_monotone": blowup.e0_monotone && blowup.e1_monotone,
        "pohozaev_residual": pohozaev.residual,
        "eta_hypotheses": eta_verdict,
    });
    run.write("summary.json", &to_json(&summary))?;
    Ok(format!(
        "gamma = {gamma:.9} (sigma+ = {sigma:.9}, k0 = {}), max beta deviation over R, 0.7R, 0.5R = {deviation:.3e}, Picard iterations = {}",
        leading.k0, field.log.iterations
    ))
}

/// Runs the acceptance suite with the configured tolerances and seed.
pub fn run_verify(run: &Run) -> Result<SuiteReport> {
    run.echo_config()?;
    let report = run_suite(&run.config.tolerances, run.config.seed);
    run.write("verify.txt", &report.summary())?;
    run.write("verify.json", &to_json(&report))?;
    Ok(report)
}

/// Base directory for a config path: its parent, or the current directory.
pub fn config_base(path: Option<&Path>) -> PathBuf {
    path.and_then(|p| p.parent())
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}
