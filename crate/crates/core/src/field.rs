//! Fourier-radial fields u(rθ) = Σ φ_k(r) ψ_k(θ) on a punctured ball, exact
//! model solutions, the closed-form radial solve and the Picard loop.
//!
//! Each mode is stored as φ_k(r) = r^{σ⁺_k} w_k(ln r) with w_k sampled on
//! the Chebyshev grid, so homogeneous solutions are exactly constant in w.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::perturbation::{validate_nonlinearity, Nonlinearity, PerturbationSpec};
use crate::quadrature::SphereNode;
use crate::radial::RadialGrid;
use crate::spectrum::AngularModel;
use crate::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// One radial mode φ(r) = r^exponent · w(ln r).
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMode {
    pub exponent: f64,
    pub w: Vec<Complex64>,
    /// dw/dt at the nodes.
    pub dw: Vec<Complex64>,
}

impl RadialMode {
    pub fn zero(exponent: f64, n: usize) -> Self {
        RadialMode {
            exponent,
            w: vec![ZERO; n],
            dw: vec![ZERO; n],
        }
    }

    pub fn constant(exponent: f64, n: usize, value: Complex64) -> Self {
        RadialMode {
            exponent,
            w: vec![value; n],
            dw: vec![ZERO; n],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.w.iter().all(|v| v.norm() == 0.0)
    }

    /// (φ(r), φ′(r)) using precomputed interpolation weights at ln r.
    fn eval_with(&self, weights: &[f64], r: f64) -> (Complex64, Complex64) {
        let mut w = ZERO;
        let mut dw = ZERO;
        for ((lw, a), b) in weights.iter().zip(&self.w).zip(&self.dw) {
            w += a * *lw;
            dw += b * *lw;
        }
        let rp = r.powf(self.exponent);
        (w * rp, (w * self.exponent + dw) * (rp / r))
    }

    pub fn value(&self, grid: &RadialGrid, r: f64) -> Complex64 {
        self.eval_with(&grid.interp_weights(r.ln()), r).0
    }

    pub fn value_and_derivative(&self, grid: &RadialGrid, r: f64) -> (Complex64, Complex64) {
        self.eval_with(&grid.interp_weights(r.ln()), r)
    }
}

/// Iteration history of a solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveLog {
    pub iterations: usize,
    pub changes: Vec<f64>,
    /// Strong-form equation residual at grid midpoints, relative to the data scale.
    pub residual: f64,
}

/// Values of u and ∂_r u on the sphere quadrature nodes at one radius.
#[derive(Debug, Clone)]
pub struct SurfaceTrace {
    pub r: f64,
    pub u: Vec<Complex64>,
    pub u_r: Vec<Complex64>,
    pub phi: Vec<Complex64>,
    pub dphi: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct FourierRadialField {
    pub model: Arc<AngularModel>,
    pub grid: Arc<RadialGrid>,
    pub modes: Vec<RadialMode>,
    pub log: SolveLog,
}

impl FourierRadialField {
    pub fn zero(model: Arc<AngularModel>, grid: Arc<RadialGrid>) -> Result<Self> {
        let roots = model.roots()?;
        let n = grid.count();
        let modes = roots.iter().map(|r| RadialMode::zero(r.0, n)).collect();
        Ok(FourierRadialField {
            model,
            grid,
            modes,
            log: SolveLog::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// (φ_k(r), φ_k′(r)) for every mode.
    pub fn mode_values(&self, r: f64) -> Vec<(Complex64, Complex64)> {
        let weights = self.grid.interp_weights(r.ln());
        self.modes.iter().map(|m| m.eval_with(&weights, r)).collect()
    }

    /// u and ∂_r u on the quadrature nodes of the angular model.
    pub fn surface(&self, r: f64) -> SurfaceTrace {
        let vals = self.mode_values(r);
        let phi: Vec<Complex64> = vals.iter().map(|v| v.0).collect();
        let dphi: Vec<Complex64> = vals.iter().map(|v| v.1).collect();
        let (u, u_r) = synthesize_on_nodes(&self.model, &phi, &dphi);
        SurfaceTrace { r, u, u_r, phi, dphi }
    }

    pub fn eval(&self, x: &[f64; 3]) -> Result<Complex64> {
        let (r, node) = polar(x)?;
        self.grid.check(r)?;
        let (psi, _) = self.model.eigenfunctions_at(&node);
        Ok(self
            .mode_values(r)
            .iter()
            .zip(&psi)
            .map(|(v, p)| v.0 * p)
            .sum())
    }

    /// ∇u = Σ φ_k′ ψ_k θ + (φ_k / r) ∇_S ψ_k.
    pub fn gradient(&self, x: &[f64; 3]) -> Result<[Complex64; 3]> {
        let (r, node) = polar(x)?;
        self.grid.check(r)?;
        let (psi, gpsi) = self.model.eigenfunctions_at(&node);
        let mut g = [ZERO; 3];
        for (k, v) in self.mode_values(r).iter().enumerate() {
            for c in 0..3 {
                g[c] += v.1 * psi[k] * node.point[c] + v.0 / r * gpsi[k][c];
            }
        }
        Ok(g)
    }

    /// The field multiplied by a constant.
    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for m in &mut out.modes {
            m.w.iter_mut().for_each(|v| *v *= c);
            m.dw.iter_mut().for_each(|v| *v *= c);
        }
        out
    }

    /// |Σ_j w_j|u(rθ_j)|² − Σ_k |φ_k(r)|²| / Σ_k |φ_k(r)|².
    pub fn parseval_defect(&self, r: f64) -> f64 {
        let s = self.surface(r);
        let quad: f64 = s
            .u
            .iter()
            .zip(&self.model.quad.weights)
            .map(|(u, w)| u.norm_sqr() * w)
            .sum();
        let modal: f64 = s.phi.iter().map(|p| p.norm_sqr()).sum();
        if modal == 0.0 {
            return quad.abs();
        }
        (quad - modal).abs() / modal
    }

    /// Boundary coefficients φ_k(R).
    pub fn boundary_values(&self) -> Vec<Complex64> {
        let r = self.grid.r_max;
        self.modes.iter().map(|m| m.value(&self.grid, r)).collect()
    }
}

fn polar(x: &[f64; 3]) -> Result<(f64, SphereNode)> {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if !(r > 0.0) {
        return Err(Error::InvalidArgument("evaluation point must differ from the origin".into()));
    }
    Ok((r, SphereNode::from_point([x[0] / r, x[1] / r, x[2] / r])))
}

fn synthesize_on_nodes(
    model: &AngularModel,
    phi: &[Complex64],
    dphi: &[Complex64],
) -> (Vec<Complex64>, Vec<Complex64>) {
    let p = DVector::from_column_slice(phi);
    let d = DVector::from_column_slice(dphi);
    let u = &model.psi * p;
    let ur = &model.psi * d;
    (u.iter().cloned().collect(), ur.iter().cloned().collect())
}

/// u = amplitude · r^{σ⁺_k} ψ_k.
pub fn synthesize_model_solution(
    model: Arc<AngularModel>,
    k: usize,
    amplitude: Complex64,
    grid: Arc<RadialGrid>,
) -> Result<FourierRadialField> {
    if k >= model.modes() {
        return Err(Error::InvalidArgument(format!(
            "mode index {k} exceeds the {} retained eigenpairs",
            model.modes()
        )));
    }
    let mut field = FourierRadialField::zero(model, grid)?;
    let n = field.grid.count();
    field.modes[k] = RadialMode::constant(field.modes[k].exponent, n, amplitude);
    Ok(field)
}

/// ζ_k = ∫ (h + g(·,|u|²)) u ψ̄_k dS at radius r from the node values of u.
pub fn source_modes(
    model: &AngularModel,
    h: &PerturbationSpec,
    g: Option<&dyn Nonlinearity>,
    r: f64,
    u: &[Complex64],
) -> Vec<Complex64> {
    let samples: Vec<Complex64> = model
        .quad
        .nodes
        .iter()
        .zip(u)
        .map(|(node, &uj)| {
            let mut coef = h.h(r, &node.point);
            if let Some(g) = g {
                let x = [r * node.point[0], r * node.point[1], r * node.point[2]];
                coef += g.g(&x, uj.norm_sqr());
            }
            coef * uj
        })
        .collect();
    model.project(&samples)
}

/// (φ_k(λ), ζ_k(λ)) by surface quadrature of a sampled u.
pub fn project_modes(
    u: &dyn Fn(&[f64; 3]) -> Complex64,
    h: &PerturbationSpec,
    g: Option<&dyn Nonlinearity>,
    model: &AngularModel,
    grid: &RadialGrid,
    lambda: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    grid.check(lambda)?;
    let vals: Vec<Complex64> = model
        .quad
        .nodes
        .iter()
        .map(|n| u(&[lambda * n.point[0], lambda * n.point[1], lambda * n.point[2]]))
        .collect();
    let phi = model.project(&vals);
    let zeta = source_modes(model, h, g, lambda, &vals);
    Ok((phi, zeta))
}

fn delta_of(sigma: (f64, f64)) -> Result<f64> {
    let delta = sigma.0 - sigma.1;
    if !(delta > 1e-12) {
        return Err(Error::UnsupportedResonance);
    }
    Ok(delta)
}

/// φ(λ) = λ^{σ⁺}(c1 + ∫_λ^R s^{1−σ⁺}ζ/(σ⁺−σ⁻)ds) + λ^{σ⁻}(c2 + ∫_λ^R s^{1−σ⁻}ζ/(σ⁻−σ⁺)ds)
/// for ζ tabulated on the grid nodes.
pub fn radial_closed_form(
    grid: &RadialGrid,
    zeta: &[Complex64],
    sigma: (f64, f64),
    c1: Complex64,
    c2: Complex64,
) -> Result<RadialMode> {
    let delta = delta_of(sigma)?;
    let z: Vec<Complex64> = zeta
        .iter()
        .zip(&grid.nodes)
        .map(|(zv, r)| zv * r.powf(2.0 - sigma.0))
        .collect();
    // With J' + ΔJ = z, J(a) = 0: the σ⁻ bracket equals e^{−Δt}(c2 − c_reg) + J/Δ,
    // c_reg = e^{Δb}J(b)/Δ.
    let j = grid.solve_first_order(Complex64::new(delta, 0.0), &z, ZERO)?;
    let n = grid.count();
    let b = grid.b();
    let c_reg = j[n - 1] * ((delta * b).exp() / delta);
    let cum = grid.cumulative(&z);
    let w: Vec<Complex64> = (0..n)
        .map(|i| {
            c1 + (cum[n - 1] - cum[i]) / delta + j[i] / delta + (c2 - c_reg) * (-delta * grid.t[i]).exp()
        })
        .collect();
    let dw = (0..n)
        .map(|i| -j[i] - (c2 - c_reg) * (delta * (-delta * grid.t[i]).exp()))
        .collect();
    Ok(RadialMode {
        exponent: sigma.0,
        w,
        dw,
    })
}

/// Log-derivative of z at the inner node, or 0 when z(a) is negligible.
fn inner_log_slope(grid: &RadialGrid, z: &[Complex64], negligible: bool) -> Complex64 {
    let scale = z.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if negligible || z[0].norm() <= 1e-13 * scale || z[0].norm() == 0.0 {
        return ZERO;
    }
    let d = grid.derivative(z);
    d[0] / z[0]
}

/// The regular-branch J: J' + ΔJ = z with J(a) = ∫_{−∞}^a e^{−Δ(a−τ)} z dτ
/// closed by a power-law continuation of z below r_min. `negligible` marks a
/// z(a) at roundoff level, whose slope is meaningless.
fn regular_j(grid: &RadialGrid, z: &[Complex64], delta: f64, negligible: bool) -> Result<Vec<Complex64>> {
    let p = inner_log_slope(grid, z, negligible);
    let denom = Complex64::new(delta, 0.0) + p;
    if !(denom.re > 0.0) {
        return Err(Error::NonintegrableForcing(p.re));
    }
    grid.solve_first_order(Complex64::new(delta, 0.0), z, z[0] / denom)
}

/// c₂ = −∫₀^R s^{1−σ⁻} ζ(s)/(σ⁻−σ⁺) ds, with a power-law tail below r_min.
pub fn regular_constant_c2(grid: &RadialGrid, zeta: &[Complex64], sigma: (f64, f64)) -> Result<Complex64> {
    let delta = delta_of(sigma)?;
    let z: Vec<Complex64> = zeta
        .iter()
        .zip(&grid.nodes)
        .map(|(zv, r)| zv * r.powf(2.0 - sigma.0))
        .collect();
    if z.iter().all(|v| v.norm() == 0.0) {
        return Ok(ZERO);
    }
    let j = regular_j(grid, &z, delta, false)?;
    Ok(j[grid.count() - 1] * ((delta * grid.b()).exp() / delta))
}

/// Regular-branch mode with w(b) = w_b for the forcing z = r^{2−σ⁺}ζ.
fn closed_form_regular(
    grid: &RadialGrid,
    z: &[Complex64],
    exponent: f64,
    delta: f64,
    w_b: Complex64,
    negligible: bool,
) -> Result<RadialMode> {
    let n = grid.count();
    if z.iter().all(|v| v.norm() == 0.0) {
        return Ok(RadialMode::constant(exponent, n, w_b));
    }
    let j = regular_j(grid, z, delta, negligible)?;
    let cum = grid.cumulative(z);
    let c1 = w_b - j[n - 1] / delta;
    let w = (0..n).map(|i| c1 + (cum[n - 1] - cum[i]) / delta + j[i] / delta).collect();
    let dw = j.iter().map(|v| -v).collect();
    Ok(RadialMode { exponent, w, dw })
}

/// w'' + Δw' + F w = 0 with F = r²ρ, w(b) = w_b and the regular-branch
/// condition w'(a) = −F(a)w(a)/(Δ + p) at r_min, p the log-slope of Fw.
fn collocate_radial(
    grid: &RadialGrid,
    h: &PerturbationSpec,
    exponent: f64,
    delta: f64,
    w_b: Complex64,
) -> Result<RadialMode> {
    let n = grid.count();
    let d = grid.diff_matrix();
    let d2 = d * d;
    let f: Vec<Complex64> = grid.nodes.iter().map(|&r| h.rho(r) * (r * r)).collect();
    let (rho_a, rrho_a) = h.rho_and_log_derivative(grid.r_min);
    let p_f = if rho_a.norm() > 0.0 {
        Complex64::new(2.0, 0.0) + rrho_a / rho_a
    } else {
        Complex64::new(2.0, 0.0)
    };
    let mut m = DMatrix::<Complex64>::from_fn(n, n, |i, j| Complex64::new(d2[(i, j)] + delta * d[(i, j)], 0.0));
    for i in 0..n {
        m[(i, i)] += f[i];
    }
    for j in 0..n {
        m[(n - 1, j)] = ZERO;
    }
    m[(n - 1, n - 1)] = Complex64::new(1.0, 0.0);
    let mut rhs = DVector::<Complex64>::zeros(n);
    rhs[n - 1] = w_b;
    let mut p = p_f;
    let mut w = DVector::<Complex64>::zeros(n);
    for _ in 0..50 {
        let denom = Complex64::new(delta, 0.0) + p;
        if !(denom.re > 0.0) {
            return Err(Error::NonintegrableForcing(p.re));
        }
        let mut mm = m.clone();
        for j in 0..n {
            mm[(0, j)] = Complex64::new(d[(0, j)], 0.0);
        }
        mm[(0, 0)] += f[0] / denom;
        w = mm
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NumericFailure("radial collocation system is singular".into()))?;
        let dw0: Complex64 = (0..n).map(|j| w[j] * d[(0, j)]).sum();
        let p_new = if w[0].norm() > 0.0 { p_f + dw0 / w[0] } else { p_f };
        let change = (p_new - p).norm();
        p = p_new;
        if change < 1e-13 * (1.0 + p.norm()) {
            break;
        }
    }
    let wv: Vec<Complex64> = w.iter().cloned().collect();
    let dw = grid.derivative(&wv);
    Ok(RadialMode {
        exponent,
        w: wv,
        dw,
    })
}

fn check_boundary(model: &AngularModel, boundary: &[Complex64]) -> Result<()> {
    if boundary.len() > model.modes() {
        return Err(Error::InvalidArgument(format!(
            "{} boundary coefficients for {} retained modes",
            boundary.len(),
            model.modes()
        )));
    }
    Ok(())
}

/// Linear solve for a radial h: modes decouple, each solved on the regular branch.
pub fn solve_perturbed(
    model: Arc<AngularModel>,
    h: &PerturbationSpec,
    boundary: &[Complex64],
    grid: Arc<RadialGrid>,
) -> Result<FourierRadialField> {
    if !h.is_radial() {
        return Err(Error::InvalidArgument(
            "non-radial perturbation couples modes; use the Picard solver".into(),
        ));
    }
    check_boundary(&model, boundary)?;
    let roots = model.roots()?;
    let r_max = grid.r_max;
    let ks: Vec<usize> = (0..model.modes()).collect();
    let modes = crate::par_map(&ks, |&k| -> Result<RadialMode> {
        let sigma = roots[k];
        let delta = delta_of(sigma)?;
        let b = boundary.get(k).copied().unwrap_or(ZERO);
        let w_b = b * r_max.powf(-sigma.0);
        if b.norm() == 0.0 {
            Ok(RadialMode::zero(sigma.0, grid.count()))
        } else if h.is_zero() {
            Ok(RadialMode::constant(sigma.0, grid.count(), w_b))
        } else {
            collocate_radial(&grid, h, sigma.0, delta, w_b)
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut field = FourierRadialField {
        model,
        grid,
        modes,
        log: SolveLog {
            iterations: 1,
            changes: vec![],
            residual: 0.0,
        },
    };
    field.log.residual = equation_residual(&field, h, None);
    Ok(field)
}

/// Damped Picard iteration for L u = (h + g(·,|u|²))u with prescribed φ_k(R).
pub fn solve_picard(
    model: Arc<AngularModel>,
    h: &PerturbationSpec,
    g: &dyn Nonlinearity,
    boundary: &[Complex64],
    grid: Arc<RadialGrid>,
    damping: f64,
    max_iter: usize,
    tol: f64,
) -> Result<FourierRadialField> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::InvalidArgument(format!("damping must lie in (0, 1], got {damping}")));
    }
    validate_nonlinearity(g, model.dim())?;
    check_boundary(&model, boundary)?;
    let roots = model.roots()?;
    let mut field = solve_perturbed(model.clone(), &h.radial_part(), boundary, grid.clone())?;
    let n = grid.count();
    let r_max = grid.r_max;
    let w_b: Vec<Complex64> = (0..model.modes())
        .map(|k| boundary.get(k).copied().unwrap_or(ZERO) * r_max.powf(-roots[k].0))
        .collect();
    let g_opt = if g.is_zero() { None } else { Some(g) };
    let nodes: Vec<usize> = (0..n).collect();
    let mut changes = Vec::new();
    for it in 1..=max_iter {
        let zeta_at: Vec<Vec<Complex64>> = crate::par_map(&nodes, |&i| {
            let r = grid.nodes[i];
            let phi: Vec<Complex64> = field.modes.iter().map(|m| m.w[i] * r.powf(m.exponent)).collect();
            let u = &model.psi * DVector::from_column_slice(&phi);
            source_modes(&model, h, g_opt, r, u.as_slice())
        });
        // Inner-node scale in φ units; projections far below it are quadrature leakage.
        let r_a = grid.nodes[0];
        let floor = 1e-10
            * field
                .modes
                .iter()
                .zip(&zeta_at[0])
                .fold(0.0f64, |m, (md, z)| m.max(md.w[0].norm() * r_a.powf(md.exponent)).max(z.norm() * r_a * r_a));
        let ks: Vec<usize> = (0..model.modes()).collect();
        let new_modes = crate::par_map(&ks, |&k| -> Result<RadialMode> {
            let sigma = roots[k];
            let delta = delta_of(sigma)?;
            let z: Vec<Complex64> = (0..n)
                .map(|i| zeta_at[i][k] * grid.nodes[i].powf(2.0 - sigma.0))
                .collect();
            closed_form_regular(&grid, &z, sigma.0, delta, w_b[k], zeta_at[0][k].norm() * r_a * r_a <= floor)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        // Sup-norm change of the φ_k over the grid, relative to sup |φ_k|.
        let mut diff: f64 = 0.0;
        let mut size: f64 = 0.0;
        for (old, new) in field.modes.iter_mut().zip(new_modes) {
            for i in 0..n {
                let rs = grid.nodes[i].powf(old.exponent);
                let w = new.w[i] * damping + old.w[i] * (1.0 - damping);
                let dw = new.dw[i] * damping + old.dw[i] * (1.0 - damping);
                diff = diff.max((w - old.w[i]).norm() * rs);
                size = size.max(w.norm() * rs);
                old.w[i] = w;
                old.dw[i] = dw;
            }
        }
        let change = if size > 0.0 { diff / size } else { diff };
        changes.push(change);
        log::debug!("picard sweep {it}: change {change:.3e}");
        if change <= tol {
            field.log = SolveLog {
                iterations: it,
                changes,
                residual: 0.0,
            };
            field.log.residual = equation_residual(&field, h, g_opt);
            return Ok(field);
        }
    }
    Err(Error::Nonconvergence {
        iterations: max_iter,
        last_change: changes.last().copied().unwrap_or(f64::NAN),
    })
}

/// Strong-form residual of −φ″ − (N−1)φ′/r + μφ/r² = ζ at the grid
/// midpoints, multiplied by r² and divided by the local scale
/// max_k|φ_k(r)| + max_k r²|ζ_k(r)|; ζ is re-projected from the field.
pub fn equation_residual(field: &FourierRadialField, h: &PerturbationSpec, g: Option<&dyn Nonlinearity>) -> f64 {
    let grid = &field.grid;
    let model = &field.model;
    let Ok(roots) = model.roots() else {
        return f64::NAN;
    };
    let d2: Vec<Vec<Complex64>> = field.modes.iter().map(|m| grid.derivative(&m.dw)).collect();
    let mids = grid.midpoints();
    let rows: Vec<f64> = crate::par_map(&mids, |&t| {
        let weights = grid.interp_weights(t);
        let r = t.exp();
        let interp = |v: &[Complex64]| -> Complex64 { weights.iter().zip(v).map(|(a, b)| b * *a).sum() };
        let mut phi = Vec::with_capacity(field.len());
        let mut parts = Vec::with_capacity(field.len());
        for (k, m) in field.modes.iter().enumerate() {
            let w = interp(&m.w);
            phi.push(w * r.powf(m.exponent));
            parts.push((interp(&m.dw), interp(&d2[k])));
        }
        let u = &model.psi * DVector::from_column_slice(&phi);
        let zeta = source_modes(model, h, g, r, u.as_slice());
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let mut zscale: f64 = 0.0;
        for (k, (dw, ddw)) in parts.iter().enumerate() {
            let sigma = roots[k];
            let rs = r.powf(sigma.0);
            let lhs = (ddw + dw * (sigma.0 - sigma.1)) * rs + zeta[k] * (r * r);
            worst = worst.max(lhs.norm());
            scale = scale.max(phi[k].norm());
            zscale = zscale.max(zeta[k].norm() * r * r);
        }
        let total = scale + zscale;
        if total == 0.0 {
            0.0
        } else {
            worst / total
        }
    });
    rows.into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::{NoNonlinearity, PowerNonlinearity};
    use crate::potential::AngularPotential;

    fn setup() -> (Arc<AngularModel>, Arc<RadialGrid>) {
        let model = AngularModel::build(AngularPotential::zero(3), 6, 0, 16).unwrap();
        (Arc::new(model), Arc::new(RadialGrid::new(1.0, 1e-4, 48).unwrap()))
    }

    #[test]
    fn homogeneous_value_and_gradient() {
        let (model, grid) = setup();
        let f = synthesize_model_solution(model.clone(), 2, Complex64::new(1.0, 0.0), grid).unwrap();
        let x = [0.1, -0.2, 0.3];
        let r = (0.14f64).sqrt();
        let node = SphereNode::from_point([x[0] / r, x[1] / r, x[2] / r]);
        let (psi, _) = model.eigenfunctions_at(&node);
        assert!((f.eval(&x).unwrap() - psi[2] * r).norm() < 1e-13);
        // Degree-1 harmonic times r is linear: check the gradient by differences.
        let g = f.gradient(&x).unwrap();
        for c in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[c] += 1e-6;
            xm[c] -= 1e-6;
            let fd = (f.eval(&xp).unwrap() - f.eval(&xm).unwrap()) / 2e-6;
            assert!((fd - g[c]).norm() < 1e-8);
        }
    }

    #[test]
    fn parseval_and_projection() {
        let (model, grid) = setup();
        let mut f = synthesize_model_solution(model.clone(), 1, Complex64::new(2.0, 1.0), grid.clone()).unwrap();
        f.modes[5] = RadialMode::constant(2.0, grid.count(), Complex64::new(0.0, -0.5));
        for r in [1e-3, 0.1, 0.9] {
            assert!(f.parseval_defect(r) < 1e-12);
        }
        let u = |x: &[f64; 3]| f.eval(x).unwrap();
        let (phi, zeta) = project_modes(&u, &PerturbationSpec::zero(), None, &model, &grid, 0.5).unwrap();
        assert!((phi[1] - Complex64::new(1.0, 0.5)).norm() < 1e-12);
        assert!(zeta.iter().all(|z| z.norm() == 0.0));
        assert!(project_modes(&u, &PerturbationSpec::zero(), None, &model, &grid, 2.0).is_err());
    }

    #[test]
    fn closed_form_homogeneous() {
        let grid = RadialGrid::new(1.0, 1e-4, 32).unwrap();
        let zeta = vec![ZERO; grid.count()];
        let c1 = Complex64::new(0.3, 0.1);
        let c2 = Complex64::new(-1e-3, 0.0);
        let m = radial_closed_form(&grid, &zeta, (1.0, -2.0), c1, c2).unwrap();
        for (i, r) in grid.nodes.iter().enumerate() {
            let phi = m.w[i] * r.powf(1.0);
            let exact = c1 * *r + c2 * r.powf(-2.0);
            assert!((phi - exact).norm() < 1e-12 * exact.norm());
        }
        assert_eq!(radial_closed_form(&grid, &zeta, (0.5, 0.5), c1, c2), Err(Error::UnsupportedResonance));
    }

    #[test]
    fn perturbed_solve_is_linear_and_regular() {
        let (model, grid) = setup();
        let h = PerturbationSpec::inverse_square_eps(0.1, 0.5);
        let b = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.2, 0.0)];
        let f = solve_perturbed(model.clone(), &h, &b, grid.clone()).unwrap();
        assert!(f.log.residual < 1e-10, "residual {}", f.log.residual);
        let b2: Vec<Complex64> = b.iter().map(|v| v * 2.0).collect();
        let f2 = solve_perturbed(model.clone(), &h, &b2, grid.clone()).unwrap();
        for (m1, m2) in f.modes.iter().zip(&f2.modes) {
            for (a, c) in m1.w.iter().zip(&m2.w) {
                assert!((a * 2.0 - c).norm() < 1e-10 * (1.0 + c.norm()));
            }
        }
        let zonal = h.clone().with_zonal(0.5);
        assert!(solve_perturbed(model, &zonal, &b, grid).is_err());
    }

    #[test]
    fn closed_form_monomial_forcing() {
        // ζ = s^β with σ = (1, −2): every integral is elementary.
        let grid = RadialGrid::new(1.0, 1e-4, 48).unwrap();
        let beta = 0.3;
        let (sp, sm) = (1.0, -2.0);
        let delta = sp - sm;
        let zeta: Vec<Complex64> = grid.nodes.iter().map(|r| Complex64::new(r.powf(beta), 0.0)).collect();
        let c1 = Complex64::new(0.2, 0.0);
        let c2 = Complex64::new(1e-4, 0.0);
        let m = radial_closed_form(&grid, &zeta, (sp, sm), c1, c2).unwrap();
        let int = |g: f64, l: f64| (1.0 - l.powf(g + 1.0)) / (g + 1.0);
        for (i, &r) in grid.nodes.iter().enumerate() {
            let exact = r.powf(sp) * (c1 + int(1.0 - sp + beta, r) / delta)
                + r.powf(sm) * (c2 - int(1.0 - sm + beta, r) / delta);
            let phi = m.w[i] * r.powf(sp);
            assert!((phi - exact).norm() < 1e-10 * exact.norm(), "{r} {phi} {exact}");
        }
        let c2_reg = regular_constant_c2(&grid, &zeta, (sp, sm)).unwrap();
        let exact = 1.0 / ((2.0 - sm + beta) * delta);
        assert!((c2_reg.re - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn picard_reduces_to_linear_solve() {
        let (model, grid) = setup();
        let h = PerturbationSpec::inverse_square_eps(0.1, 0.5);
        let b = [Complex64::new(1e-2, 0.0), ZERO, Complex64::new(0.0, 3e-3)];
        let lin = solve_perturbed(model.clone(), &h, &b, grid.clone()).unwrap();
        let grid_nodes = grid.nodes.clone();
        let pic = solve_picard(model, &h, &NoNonlinearity, &b, grid, 1.0, 30, 1e-8).unwrap();
        for (m1, m2) in lin.modes.iter().zip(&pic.modes) {
            for (i, r) in grid_nodes.iter().enumerate() {
                let d = (m1.w[i] - m2.w[i]).norm() * r.powf(m1.exponent);
                assert!(d < 1e-14, "{d}");
            }
        }
    }

    #[test]
    fn picard_zonal_cubic_converges_with_odd_symmetry() {
        let (model, grid) = setup();
        let h = PerturbationSpec::inverse_square_eps(0.1, 0.5).with_zonal(0.5);
        let g = PowerNonlinearity { p: 1.0, coupling: 1.0 };
        let b = [Complex64::new(1e-2, 0.0)];
        let f = solve_picard(model.clone(), &h, &g, &b, grid.clone(), 1.0, 30, 1e-8).unwrap();
        assert!(f.log.iterations <= 30);
        assert!(f.log.residual < 1e-8, "residual {}", f.log.residual);
        assert!(f.log.changes.windows(2).all(|w| w[1] < w[0]));
        let bm = [Complex64::new(-1e-2, 0.0)];
        let fm = solve_picard(model.clone(), &h, &g, &bm, grid.clone(), 1.0, 30, 1e-8).unwrap();
        for (m1, m2) in f.modes.iter().zip(&fm.modes) {
            for (a, c) in m1.w.iter().zip(&m2.w) {
                assert!((a + c).norm() < 1e-14);
            }
        }
        // Zonal coupling feeds modes with no boundary data.
        assert!(f.modes[2].w[0].norm() > 1e-4);
        let err = solve_picard(model, &h, &g, &b, grid, 1.0, 2, 1e-8).unwrap_err();
        assert!(matches!(err, Error::Nonconvergence { iterations: 2, .. }));
    }
}
