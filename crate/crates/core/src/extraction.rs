//! Leading coefficients β_i of the blow-up limit, the rescaled traces
//! λ^{−γ}u(λθ) and the pointwise bound |u(x)| ≤ C|x|^γ.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{source_modes, FourierRadialField};
use crate::perturbation::{Nonlinearity, PerturbationSpec};
use crate::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct LeadingTerm {
    pub gamma: f64,
    pub k0: usize,
    /// Retained-mode indices j0..j0+m of the eigenspace of σ⁺_{k0}.
    pub eigenspace: Range<usize>,
    pub betas: Vec<Complex64>,
    pub r_used: f64,
    /// Contribution of the power-law continuation below r_min to each β.
    pub inner_tail: Vec<Complex64>,
}

impl LeadingTerm {
    pub fn max_beta(&self) -> f64 {
        self.betas.iter().fold(0.0, |m, b| m.max(b.norm()))
    }
}

/// The mode nearest to γ and its eigenvalue cluster.
pub fn identify_eigenspace(field: &FourierRadialField, gamma: f64) -> Result<(usize, Range<usize>)> {
    let roots = field.model.roots()?;
    let k0 = roots
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 .0 - gamma).abs().total_cmp(&(b.1 .0 - gamma).abs()))
        .map(|(k, _)| k)
        .ok_or_else(|| Error::InvalidArgument("empty spectrum".into()))?;
    let cluster = field.model.spectrum.cluster_of(k0);
    Ok((cluster.start, cluster))
}

/// ζ_i(r_j) at every grid node for the modes in `range`.
fn sources_on_grid(
    field: &FourierRadialField,
    h: &PerturbationSpec,
    g: &dyn Nonlinearity,
    range: &Range<usize>,
) -> Vec<Vec<Complex64>> {
    let model = &field.model;
    let grid = &field.grid;
    let g_opt = if g.is_zero() { None } else { Some(g) };
    let per_node = crate::par_map(&grid.nodes, |&r| {
        let phi: Vec<Complex64> = field.modes.iter().map(|m| m.value(grid, r)).collect();
        let u = &model.psi * nalgebra::DVector::from_column_slice(&phi);
        source_modes(model, h, g_opt, r, u.as_slice())
    });
    range
        .clone()
        .map(|i| per_node.iter().map(|z| z[i]).collect())
        .collect()
}

/// β_i for i in the cluster of the σ⁺ nearest to `gamma_estimate`, with γ
/// snapped to that σ⁺, evaluated at radius `r`.
pub fn extract_beta(
    field: &FourierRadialField,
    h: &PerturbationSpec,
    g: &dyn Nonlinearity,
    gamma_estimate: f64,
    r: f64,
) -> Result<LeadingTerm> {
    let (k0, eigenspace) = identify_eigenspace(field, gamma_estimate)?;
    extract_beta_on(field, h, g, k0, eigenspace, r)
}

pub fn extract_beta_on(
    field: &FourierRadialField,
    h: &PerturbationSpec,
    g: &dyn Nonlinearity,
    k0: usize,
    eigenspace: Range<usize>,
    r: f64,
) -> Result<LeadingTerm> {
    let grid = &field.grid;
    grid.check(r)?;
    if eigenspace.end > field.len() || eigenspace.is_empty() {
        return Err(Error::InvalidArgument(format!("eigenspace {eigenspace:?} out of range")));
    }
    let gamma = field.model.spectrum.sigma_plus(k0)?;
    let nd = field.dim() as f64;
    let c = 2.0 * gamma + nd - 2.0;
    if !(c > 0.0) {
        return Err(Error::InvalidExponent(c));
    }
    let zetas = sources_on_grid(field, h, g, &eigenspace);
    let t = r.ln();
    let weights = grid.interp_weights(t);
    let at = |v: &[Complex64]| -> Complex64 { weights.iter().zip(v).map(|(w, x)| x * *w).sum() };
    // Inner-node scale in φ units; projections far below it are quadrature leakage.
    let r_a = grid.r_min;
    let floor = 1e-10 * field.mode_values(r_a).iter().fold(0.0f64, |m, v| m.max(v.0.norm()));
    let mut betas = Vec::with_capacity(eigenspace.len());
    let mut tails = Vec::with_capacity(eigenspace.len());
    for (i, zeta) in eigenspace.clone().zip(&zetas) {
        let phi_r = field.modes[i].value(grid, r);
        let mut beta = phi_r * r.powf(-gamma);
        if zeta.iter().any(|z| z.norm() > 0.0) {
            let negligible = zeta[0].norm() * r_a * r_a <= floor;
            // ∫ ζ s^{1−γ} ds = ∫ z dt with z = ζ e^{(2−γ)t}.
            let z: Vec<Complex64> = zeta
                .iter()
                .zip(&grid.nodes)
                .map(|(zv, s)| zv * s.powf(2.0 - gamma))
                .collect();
            let tail = power_tail(grid, &z, negligible)?;
            let first = tail + at(&grid.cumulative(&z));
            // ∫ ζ s^{γ+N−1} ds = ∫ z e^{ct} dt, z(0⁺) integrable with weight.
            let k = grid.weighted_cumulative(c, &z)?;
            let second = at(&k) * (c * t).exp() + tail_weighted(grid, &z, c, negligible)?;
            beta += (first - second * r.powf(-c)) / c;
            tails.push(tail / c);
        } else {
            tails.push(Complex64::new(0.0, 0.0));
        }
        betas.push(beta);
    }
    let lead = LeadingTerm {
        gamma,
        k0,
        eigenspace,
        betas,
        r_used: r,
        inner_tail: tails,
    };
    let size: f64 = field.surface(r).phi.iter().map(|p| p.norm_sqr()).sum::<f64>().sqrt();
    if size > 0.0 && !(lead.max_beta() > 1e-8 * size * r.powf(-gamma)) {
        return Err(Error::NumericFailure(format!(
            "leading coefficients vanish (max |β| = {:.3e})",
            lead.max_beta()
        )));
    }
    Ok(lead)
}

/// ∫_{−∞}^a z dt for z continued as e^{pt} below the grid.
fn power_tail(grid: &crate::radial::RadialGrid, z: &[Complex64], negligible: bool) -> Result<Complex64> {
    if negligible || z[0].norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let p = grid.derivative(z)[0] / z[0];
    if !(p.re > 0.0) {
        return Err(Error::NonintegrableForcing(p.re));
    }
    Ok(z[0] / p)
}

fn tail_weighted(grid: &crate::radial::RadialGrid, z: &[Complex64], c: f64, negligible: bool) -> Result<Complex64> {
    if negligible || z[0].norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let p = grid.derivative(z)[0] / z[0] + c;
    if !(p.re > 0.0) {
        return Err(Error::NonintegrableForcing(p.re));
    }
    Ok(z[0] * (c * grid.a()).exp() / p)
}

/// β at several radii and the largest pairwise relative deviation.
pub fn r_independence(
    field: &FourierRadialField,
    h: &PerturbationSpec,
    g: &dyn Nonlinearity,
    gamma_estimate: f64,
    radii: &[f64],
) -> Result<(Vec<LeadingTerm>, f64)> {
    let terms = radii
        .iter()
        .map(|&r| extract_beta(field, h, g, gamma_estimate, r))
        .collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for a in &terms {
        for b in &terms {
            let scale = a.max_beta().max(b.max_beta());
            let d = a
                .betas
                .iter()
                .zip(&b.betas)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
            worst = worst.max(d / scale);
        }
    }
    Ok((terms, worst))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub lambdas: Vec<f64>,
    pub e0: Vec<f64>,
    pub e1: Vec<f64>,
    pub e0_monotone: bool,
    pub e1_monotone: bool,
    pub e0_limit: f64,
    pub e1_limit: f64,
}

/// Sup-norm distance on the quadrature nodes between the rescaled traces
/// λ^{−γ}u(λθ), λ^{1−γ}∇u(λθ) and the limit Σβ_iψ_i, Σβ_i(γψ_iθ + ∇_Sψ_i).
pub fn blowup_trace(field: &FourierRadialField, lambdas: &[f64], leading: &LeadingTerm) -> Result<BlowupReport> {
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("lambdas must be strictly decreasing".into()));
    }
    for &l in lambdas {
        field.grid.check(l)?;
    }
    let model = &field.model;
    let gamma = leading.gamma;
    let nq = model.quad.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut limit = vec![zero; nq];
    let mut limit_grad = vec![[zero; 3]; nq];
    for (b, i) in leading.betas.iter().zip(leading.eigenspace.clone()) {
        for j in 0..nq {
            let p = model.psi[(j, i)];
            limit[j] += b * p;
            for c in 0..3 {
                limit_grad[j][c] += b * (p * gamma * model.quad.nodes[j].point[c] + model.grad_psi[c][(j, i)]);
            }
        }
    }
    let rows = crate::par_map(lambdas, |&l| {
        let s = field.surface(l);
        let scale = l.powf(-gamma);
        let (mut e0, mut e1): (f64, f64) = (0.0, 0.0);
        for j in 0..nq {
            e0 = e0.max((s.u[j] * scale - limit[j]).norm());
            let mut sq = 0.0;
            for c in 0..3 {
                let mut grad = s.u_r[j] * model.quad.nodes[j].point[c];
                for (k, phi) in s.phi.iter().enumerate() {
                    grad += phi / l * model.grad_psi[c][(j, k)];
                }
                sq += (grad * (l * scale) - limit_grad[j][c]).norm_sqr();
            }
            e1 = e1.max(sq.sqrt());
        }
        (e0, e1)
    });
    let e0: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let e1: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(BlowupReport {
        lambdas: lambdas.to_vec(),
        e0_monotone: e0.windows(2).all(|w| w[1] <= w[0]),
        e1_monotone: e1.windows(2).all(|w| w[1] <= w[0]),
        e0_limit: extrapolate_limit(&e0),
        e1_limit: extrapolate_limit(&e1),
        e0,
        e1,
    })
}

/// Aitken-type limit of the last three terms of a geometric-like sequence.
fn extrapolate_limit(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 3 {
        return v.last().copied().unwrap_or(f64::NAN);
    }
    let (a, b, c) = (v[n - 3], v[n - 2], v[n - 1]);
    let d1 = a - b;
    let d2 = b - c;
    if d1 != 0.0 {
        let rho = d2 / d1;
        if rho > 0.0 && rho < 1.0 {
            return (c - d2 * rho / (1.0 - rho)).max(0.0);
        }
    }
    c
}

/// λ_max, λ_max/2, … while inside the grid.
pub fn halving_sequence(start: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start * 0.5f64.powi(i as i32)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseBound {
    #[serde(rename = "C")]
    pub c: f64,
    pub uniform: bool,
    pub annulus_max: Vec<f64>,
}

/// max |u(x)|/|x|^γ over the annuli, sampled at five radii per annulus
/// times the quadrature nodes.
pub fn pointwise_bound(field: &FourierRadialField, gamma: f64, annuli: &[(f64, f64)]) -> Result<PointwiseBound> {
    if annuli.is_empty() {
        return Err(Error::InvalidArgument("no annuli given".into()));
    }
    let mut maxima = Vec::with_capacity(annuli.len());
    for &(lo, hi) in annuli {
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidArgument(format!("bad annulus ({lo}, {hi})")));
        }
        field.grid.check(lo)?;
        field.grid.check(hi)?;
        let radii: Vec<f64> = (0..5).map(|i| lo * (hi / lo).powf(i as f64 / 4.0)).collect();
        let m = radii
            .iter()
            .map(|&r| {
                let s = field.surface(r);
                s.u.iter().fold(0.0f64, |m, u| m.max(u.norm())) * r.powf(-gamma)
            })
            .fold(0.0f64, f64::max);
        maxima.push(m);
    }
    let mut sorted = maxima.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let c = sorted.last().copied().unwrap_or(0.0);
    Ok(PointwiseBound {
        c,
        uniform: maxima.iter().all(|m| *m <= 1.05 * median),
        annulus_max: maxima,
    })
}

/// Geometric annuli [R q^{i+1}, R q^i], i = 0..count.
pub fn geometric_annuli(r_max: f64, q: f64, count: usize) -> Vec<(f64, f64)> {
    (0..count)
        .map(|i| (r_max * q.powi(i as i32 + 1), r_max * q.powi(i as i32)))
        .collect()
}
