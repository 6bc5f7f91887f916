//! Rayleigh-quotient envelopes η₀(r), η₁(r) over H¹(B_r), their power-law
//! behaviour toward the origin, and the Pohozaev-identity residual.
//!
//! Trial functions are ψ_k(θ)·φ_j(|x|) with ψ_k the angular eigenbasis of
//! degree ≤ L_q and φ_j piecewise-linear hats on the mesh
//! {0} ∪ {r q^{n−1}, …, r q, r}. The hat at the origin keeps constants in
//! the space; nothing is imposed at |x| = r.

use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::FourierRadialField;
use crate::frequency::{least_squares, FrequencyContext};
use crate::linalg;
use crate::perturbation::{Nonlinearity, PerturbationSpec};
use crate::potential::AngularPotential;
use crate::quadrature::gauss_legendre;
use crate::spectrum::AngularModel;
use crate::Complex64;

/// Largest exponent misfit for which a power law counts as non-decaying.
pub const EXPONENT_TOLERANCE: f64 = 0.01;
/// Relative fit residual beyond which a verdict is inconclusive.
pub const FIT_TOLERANCE: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct BallBasis {
    pub angular_degree: usize,
    /// Number of positive mesh nodes n; the radial space has n + 1 hats.
    pub radial_count: usize,
    pub ratio: f64,
    pub model: AngularModel,
}

impl BallBasis {
    pub fn new(potential: &AngularPotential, angular_degree: usize, radial_count: usize, ratio: f64) -> Result<Self> {
        if radial_count < 2 || !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ball basis needs >= 2 radial nodes and 0 < q < 1, got {radial_count}, {ratio}"
            )));
        }
        let count = (angular_degree + 1) * (angular_degree + 1);
        let model = AngularModel::build(potential.clone(), angular_degree, 0, count)?;
        Ok(BallBasis {
            angular_degree,
            radial_count,
            ratio,
            model,
        })
    }

    /// Doubled angular degree and the geometric mesh with every ratio
    /// replaced by its square root; contains the current space.
    pub fn refined(&self) -> Result<Self> {
        BallBasis::new(
            &self.model.potential,
            (2 * self.angular_degree).max(1),
            2 * self.radial_count - 1,
            self.ratio.sqrt(),
        )
    }

    pub fn angular_count(&self) -> usize {
        self.model.modes()
    }

    pub fn radial_functions(&self) -> usize {
        self.radial_count + 1
    }

    pub fn count(&self) -> usize {
        self.angular_count() * self.radial_functions()
    }

    /// Mesh 0 = s_0 < s_1 < … < s_n = r.
    pub fn mesh(&self, r: f64) -> Vec<f64> {
        let n = self.radial_count;
        let mut s = vec![0.0];
        s.extend((0..n).rev().map(|j| r * self.ratio.powi(j as i32)));
        s
    }
}

/// Radial weight w(s) integrated against hat products on the mesh:
/// ∫ w φ_iφ_j ds (values) and ∫ w φ_i′φ_j′ ds (slopes).
fn radial_matrix(mesh: &[f64], w: &dyn Fn(f64) -> f64, slopes: bool) -> DMatrix<f64> {
    let n = mesh.len();
    let (gx, gw) = gauss_legendre(10);
    let mut out = DMatrix::zeros(n, n);
    for e in 0..n - 1 {
        let (a, b) = (mesh[e], mesh[e + 1]);
        let len = b - a;
        // The first element reaches the origin: split it geometrically.
        let pieces: Vec<(f64, f64)> = if a == 0.0 {
            let mut p: Vec<(f64, f64)> = (0..48).map(|k| (b * 0.5f64.powi(k + 1), b * 0.5f64.powi(k))).collect();
            p.reverse();
            p
        } else {
            vec![(a, b)]
        };
        let mut local = [[0.0; 2]; 2];
        for (pa, pb) in pieces {
            let half = 0.5 * (pb - pa);
            let mid = 0.5 * (pa + pb);
            for (x, wq) in gx.iter().zip(&gw) {
                let s = mid + half * x;
                let ws = wq * half * w(s);
                let f = if slopes {
                    [-1.0 / len, 1.0 / len]
                } else {
                    [(b - s) / len, (s - a) / len]
                };
                for i in 0..2 {
                    for j in 0..2 {
                        local[i][j] += ws * f[i] * f[j];
                    }
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                out[(e + i, e + j)] += local[i][j];
            }
        }
    }
    out
}

/// The quotient forms in tensor form. The denominator is block diagonal
/// over angular eigenmodes, D_k = K1 + μ_k K0 + boundary term; the
/// numerators are W ⊗ R0 and W ⊗ R1 with W the angular weight of |χ|
/// (the identity for a radial h).
#[derive(Debug, Clone)]
pub struct BallForms {
    pub den: Vec<DMatrix<f64>>,
    pub radial0: DMatrix<f64>,
    pub radial1: DMatrix<f64>,
    /// `None` when h is radial and the modes decouple.
    pub angular: Option<DMatrix<Complex64>>,
}

impl BallForms {
    pub fn dimension(&self) -> usize {
        self.den.len() * self.radial0.nrows()
    }

    /// Dense (numerator, denominator) pair on the full tensor space; for
    /// tests and small bases.
    pub fn dense(&self, which: u8) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let na = self.den.len();
        let nr = self.radial0.nrows();
        let total = na * nr;
        let radial = if which == 0 { &self.radial0 } else { &self.radial1 };
        let weight = |k: usize, l: usize| match &self.angular {
            Some(w) => w[(k, l)],
            None if k == l => Complex64::new(1.0, 0.0),
            None => Complex64::new(0.0, 0.0),
        };
        let num = DMatrix::from_fn(total, total, |p, q| weight(p / nr, q / nr) * radial[(p % nr, q % nr)]);
        let den = DMatrix::from_fn(total, total, |p, q| {
            if p / nr == q / nr {
                Complex64::new(self.den[p / nr][(p % nr, q % nr)], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        (num, den)
    }
}

fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn assemble_ball_forms(h: &PerturbationSpec, r: f64, basis: &BallBasis) -> Result<BallForms> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let model = &basis.model;
    let dim = model.dim();
    let nd = dim as f64;
    let (ok, margin) = crate::spectrum::check_positive_definiteness(&model.spectrum, dim);
    if !ok {
        let mu1 = model.spectrum.eigenvalues[0];
        return Err(Error::PositivityViolation {
            mu1,
            bound: mu1 - margin,
        });
    }
    let mesh = basis.mesh(r);
    let k1 = radial_matrix(&mesh, &|s| s.powf(nd - 1.0), true);
    let k0 = radial_matrix(&mesh, &|s| s.powf(nd - 3.0), false);
    let radial0 = radial_matrix(&mesh, &|s| s.powf(nd - 1.0) * h.rho(s).norm(), false);
    let radial1 = radial_matrix(&mesh, &|s| s.powf(nd - 1.0) * h.rho_and_log_derivative(s).1.re.abs(), false);
    let nr = mesh.len();
    let boundary = 0.5 * (nd - 2.0) * r.powf(nd - 2.0);
    let den = model
        .spectrum
        .eigenvalues
        .iter()
        .map(|mu| {
            let mut d = &k1 + &k0 * *mu;
            d[(nr - 1, nr - 1)] += boundary;
            d
        })
        .collect();
    let angular = if h.is_radial() {
        None
    } else {
        // ∫|χ|ψ̄_kψ_l dθ; |Re(x·∇h)| = |Re(rρ′)||χ| for real χ.
        let na = basis.angular_count();
        let mut w = DMatrix::from_fn(na, na, |k, l| {
            model
                .quad
                .nodes
                .iter()
                .zip(&model.quad.weights)
                .enumerate()
                .map(|(j, (node, wq))| model.psi[(j, k)].conj() * model.psi[(j, l)] * (h.chi(&node.point).abs() * wq))
                .sum::<Complex64>()
        });
        linalg::symmetrize(&mut w);
        Some(w)
    };
    Ok(BallForms {
        den,
        radial0,
        radial1,
        angular,
    })
}

fn denominator_failure(e: Error) -> Error {
    match e {
        Error::DiscretizationFailure(m) => Error::NumericFailure(format!("denominator form: {m}")),
        other => other,
    }
}

/// Largest generalized eigenvalue of Num c = η Den c. Decoupled modes are
/// solved densely block by block; the coupled tensor problem goes through
/// Lanczos on L⁻¹(W ⊗ R)L⁻ᴴ with L the blockwise Cholesky factor of Den.
pub fn eta_from_forms(forms: &BallForms, which: u8) -> Result<f64> {
    let radial = if which == 0 { &forms.radial0 } else { &forms.radial1 };
    if radial.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let top = match &forms.angular {
        None => {
            let num = complexify(radial);
            let mut best: f64 = 0.0;
            for d in &forms.den {
                let (values, _) = linalg::generalized_eigh(&num, &complexify(d)).map_err(denominator_failure)?;
                best = best.max(values.last().copied().unwrap_or(0.0));
            }
            best
        }
        Some(w) => {
            let factors = forms
                .den
                .iter()
                .map(|d| {
                    nalgebra::Cholesky::new(d.clone())
                        .map(|c| complexify(&c.l()))
                        .ok_or_else(|| Error::NumericFailure("denominator form is not positive definite".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            let na = factors.len();
            let nr = radial.nrows();
            let radial_c = complexify(radial);
            let apply = |x: &DVector<Complex64>| -> DVector<Complex64> {
                // Y = L⁻ᴴ x blockwise, Z = W Y Rᵀ, then L⁻¹ Z blockwise.
                let mut y = DMatrix::<Complex64>::zeros(na, nr);
                for (k, l) in factors.iter().enumerate() {
                    let xk = DVector::from_fn(nr, |i, _| x[k * nr + i]);
                    let yk = l.adjoint().solve_upper_triangular(&xk).expect("nonsingular factor");
                    y.row_mut(k).copy_from(&yk.transpose());
                }
                let z = w * y * radial_c.transpose();
                let mut out = DVector::zeros(na * nr);
                for (k, l) in factors.iter().enumerate() {
                    let zk = z.row(k).transpose();
                    let ok = l.solve_lower_triangular(&zk).expect("nonsingular factor");
                    out.rows_mut(k * nr, nr).copy_from(&ok);
                }
                out
            };
            linalg::lanczos_top(apply, na * nr, 1e-13)?
        }
    };
    if !top.is_finite() {
        return Err(Error::NumericFailure("generalized eigensolver returned a non-finite value".into()));
    }
    Ok(top.max(0.0))
}

pub fn eta(r: f64, which: u8, h: &PerturbationSpec, basis: &BallBasis) -> Result<f64> {
    if which > 1 {
        return Err(Error::InvalidArgument(format!("η index must be 0 or 1, got {which}")));
    }
    eta_from_forms(&assemble_ball_forms(h, r, basis)?, which)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientEnvelope {
    pub radii: Vec<f64>,
    pub eta0: Vec<f64>,
    pub eta1: Vec<f64>,
    /// |η(refined) − η| / η(refined) per radius.
    pub gap0: Vec<f64>,
    pub gap1: Vec<f64>,
}

/// η₀, η₁ on `basis` and on its refinement at every radius.
pub fn envelope(h: &PerturbationSpec, basis: &BallBasis, radii: &[f64]) -> Result<QuotientEnvelope> {
    let fine = basis.refined()?;
    let rows = crate::par_map(radii, |&r| -> Result<[f64; 4]> {
        let coarse = assemble_ball_forms(h, r, basis)?;
        let refined = assemble_ball_forms(h, r, &fine)?;
        Ok([
            eta_from_forms(&coarse, 0)?,
            eta_from_forms(&coarse, 1)?,
            eta_from_forms(&refined, 0)?,
            eta_from_forms(&refined, 1)?,
        ])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let gap = |a: f64, b: f64| if b == 0.0 { 0.0 } else { (b - a).abs() / b };
    Ok(QuotientEnvelope {
        radii: radii.to_vec(),
        eta0: rows.iter().map(|v| v[0]).collect(),
        eta1: rows.iter().map(|v| v[1]).collect(),
        gap0: rows.iter().map(|v| gap(v[0], v[2])).collect(),
        gap1: rows.iter().map(|v| gap(v[1], v[3])).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    /// η ≈ C r^p.
    pub c: f64,
    pub p: f64,
    /// Largest relative residual of the fit.
    pub residual: f64,
}

/// Log-log least squares; `None` when η vanishes identically.
pub fn fit_power(radii: &[f64], values: &[f64]) -> Result<Option<PowerFit>> {
    if values.iter().all(|v| *v == 0.0) {
        return Ok(None);
    }
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Inconclusive("envelope has zero or negative entries".into()));
    }
    let rows: Vec<Vec<f64>> = radii.iter().map(|r| vec![1.0, r.ln()]).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (coef, _) = least_squares(&rows, &y).ok_or_else(|| Error::NumericFailure("power fit failed".into()))?;
    let (c, p) = (coef[0].exp(), coef[1]);
    let residual = radii
        .iter()
        .zip(values)
        .map(|(r, v)| (c * r.powf(p) - v).abs() / v)
        .fold(0.0, f64::max);
    Ok(Some(PowerFit { c, p, residual }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisVerdict {
    pub fit: Option<PowerFit>,
    /// lim η(r) = 0 as r → 0 (only required of η₀).
    pub vanishes: bool,
    /// η(r)/r ∈ L¹(0, R).
    pub integrable: bool,
    /// (1/r)∫₀^r η(s)/s ds ∈ L¹(0, R).
    pub iterated_integrable: bool,
    /// ∫₀^R η(s)/s ds from the fit (infinite when divergent).
    pub integral: f64,
    /// ∫₀^R (1/r)∫₀^r η(s)/s ds dr from the fit.
    pub iterated_integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaReport {
    pub eta0: HypothesisVerdict,
    pub eta1: HypothesisVerdict,
    pub holds: bool,
}

fn verdict(radii: &[f64], values: &[f64]) -> Result<HypothesisVerdict> {
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let Some(fit) = fit_power(radii, values)? else {
        return Ok(HypothesisVerdict {
            fit: None,
            vanishes: true,
            integrable: true,
            iterated_integrable: true,
            integral: 0.0,
            iterated_integral: 0.0,
        });
    };
    if fit.residual > FIT_TOLERANCE {
        return Err(Error::Inconclusive(format!(
            "power-law fit residual {:.3} exceeds {FIT_TOLERANCE}",
            fit.residual
        )));
    }
    let decays = fit.p > EXPONENT_TOLERANCE;
    let (integral, iterated) = if decays {
        let i = fit.c * r_max.powf(fit.p) / fit.p;
        (i, i / fit.p)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(HypothesisVerdict {
        fit: Some(fit),
        vanishes: decays,
        integrable: decays,
        iterated_integrable: decays,
        integral,
        iterated_integral: iterated,
    })
}

pub fn check_eta_hypotheses(env: &QuotientEnvelope) -> Result<EtaReport> {
    let radii = &env.radii;
    let lo = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = radii.iter().cloned().fold(0.0, f64::max);
    if radii.len() < 8 || hi / lo < 100.0 * (1.0 - 1e-9) {
        return Err(Error::InvalidArgument(
            "need >= 8 radii spanning two decades".into(),
        ));
    }
    let eta0 = verdict(radii, &env.eta0)?;
    let eta1 = verdict(radii, &env.eta1)?;
    let holds = eta0.vanishes
        && eta0.integrable
        && eta0.iterated_integrable
        && eta1.integrable
        && eta1.iterated_integrable;
    Ok(EtaReport { eta0, eta1, holds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    pub r: f64,
    /// (LHS − RHS) / max |term|.
    pub residual: f64,
    pub terms: Vec<(String, f64)>,
    pub tail_warning: bool,
}

/// Both sides of the Pohozaev identity on B_r, term by term.
pub fn pohozaev_residual(
    field: &FourierRadialField,
    h: &PerturbationSpec,
    g: &dyn Nonlinearity,
    r: f64,
) -> Result<PohozaevReport> {
    let ctx = FrequencyContext::new(field, h, g)?;
    pohozaev_with(&ctx, r)
}

pub fn pohozaev_with(ctx: &FrequencyContext<'_>, r: f64) -> Result<PohozaevReport> {
    let nd = ctx.field().dim() as f64;
    let vol_energy = ctx.volume_energy(r)?;
    let (surf_energy, surf_normal) = ctx.surface_energy(r)?;
    let vol = ctx.volume_densities(r)?;
    let surf = ctx.surface_densities(r)?;
    let lhs = [
        ("volume energy", -0.5 * (nd - 2.0) * vol_energy),
        ("surface energy", 0.5 * r * surf_energy),
    ];
    let rhs = [
        ("normal derivative", r * surf_normal),
        ("x.grad h volume", -0.5 * vol.x_grad_h()),
        ("h volume", -0.5 * nd * vol.re_h()),
        ("h surface", 0.5 * r * surf.re_h()),
        ("G surface", r * surf.big_g()),
        ("G volume", -(vol.x_grad_big_g() + nd * vol.big_g())),
    ];
    let l: f64 = lhs.iter().map(|t| t.1).sum();
    let rr: f64 = rhs.iter().map(|t| t.1).sum();
    let scale = lhs.iter().chain(&rhs).fold(0.0f64, |m, t| m.max(t.1.abs()));
    let residual = if scale == 0.0 { 0.0 } else { (l - rr).abs() / scale };
    let tail_warning = ctx.tail_ratio(r) > crate::frequency::TAIL_TOLERANCE;
    Ok(PohozaevReport {
        r,
        residual,
        terms: lhs.iter().chain(&rhs).map(|(n, v)| (n.to_string(), *v)).collect(),
        tail_warning,
    })
}

/// Observed order log₂(e_coarse / e_fine) between two grids whose node
/// counts differ by a factor two; saturates when both sit at roundoff.
pub fn refinement_order(coarse: f64, fine: f64) -> f64 {
    let floor = 1e-14;
    if coarse <= floor {
        return f64::INFINITY;
    }
    (coarse / fine.max(floor)).log2()
}
