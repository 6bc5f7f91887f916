//! Galerkin discretization of L_{A,a} = (−i∇_S + A)² − a on S², its
//! eigenpairs, indicial roots and the positivity margin.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::harmonics::SpectralBasis;
use crate::linalg;
use crate::potential::AngularPotential;
use crate::quadrature::{SphereNode, SphereQuadrature};
use crate::Complex64;

/// Gap below which consecutive eigenvalues are treated as one cluster.
pub const CLUSTER_GAP: f64 = 1e-8;

/// Stiffness Q and mass M of the angular operator in a spectral basis.
#[derive(Debug, Clone)]
pub struct Forms {
    pub q: DMatrix<Complex64>,
    pub m: DMatrix<Complex64>,
    /// max |Q − Q†| before symmetrization.
    pub asymmetry: f64,
    pub accuracy_warning: bool,
}

/// Assembles Q_{mn} = ∫ (−i∇φ_n + Aφ_n)·conj(−i∇φ_m + Aφ_m) − a φ_n conj φ_m
/// and M_{mn} = ∫ φ_n conj φ_m by quadrature.
pub fn assemble_forms(
    pot: &AngularPotential,
    basis: &SpectralBasis,
    quad: &SphereQuadrature,
) -> Result<Forms> {
    if pot.dim != 3 {
        return Err(Error::UnsupportedDimension(pot.dim));
    }
    pot.validate(quad)?;
    let accuracy_warning = quad.exactness_degree < 2 * basis.degree_cap + 2;
    if accuracy_warning {
        log::warn!(
            "quadrature exactness {} is below 2L+2 = {}; forms may be inaccurate",
            quad.exactness_degree,
            2 * basis.degree_cap + 2
        );
    }
    let nb = basis.count();
    let nq = quad.len();
    let rows: Vec<(Vec<Complex64>, [Vec<Complex64>; 3], f64)> = crate::par_map(&quad.nodes, |node| {
        let s = basis.sample(node);
        let a_vec = (pot.magnetic)(&node.point);
        let a_val = (pot.electric)(&node.point);
        let i = Complex64::new(0.0, 1.0);
        let comps: [Vec<Complex64>; 3] = std::array::from_fn(|c| {
            (0..nb)
                .map(|n| -i * s.gradients[n][c] + s.values[n] * a_vec[c])
                .collect()
        });
        (s.values, comps, a_val)
    });
    let sw: Vec<f64> = quad.weights.iter().map(|w| w.sqrt()).collect();
    let mut q = DMatrix::<Complex64>::zeros(nb, nb);
    for c in 0..3 {
        let b = DMatrix::from_fn(nq, nb, |j, n| rows[j].1[c][n] * sw[j]);
        q += b.adjoint() * &b;
    }
    let v = DMatrix::from_fn(nq, nb, |j, n| rows[j].0[n] * sw[j]);
    let va = DMatrix::from_fn(nq, nb, |j, n| rows[j].0[n] * sw[j] * rows[j].2);
    q -= v.adjoint() * va;
    let mut m = v.adjoint() * &v;
    let asymmetry = linalg::symmetrize(&mut q);
    linalg::symmetrize(&mut m);
    Ok(Forms {
        q,
        m,
        asymmetry,
        accuracy_warning,
    })
}

/// Sorted eigenpairs of the discretized angular operator.
#[derive(Debug, Clone)]
pub struct AngularSpectrum {
    pub dim: usize,
    pub eigenvalues: Vec<f64>,
    /// Columns are ψ_k in the spectral basis, M-orthonormal.
    pub eigenvectors: DMatrix<Complex64>,
    pub residual_norms: Vec<f64>,
    pub q_norm: f64,
    /// Per-k (σ⁺, σ⁻); `None` when positivity fails.
    pub indicial_roots: Option<Vec<(f64, f64)>>,
    pub pd_margin: f64,
}

impl AngularSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Index ranges of degenerate clusters among the retained eigenvalues.
    pub fn clusters(&self) -> Vec<std::ops::Range<usize>> {
        linalg::clusters(&self.eigenvalues, CLUSTER_GAP)
    }

    pub fn cluster_of(&self, k: usize) -> std::ops::Range<usize> {
        self.clusters()
            .into_iter()
            .find(|c| c.contains(&k))
            .unwrap_or(k..k + 1)
    }

    pub fn sigma_plus(&self, k: usize) -> Result<f64> {
        indicial_pair(self.eigenvalues[k], self.dim).map(|p| p.0)
    }
}

/// First `k_max` generalized eigenpairs of (Q, M), ascending, with
/// deterministic bases inside degenerate clusters.
pub fn solve_spectrum(forms: &Forms, k_max: usize, dim: usize) -> Result<AngularSpectrum> {
    let n = forms.q.nrows();
    if k_max == 0 || k_max > n {
        return Err(Error::InvalidArgument(format!(
            "k_max = {k_max} must lie in 1..={n} (basis count)"
        )));
    }
    let m_min = linalg::smallest_eigenvalue(&forms.m);
    if m_min <= 1e-12 {
        return Err(Error::DiscretizationFailure(format!(
            "mass matrix smallest eigenvalue {m_min:.3e} is not positive"
        )));
    }
    let (values, mut vecs) = linalg::generalized_eigh(&forms.q, &forms.m)?;
    for cl in linalg::clusters(&values, CLUSTER_GAP) {
        linalg::canonicalize_cluster(&mut vecs, &forms.m, cl);
    }
    let eigenvalues = values[..k_max].to_vec();
    let eigenvectors = vecs.columns(0, k_max).into_owned();
    let residual_norms = (0..k_max)
        .map(|k| {
            let c = eigenvectors.column(k);
            let r = &forms.q * c - (&forms.m * c) * Complex64::new(eigenvalues[k], 0.0);
            r.norm()
        })
        .collect();
    let pd_margin = eigenvalues[0] + half_dim_sq(dim);
    let indicial_roots = eigenvalues
        .iter()
        .map(|&mu| indicial_pair(mu, dim))
        .collect::<Result<Vec<_>>>()
        .ok();
    Ok(AngularSpectrum {
        dim,
        eigenvalues,
        eigenvectors,
        residual_norms,
        q_norm: linalg::frobenius(&forms.q),
        indicial_roots,
        pd_margin,
    })
}

fn half_dim_sq(dim: usize) -> f64 {
    let h = (dim as f64 - 2.0) / 2.0;
    h * h
}

/// (σ⁺, σ⁻) = −(N−2)/2 ± √(((N−2)/2)² + μ).
pub fn indicial_pair(mu: f64, dim: usize) -> Result<(f64, f64)> {
    let bound = -half_dim_sq(dim);
    if mu <= bound {
        return Err(Error::PositivityViolation { mu1: mu, bound });
    }
    let h = (dim as f64 - 2.0) / 2.0;
    let root = (h * h + mu).sqrt();
    Ok((-h + root, -h - root))
}

pub fn indicial_roots(spectrum: &AngularSpectrum, dim: usize) -> Result<Vec<(f64, f64)>> {
    spectrum
        .eigenvalues
        .iter()
        .map(|&mu| indicial_pair(mu, dim))
        .collect()
}

/// (μ₁ > −((N−2)/2)², μ₁ + ((N−2)/2)²). The first entry is equivalent to
/// Λ(A,a) < 1; Λ itself is not computed.
pub fn check_positive_definiteness(spectrum: &AngularSpectrum, dim: usize) -> (bool, f64) {
    let margin = spectrum.eigenvalues[0] + half_dim_sq(dim);
    (margin > 0.0, margin)
}

/// Critical summability exponent for Λ ∈ [0, 1).
pub fn qlim(lambda_value: f64, dim: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&lambda_value) {
        return Err(Error::InvalidArgument(format!(
            "Lambda must lie in [0, 1), got {lambda_value}"
        )));
    }
    if dim < 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let crit = 2.0 * dim as f64 / (dim as f64 - 2.0);
    if lambda_value == 0.0 {
        Ok(crit * crit / 2.0)
    } else {
        Ok(crit / 2.0 * (4.0 / lambda_value - 2.0).min(crit))
    }
}

/// Everything downstream needs about the sphere: the potential, basis,
/// quadrature, forms, spectrum and eigenfunctions sampled on the nodes.
#[derive(Debug, Clone)]
pub struct AngularModel {
    pub potential: AngularPotential,
    pub basis: SpectralBasis,
    pub quad: SphereQuadrature,
    pub forms: Forms,
    pub spectrum: AngularSpectrum,
    /// ψ_k(θ_j), nodes × K.
    pub psi: DMatrix<Complex64>,
    /// Cartesian components of ∇_S ψ_k(θ_j), each nodes × K.
    pub grad_psi: [DMatrix<Complex64>; 3],
}

impl AngularModel {
    /// Degree cap `degree`, quadrature `resolution` (0 selects 2L+8) and
    /// `k_max` retained eigenpairs.
    pub fn build(
        potential: AngularPotential,
        degree: usize,
        resolution: usize,
        k_max: usize,
    ) -> Result<Self> {
        let resolution = if resolution == 0 { 2 * degree + 8 } else { resolution };
        let quad = SphereQuadrature::build(potential.dim, resolution)?;
        let basis = SpectralBasis::new(degree);
        let forms = assemble_forms(&potential, &basis, &quad)?;
        let spectrum = solve_spectrum(&forms, k_max, potential.dim)?;
        let samples = crate::par_map(&quad.nodes, |n| basis.sample(n));
        let nb = basis.count();
        let nq = quad.len();
        let vals = DMatrix::from_fn(nq, nb, |j, n| samples[j].values[n]);
        let psi = &vals * &spectrum.eigenvectors;
        let grad_psi = std::array::from_fn(|c| {
            DMatrix::from_fn(nq, nb, |j, n| samples[j].gradients[n][c]) * &spectrum.eigenvectors
        });
        Ok(AngularModel {
            potential,
            basis,
            quad,
            forms,
            spectrum,
            psi,
            grad_psi,
        })
    }

    pub fn dim(&self) -> usize {
        self.potential.dim
    }

    pub fn modes(&self) -> usize {
        self.spectrum.len()
    }

    /// Requires positivity; returns (σ⁺_k, σ⁻_k) for every retained k.
    pub fn roots(&self) -> Result<Vec<(f64, f64)>> {
        indicial_roots(&self.spectrum, self.dim())
    }

    /// ψ_k and ∇_S ψ_k at an arbitrary point of S².
    pub fn eigenfunctions_at(&self, node: &SphereNode) -> (Vec<Complex64>, Vec<[Complex64; 3]>) {
        let s = self.basis.sample(node);
        let k = self.modes();
        let mut vals = vec![Complex64::new(0.0, 0.0); k];
        let mut grads = vec![[Complex64::new(0.0, 0.0); 3]; k];
        for (n, (v, g)) in s.values.iter().zip(&s.gradients).enumerate() {
            for kk in 0..k {
                let c = self.spectrum.eigenvectors[(n, kk)];
                vals[kk] += c * v;
                for d in 0..3 {
                    grads[kk][d] += c * g[d];
                }
            }
        }
        (vals, grads)
    }

    /// Surface quadrature of f(θ_j) conj(ψ_k(θ_j)) for every k.
    pub fn project(&self, samples: &[Complex64]) -> Vec<Complex64> {
        (0..self.modes())
            .map(|k| {
                samples
                    .iter()
                    .zip(&self.quad.weights)
                    .enumerate()
                    .map(|(j, (f, w))| f * self.psi[(j, k)].conj() * *w)
                    .sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::GaugeFunction;

    fn forms(pot: &AngularPotential, l: usize) -> Forms {
        let quad = SphereQuadrature::build(3, 2 * l + 8).unwrap();
        assemble_forms(pot, &SpectralBasis::new(l), &quad).unwrap()
    }

    #[test]
    fn laplacian_is_diagonal() {
        let f = forms(&AngularPotential::zero(3), 4);
        let basis = SpectralBasis::new(4);
        for i in 0..basis.count() {
            for j in 0..basis.count() {
                let l = basis.labels[i].0 as f64;
                let target = if i == j { l * (l + 1.0) } else { 0.0 };
                assert!((f.q[(i, j)].re - target).abs() < 1e-10 && f.q[(i, j)].im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constant_shift() {
        let q0 = forms(&AngularPotential::zero(3), 5);
        let qc = forms(&AngularPotential::constant_a(3, 0.7), 5);
        let diff = &qc.q - (&q0.q - &q0.m * Complex64::new(0.7, 0.0));
        assert!(linalg::max_abs(&diff) < 1e-12);
    }

    #[test]
    fn rotation_forms_hermitian() {
        let f = forms(&AngularPotential::rotation(3, 0.5), 8);
        assert!(f.asymmetry < 1e-12, "asymmetry {}", f.asymmetry);
    }

    #[test]
    fn free_spectrum_and_shift() {
        let f = forms(&AngularPotential::zero(3), 6);
        let s = solve_spectrum(&f, 9, 3).unwrap();
        let expect = [0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0];
        for (a, b) in s.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-10);
        }
        let f3 = forms(&AngularPotential::constant_a(3, 3.0), 6);
        let s3 = solve_spectrum(&f3, 1, 3).unwrap();
        assert!((s3.eigenvalues[0] + 3.0).abs() < 1e-10);
        assert!(s3.indicial_roots.is_none());
    }

    #[test]
    fn rotation_refinement_agrees() {
        let pot = AngularPotential::rotation(3, 0.5);
        let a = solve_spectrum(&forms(&pot, 8), 1, 3).unwrap();
        let b = solve_spectrum(&forms(&pot, 12), 1, 3).unwrap();
        assert!((a.eigenvalues[0] - b.eigenvalues[0]).abs() < 1e-6);
    }

    #[test]
    fn gauge_invariance() {
        let pot = AngularPotential::rotation(3, 0.5);
        let gauged = pot.clone().with_gauge(GaugeFunction(1));
        let a = solve_spectrum(&forms(&pot, 12), 9, 3).unwrap();
        let b = solve_spectrum(&forms(&gauged, 12), 9, 3).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 5e-7, "{x} vs {y}");
        }
    }

    #[test]
    fn residuals_and_orthonormality() {
        let f = forms(&AngularPotential::rotation(3, 0.8).plus_constant_a(0.1), 8);
        let s = solve_spectrum(&f, 20, 3).unwrap();
        for r in &s.residual_norms {
            assert!(*r <= 1e-9 * s.q_norm);
        }
        let g = s.eigenvectors.adjoint() * &f.m * &s.eigenvectors;
        let id = DMatrix::<Complex64>::identity(20, 20);
        assert!(linalg::max_abs(&(g - id)) < 1e-10);
    }

    #[test]
    fn roots_and_margin() {
        assert_eq!(indicial_pair(0.0, 3).unwrap(), (0.0, -1.0));
        assert_eq!(indicial_pair(2.0, 3).unwrap(), (1.0, -2.0));
        assert_eq!(indicial_pair(0.0, 5).unwrap(), (0.0, -3.0));
        assert!(matches!(indicial_pair(-0.25, 3), Err(Error::PositivityViolation { .. })));
        let s = solve_spectrum(&forms(&AngularPotential::zero(3), 3), 4, 3).unwrap();
        assert_eq!(check_positive_definiteness(&s, 3), (true, 0.25));
        let s = solve_spectrum(&forms(&AngularPotential::constant_a(3, 0.25), 3), 4, 3).unwrap();
        let (ok, margin) = check_positive_definiteness(&s, 3);
        assert!(!ok && margin.abs() < 1e-12);
        let s = solve_spectrum(&forms(&AngularPotential::constant_a(3, 0.5), 3), 4, 3).unwrap();
        let (ok, margin) = check_positive_definiteness(&s, 4);
        assert!(ok && (margin - 0.5).abs() < 1e-12);
    }

    #[test]
    fn qlim_values() {
        assert_eq!(qlim(0.0, 3).unwrap(), 18.0);
        assert!((qlim(1.0 - 1e-9, 3).unwrap() - 6.0).abs() < 1e-6);
        assert_eq!(qlim(0.5, 4).unwrap(), 8.0);
        assert!(qlim(1.0, 3).is_err() && qlim(-0.1, 3).is_err());
    }

    #[test]
    fn dimension_and_kmax_errors() {
        let f = forms(&AngularPotential::zero(3), 2);
        assert!(matches!(solve_spectrum(&f, 10, 3), Err(Error::InvalidArgument(_))));
        let quad = SphereQuadrature::build(3, 8).unwrap();
        let pot = AngularPotential::zero(4);
        assert!(matches!(
            assemble_forms(&pot, &SpectralBasis::new(2), &quad),
            Err(Error::UnsupportedDimension(4))
        ));
    }
}
