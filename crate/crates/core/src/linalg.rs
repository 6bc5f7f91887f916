//! Dense Hermitian helpers: symmetrisation, the generalized eigenproblem
//! Q c = μ M c by Cholesky reduction, and deterministic eigenvector
//! normalisation inside degenerate clusters.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::Complex64;

/// Replaces `a` by (a + a†)/2 and returns max |a − a†| of the input.
pub fn symmetrize(a: &mut DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            let x = a[(i, j)];
            let y = a[(j, i)].conj();
            worst = worst.max((x - y).norm());
            let avg = (x + y) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    worst
}

pub fn max_abs(a: &DMatrix<Complex64>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Spectral norm estimate used to scale residual tolerances: the Frobenius
/// norm, which bounds it from above.
pub fn frobenius(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn smallest_eigenvalue(a: &DMatrix<Complex64>) -> f64 {
    let eig = SymmetricEigen::new(a.clone());
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// All generalized eigenpairs of the Hermitian pencil (Q, M), M positive
/// definite, sorted ascending. Columns are M-orthonormal.
pub fn generalized_eigh(
    q: &DMatrix<Complex64>,
    m: &DMatrix<Complex64>,
) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = q.nrows();
    let chol = Cholesky::new(m.clone())
        .ok_or_else(|| Error::DiscretizationFailure("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    if (0..n).any(|i| !(l[(i, i)].re > 0.0) || l[(i, i)].im.abs() > 1e-12 * l[(i, i)].re) {
        return Err(Error::DiscretizationFailure("mass matrix is not positive definite".into()));
    }
    // C = L⁻¹ Q L⁻†
    let linv_q = l
        .solve_lower_triangular(q)
        .ok_or_else(|| Error::NumericFailure("triangular solve failed".into()))?;
    let c_adj = l
        .solve_lower_triangular(&linv_q.adjoint())
        .ok_or_else(|| Error::NumericFailure("triangular solve failed".into()))?;
    let mut c = c_adj.adjoint();
    symmetrize(&mut c);
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    let vecs = l
        .adjoint()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::NumericFailure("back substitution failed".into()))?;
    Ok((values, vecs))
}

/// Splits sorted eigenvalues into clusters whose consecutive gaps are below
/// `gap` (absolute, scaled by max(1, |μ|)).
pub fn clusters(values: &[f64], gap: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        let split = i == values.len()
            || (values[i] - values[i - 1]).abs() > gap * values[i].abs().max(1.0);
        if split {
            out.push(start..i);
            start = i;
        }
    }
    out
}

fn m_inner(m: &DMatrix<Complex64>, a: &DVector<Complex64>, b: &DVector<Complex64>) -> Complex64 {
    (a.adjoint() * m * b)[(0, 0)]
}

/// Re-orthonormalises the columns of `vecs` in `range` against M and rotates
/// them into a canonical basis of their span: column j is pivoted on the
/// basis row with the largest remaining weight (lowest index on ties), then
/// its largest-magnitude coefficient is made real positive.
pub fn canonicalize_cluster(
    vecs: &mut DMatrix<Complex64>,
    m: &DMatrix<Complex64>,
    range: std::ops::Range<usize>,
) {
    let n = vecs.nrows();
    let cols: Vec<usize> = range.collect();
    let k = cols.len();
    let mut block: Vec<DVector<Complex64>> = cols.iter().map(|&c| vecs.column(c).into_owned()).collect();

    // Modified Gram–Schmidt in the M inner product.
    for j in 0..k {
        for i in 0..j {
            let proj = m_inner(m, &block[i], &block[j]);
            let bi = block[i].clone();
            block[j] -= bi * proj;
        }
        let nrm = m_inner(m, &block[j], &block[j]).re.sqrt();
        block[j] /= Complex64::new(nrm, 0.0);
    }

    if k > 1 {
        let mut used = vec![false; n];
        for j in 0..k {
            // Pivot row: largest norm of the remaining columns' entries.
            let mut best_row = 0;
            let mut best = -1.0;
            for r in 0..n {
                if used[r] {
                    continue;
                }
                let w: f64 = (j..k).map(|c| block[c][r].norm_sqr()).sum::<f64>().sqrt();
                if w > best * (1.0 + 1e-8) {
                    best = w;
                    best_row = r;
                }
            }
            used[best_row] = true;
            // Unitary rotation of columns j..k concentrating row best_row in column j.
            let x: Vec<Complex64> = (j..k).map(|c| block[c][best_row].conj()).collect();
            let xn = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if xn == 0.0 {
                continue;
            }
            let u: Vec<Complex64> = x.iter().map(|z| z / xn).collect();
            // New column j = Σ_c u_c block[c]; the rest is completed by Gram–Schmidt.
            let mut new_cols: Vec<DVector<Complex64>> = Vec::with_capacity(k - j);
            let mut first = DVector::zeros(n);
            for (off, c) in (j..k).enumerate() {
                first += &block[c] * u[off];
            }
            new_cols.push(first);
            for c in j..k {
                let mut v = block[c].clone();
                for prev in &new_cols {
                    let proj = m_inner(m, prev, &v);
                    v -= prev * proj;
                }
                let nv = m_inner(m, &v, &v).re.sqrt();
                if nv > 1e-10 && new_cols.len() < k - j {
                    v /= Complex64::new(nv, 0.0);
                    new_cols.push(v);
                }
            }
            for (off, v) in new_cols.into_iter().enumerate() {
                block[j + off] = v;
            }
        }
    }

    for (j, &c) in cols.iter().enumerate() {
        let v = &mut block[j];
        let mut best = 0;
        let mut best_mag = -1.0;
        for r in 0..n {
            let mag = v[r].norm();
            if mag > best_mag * (1.0 + 1e-8) {
                best_mag = mag;
                best = r;
            }
        }
        let phase = v[best] / Complex64::new(v[best].norm(), 0.0);
        *v /= phase;
        v[best] = Complex64::new(v[best].re, 0.0);
        vecs.set_column(c, v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn generalized_problem_matches_direct_definition() {
        let q = DMatrix::from_row_slice(
            3,
            3,
            &[c(2.0, 0.0), c(0.5, 0.3), c(0.0, 0.0), c(0.5, -0.3), c(1.0, 0.0), c(0.1, 0.2), c(0.0, 0.0), c(0.1, -0.2), c(3.0, 0.0)],
        );
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[c(1.0, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.1, 0.0), c(1.5, 0.0), c(0.0, 0.1), c(0.0, 0.0), c(0.0, -0.1), c(2.0, 0.0)],
        );
        let (vals, vecs) = generalized_eigh(&q, &m).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for k in 0..3 {
            let v = vecs.column(k).into_owned();
            let r = &q * &v - (&m * &v) * c(vals[k], 0.0);
            assert!(r.norm() < 1e-12);
            assert!((m_inner(&m, &v, &v).re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_mass_is_rejected() {
        let q = DMatrix::<Complex64>::identity(2, 2);
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        assert!(matches!(generalized_eigh(&q, &m), Err(Error::DiscretizationFailure(_))));
    }

    #[test]
    fn cluster_canonicalisation_is_basis_independent() {
        // Two different orthonormal bases of the same 2-plane give the same output.
        let m = DMatrix::<Complex64>::identity(4, 4);
        let s = 0.5f64.sqrt();
        let mut a = DMatrix::from_row_slice(
            4,
            2,
            &[c(s, 0.0), c(0.0, s), c(s, 0.0), c(0.0, -s), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        );
        let mut b = DMatrix::from_row_slice(
            4,
            2,
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        );
        canonicalize_cluster(&mut a, &m, 0..2);
        canonicalize_cluster(&mut b, &m, 0..2);
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn cluster_split() {
        let v = [0.0, 2.0, 2.0 + 1e-12, 2.0 - 1e-13, 6.0];
        let cl = clusters(&v, 1e-8);
        assert_eq!(cl, vec![0..1, 1..4, 4..5]);
    }
}

/// Largest eigenvalue of a Hermitian operator given by its action, via
/// Lanczos with full reorthogonalisation from a fixed start vector.
/// Stops when the Ritz value moves by less than `tol` (relative) over
/// five steps or the Krylov space becomes invariant.
pub fn lanczos_top(apply: impl Fn(&DVector<Complex64>) -> DVector<Complex64>, n: usize, tol: f64) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let mut q = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.5 * ((i as f64) * 0.7548776662).sin(), 0.0));
    q /= Complex64::new(q.norm(), 0.0);
    let mut basis: Vec<DVector<Complex64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let ritz = |alpha: &[f64], beta: &[f64]| -> f64 {
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        SymmetricEigen::new(t).eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    };
    for step in 0..n {
        let v = &basis[step];
        let mut w = apply(v);
        let a = v.dotc(&w).re;
        alpha.push(a);
        // Two passes of classical Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&w);
                w -= b * c;
            }
        }
        let theta = ritz(&alpha, &beta);
        if !theta.is_finite() {
            return Err(Error::NumericFailure("Lanczos produced a non-finite Ritz value".into()));
        }
        history.push(theta);
        let b = w.norm();
        let scale = theta.abs().max(f64::MIN_POSITIVE);
        if b <= 1e-14 * scale || step + 1 == n {
            return Ok(theta);
        }
        if history.len() > 5 {
            let old = history[history.len() - 6];
            if (theta - old).abs() <= tol * scale {
                return Ok(theta);
            }
        }
        beta.push(b);
        basis.push(w / Complex64::new(b, 0.0));
    }
    Ok(history.last().copied().unwrap_or(0.0))
}
