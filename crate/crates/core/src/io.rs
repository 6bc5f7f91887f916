//! Deterministic CSV/JSON writers. Floats use Rust's shortest round-trip
//! formatting, so equal results give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::extraction::LeadingTerm;
use crate::spectrum::AngularModel;

pub fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == 0.0 {
        "0".into()
    } else if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serialises");
    s.push('\n');
    s
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

pub fn leading_term_json(term: &LeadingTerm) -> Value {
    let betas: Vec<Value> = term.betas.iter().map(|b| json!([b.re, b.im])).collect();
    let tail: Vec<Value> = term.inner_tail.iter().map(|b| json!([b.re, b.im])).collect();
    json!({
        "gamma": term.gamma,
        "k0": term.k0,
        "eigenspace": [term.eigenspace.start, term.eigenspace.end],
        "betas": betas,
        "r_used": term.r_used,
        "inner_tail": tail,
    })
}

/// SHA-256 over the degree cap, quadrature and computed eigenpairs; two runs
/// agree on it iff they used the same discrete angular model bit for bit.
pub fn basis_fingerprint(model: &AngularModel) -> String {
    let mut hasher = Sha256::new();
    hasher.update((model.basis.count() as u64).to_le_bytes());
    for (node, w) in model.quad.nodes.iter().zip(&model.quad.weights) {
        for c in node.point {
            hasher.update(c.to_bits().to_le_bytes());
        }
        hasher.update(w.to_bits().to_le_bytes());
    }
    for v in &model.spectrum.eigenvalues {
        hasher.update(v.to_bits().to_le_bytes());
    }
    for z in model.spectrum.eigenvectors.iter() {
        hasher.update(z.re.to_bits().to_le_bytes());
        hasher.update(z.im.to_bits().to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Spectrum table: k, μ_k, σ⁺_k, σ⁻_k, residual norm. Roots are NaN when
/// positivity fails.
pub fn spectrum_csv(model: &AngularModel) -> String {
    let s = &model.spectrum;
    let rows: Vec<Vec<f64>> = (0..s.len())
        .map(|k| {
            let (sp, sm) = s
                .indicial_roots
                .as_ref()
                .map(|r| r[k])
                .unwrap_or((f64::NAN, f64::NAN));
            vec![k as f64, s.eigenvalues[k], sp, sm, s.residual_norms[k]]
        })
        .collect();
    csv_table(&["k", "mu", "sigma_plus", "sigma_minus", "residual"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_round_trip_exact() {
        let v = [0.1 + 0.2, -3.0e-300, 1.0 / 3.0];
        let text = csv_table(&["x"], &v.iter().map(|x| vec![*x]).collect::<Vec<_>>());
        let parsed: Vec<f64> = text.lines().skip(1).map(|l| l.parse().unwrap()).collect();
        assert_eq!(parsed, v);
    }

    #[test]
    fn special_values_are_spelled_out() {
        assert_eq!(format_float(f64::NAN), "nan");
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_float(-0.0), "0");
    }
}
