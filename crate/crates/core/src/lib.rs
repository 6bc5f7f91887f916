//! Numerical laboratory for Almgren-type frequency asymptotics of
//! Schrödinger operators with singular magnetic and electric potentials
//! of the form (−i∇ + A(θ)/|x|)² − a(θ)/|x|², perturbed by h(x) and a
//! nonlinearity g(x, |u|²)u.
//!
//! Pipeline: [`spectrum`] (angular eigenproblem on S²) → [`field`]
//! (Fourier-radial solutions) → [`frequency`] (H, D, N, ν₁, ν₂, γ) →
//! [`extraction`] (leading coefficients, blow-up traces) → [`quotients`]
//! (η envelopes, Pohozaev residual).

pub mod cli;
pub mod config;
pub mod error;
pub mod extraction;
pub mod field;
pub mod frequency;
pub mod harmonics;
pub mod io;
pub mod linalg;
pub mod perturbation;
pub mod potential;
pub mod quadrature;
pub mod quotients;
pub mod radial;
pub mod spectrum;
pub mod verify;

pub use error::{Error, Result};

pub type Complex64 = nalgebra::Complex<f64>;

/// Order-preserving map, parallel when the `parallel` feature is on.
/// Results are collected before any reduction so sums stay deterministic.
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
