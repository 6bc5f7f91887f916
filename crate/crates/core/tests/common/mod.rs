#![allow(dead_code)]

use std::sync::Arc;

use freqlab::potential::AngularPotential;
use freqlab::radial::RadialGrid;
use freqlab::spectrum::AngularModel;
use freqlab::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn free_model(degree: usize, modes: usize) -> Arc<AngularModel> {
    Arc::new(AngularModel::build(AngularPotential::zero(3), degree, 0, modes).unwrap())
}

pub fn grid(nodes: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::new(1.0, 1e-4, nodes).unwrap())
}

/// σ⁺ for the free Laplacian on S² in degree l, N = 3.
pub fn free_sigma(l: usize) -> f64 {
    l as f64
}

/// Degree l of the k-th free eigenvalue (ordered by l, multiplicity 2l+1).
pub fn free_degree(k: usize) -> usize {
    let mut l = 0;
    while (l + 1) * (l + 1) <= k {
        l += 1;
    }
    l
}
