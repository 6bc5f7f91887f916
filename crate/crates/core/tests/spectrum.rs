mod common;

use freqlab::potential::{AngularPotential, GaugeFunction};
use freqlab::spectrum::{check_positive_definiteness, indicial_pair, AngularModel};
use freqlab::Error;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{rngs::StdRng, RngExt, SeedableRng};

use common::{c, free_degree};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn indicial_roots_satisfy_vieta(mu in -0.25f64 + 1e-9..200.0, dim in 3usize..7) {
        let (sp, sm) = indicial_pair(mu, dim).unwrap();
        let scale = 1.0f64.max(mu.abs());
        prop_assert!((sp + sm + dim as f64 - 2.0).abs() <= 1e-12 * scale.sqrt().max(1.0));
        prop_assert!((sp * sm + mu).abs() <= 1e-12 * scale);
        prop_assert!(sp >= sm);
    }
}

#[test]
fn indicial_roots_reject_subcritical_mu() {
    assert!(matches!(indicial_pair(-0.25, 3), Err(Error::PositivityViolation { .. })));
    assert!(matches!(indicial_pair(-1.1, 4), Err(Error::PositivityViolation { .. })));
}

#[test]
fn free_spectrum_clusters_have_odd_multiplicities() {
    let l_cap = 8;
    let model = AngularModel::build(AngularPotential::zero(3), l_cap, 0, (l_cap - 1) * (l_cap - 1)).unwrap();
    let sizes: Vec<usize> = model.spectrum.clusters().iter().map(|r| r.len()).collect();
    let expected: Vec<usize> = (0..=l_cap - 2).map(|l| 2 * l + 1).collect();
    assert_eq!(sizes, expected);
    for (k, mu) in model.spectrum.eigenvalues.iter().enumerate() {
        let l = free_degree(k) as f64;
        assert!((mu - l * (l + 1.0)).abs() < 1e-10, "k={k}: {mu}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn constant_a_shifts_every_eigenvalue(shift in -0.2f64..3.0) {
        let base = AngularModel::build(AngularPotential::zero(3), 6, 0, 16).unwrap();
        let shifted = AngularModel::build(AngularPotential::constant_a(3, shift), 6, 0, 16).unwrap();
        for (a, b) in base.spectrum.eigenvalues.iter().zip(&shifted.spectrum.eigenvalues) {
            prop_assert!((b - (a - shift)).abs() < 1e-10);
        }
    }
}

#[test]
fn gauge_shift_preserves_the_spectrum() {
    let base = AngularModel::build(AngularPotential::rotation(3, 0.4), 12, 0, 16).unwrap();
    for id in 1..=3 {
        let gauged = AngularModel::build(AngularPotential::rotation(3, 0.4).with_gauge(GaugeFunction(id)), 12, 0, 16).unwrap();
        for (a, b) in base.spectrum.eigenvalues.iter().zip(&gauged.spectrum.eigenvalues) {
            assert!((a - b).abs() < 5e-7, "gauge {id}: {a} vs {b}");
        }
    }
}

#[test]
fn rayleigh_quotients_bound_the_first_eigenvalue() {
    let model = AngularModel::build(AngularPotential::rotation(3, 0.7).plus_constant_a(0.1), 8, 0, 16).unwrap();
    let mu1 = model.spectrum.eigenvalues[0];
    let n = model.forms.q.nrows();
    let mut rng = StdRng::seed_from_u64(42);
    for _ in 0..100 {
        let v = DVector::from_fn(n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let num = v.dotc(&(&model.forms.q * &v)).re;
        let den = v.dotc(&(&model.forms.m * &v)).re;
        assert!(num / den >= mu1 - 1e-12, "{} < {mu1}", num / den);
    }
}

#[test]
fn positivity_margin_tracks_the_hardy_constant() {
    for (a, ok) in [(0.2, true), (0.3, false)] {
        let model = AngularModel::build(AngularPotential::constant_a(3, a), 6, 0, 4).unwrap();
        let (pd, margin) = check_positive_definiteness(&model.spectrum, 3);
        assert_eq!(pd, ok);
        assert!((margin - (0.25 - a)).abs() < 1e-12);
        assert_eq!(model.roots().is_ok(), ok);
    }
}

#[test]
fn eigenvectors_are_mass_orthonormal() {
    let model = AngularModel::build(AngularPotential::rotation(3, 0.5), 8, 0, 16).unwrap();
    let v = &model.spectrum.eigenvectors;
    let gram = v.adjoint() * &model.forms.m * v;
    for i in 0..16 {
        for j in 0..16 {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((gram[(i, j)] - c(target, 0.0)).norm() < 1e-11);
        }
    }
}
