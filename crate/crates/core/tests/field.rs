mod common;

use std::sync::Arc;

use freqlab::field::{equation_residual, solve_perturbed, solve_picard};
use freqlab::frequency::{height_h, FrequencyContext};
use freqlab::perturbation::{NoNonlinearity, PerturbationSpec, PowerNonlinearity};
use freqlab::potential::{AngularPotential, GaugeFunction};
use freqlab::spectrum::AngularModel;
use freqlab::Complex64;
use proptest::prelude::*;

use common::{c, free_model, grid};

fn sample_points() -> Vec<[f64; 3]> {
    let dirs = [[0.36, 0.48, 0.8], [-0.6, 0.0, 0.8], [0.0, -1.0, 0.0], [0.48, -0.6, -0.64]];
    let mut out = vec![];
    for r in [2e-3, 0.05, 0.4, 0.9] {
        for d in dirs {
            out.push([r * d[0], r * d[1], r * d[2]]);
        }
    }
    out
}

#[test]
fn parseval_holds_at_every_radius() {
    let model = free_model(8, 16);
    let h = PerturbationSpec::inverse_square_eps(0.1, 0.5);
    let f = solve_perturbed(model, &h, &[c(0.5, 0.0), c(1.0, -0.2), c(0.0, 0.0), c(0.0, 0.3)], grid(48)).unwrap();
    for r in freqlab::frequency::log_radii(1.0, 2e-4, 1.0, 30) {
        assert!(f.parseval_defect(r) < 1e-8, "r={r}: {}", f.parseval_defect(r));
    }
}

#[test]
fn produced_fields_satisfy_the_equation() {
    let model = free_model(8, 16);
    let h = PerturbationSpec::inverse_square_eps(0.1, 0.5);
    let lin = solve_perturbed(model.clone(), &h, &[c(0.0, 0.0), c(1.0, 0.0)], grid(64)).unwrap();
    assert!(equation_residual(&lin, &h, None) <= 1e-6);
    let zonal = h.with_zonal(0.5);
    let g = PowerNonlinearity { p: 1.0, coupling: 1.0 };
    let nl = solve_picard(model, &zonal, &g, &[c(1e-2, 0.0)], grid(64), 1.0, 30, 1e-10).unwrap();
    assert!(nl.log.residual <= 1e-6);
    assert!(equation_residual(&nl, &zonal, Some(&g)) <= 1e-6);
}

#[test]
fn mode_truncation_does_not_change_the_height() {
    let h = PerturbationSpec::inverse_square_eps(0.2, 0.7);
    let b = [c(0.3, 0.0), c(0.0, 1.0), c(0.5, 0.0), c(0.0, 0.0), c(0.1, 0.1)];
    let small = solve_perturbed(free_model(8, 9), &h, &b, grid(48)).unwrap();
    let large = solve_perturbed(free_model(8, 16), &h, &b, grid(48)).unwrap();
    for r in [1e-3, 0.02, 0.3, 0.8] {
        let (a, bb) = (height_h(&small, r).unwrap(), height_h(&large, r).unwrap());
        assert!((a - bb).abs() <= 1e-8 * bb, "r={r}: {a} vs {bb}");
    }
}

#[test]
fn gauge_shift_multiplies_the_solution_by_a_phase() {
    let degree = 12;
    let h = PerturbationSpec::inverse_square_eps(0.1, 0.5);
    let base_pot = AngularPotential::rotation(3, 0.3);
    let gauge = GaugeFunction(3);
    let model = Arc::new(AngularModel::build(base_pot.clone(), degree, 0, 16).unwrap());
    let gauged = Arc::new(AngularModel::build(base_pot.with_gauge(gauge), degree, 0, 16).unwrap());
    let b = [c(0.2, 0.0), c(1.0, 0.0), c(0.0, 0.5), c(-0.3, 0.0)];
    let u = solve_perturbed(model.clone(), &h, &b, grid(48)).unwrap();
    // Boundary data of e^{-iφ}u in the gauged eigenbasis.
    let trace = u.surface(1.0);
    let rotated: Vec<Complex64> = trace
        .u
        .iter()
        .zip(&gauged.quad.nodes)
        .map(|(v, node)| v * Complex64::from_polar(1.0, -gauge.value(&node.point)))
        .collect();
    let bg = gauged.project(&rotated);
    let ug = solve_perturbed(gauged, &h, &bg, grid(48)).unwrap();
    for x in sample_points() {
        let (a, b) = (u.eval(&x).unwrap(), ug.eval(&x).unwrap());
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let phase = Complex64::from_polar(1.0, -gauge.value(&[x[0] / r, x[1] / r, x[2] / r]));
        assert!((a.norm() - b.norm()).abs() <= 5e-7 * a.norm().max(1e-300), "{x:?}: {a} {b}");
        assert!((a * phase - b).norm() <= 5e-7 * a.norm(), "{x:?}: {a} {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn frequency_is_phase_and_scale_invariant(theta in 0.0f64..6.28, scale in 0.1f64..10.0) {
        let model = free_model(6, 9);
        let h = PerturbationSpec::inverse_square_eps(0.1, 0.5);
        let f = solve_perturbed(model, &h, &[c(0.4, 0.0), c(0.0, 1.0), c(0.5, 0.0)], grid(40)).unwrap();
        let g = f.scaled(Complex64::from_polar(scale, theta));
        let a = FrequencyContext::new(&f, &h, &NoNonlinearity).unwrap();
        let b = FrequencyContext::new(&g, &h, &NoNonlinearity).unwrap();
        for r in [1e-3, 0.05, 0.5] {
            let (ha, hb) = (a.height(r).unwrap(), b.height(r).unwrap());
            prop_assert!((hb - scale * scale * ha).abs() <= 1e-12 * hb);
            let (na, nb) = (a.frequency(r).unwrap(), b.frequency(r).unwrap());
            prop_assert!((na - nb).abs() <= 1e-10 * (1.0 + na.abs()));
        }
    }
}
