mod common;

use freqlab::extraction::{
    blowup_trace, extract_beta, extract_beta_on, geometric_annuli, halving_sequence, identify_eigenspace,
    pointwise_bound, r_independence,
};
use freqlab::field::{solve_perturbed, solve_picard, synthesize_model_solution};
use freqlab::frequency::{estimate_gamma, log_radii, FrequencyContext};
use freqlab::perturbation::{NoNonlinearity, PerturbationSpec, PowerNonlinearity};
use freqlab::Complex64;
use proptest::prelude::*;

use common::{c, free_model, grid};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn planted_coefficients_are_recovered(
        re in prop::collection::vec(-1.0f64..1.0, 5),
        im in prop::collection::vec(-1.0f64..1.0, 5),
        r in 0.05f64..1.0,
    ) {
        // Degree-2 eigenspace is k = 4..9; σ⁺ = 2.
        let model = free_model(8, 16);
        let planted: Vec<Complex64> = re.iter().zip(&im).map(|(a, b)| c(*a, *b)).collect();
        prop_assume!(planted.iter().any(|v| v.norm() > 1e-3));
        let mut b = vec![c(0.0, 0.0); 9];
        b[4..9].copy_from_slice(&planted);
        let f = solve_perturbed(model, &PerturbationSpec::zero(), &b, grid(40)).unwrap();
        let term = extract_beta(&f, &PerturbationSpec::zero(), &NoNonlinearity, 2.0004, r).unwrap();
        prop_assert_eq!(term.eigenspace.clone(), 4..9);
        prop_assert!((term.gamma - 2.0).abs() < 1e-12);
        for (x, y) in term.betas.iter().zip(&planted) {
            prop_assert!((x - y).norm() <= 1e-9);
        }
    }
}

#[test]
fn eigenspace_is_the_nearest_cluster() {
    let model = free_model(8, 16);
    let f = synthesize_model_solution(model, 2, c(1.0, 0.0), grid(32)).unwrap();
    assert_eq!(identify_eigenspace(&f, 1.1).unwrap(), (1, 1..4));
    assert_eq!(identify_eigenspace(&f, 2.7).unwrap(), (9, 9..16));
    assert_eq!(identify_eigenspace(&f, -0.3).unwrap(), (0, 0..1));
}

#[test]
fn coefficients_are_independent_of_the_radius() {
    let model = free_model(8, 16);
    let h = PerturbationSpec::inverse_square_eps(0.2, 0.5);
    let f = solve_perturbed(model.clone(), &h, &[c(0.0, 0.0), c(0.6, 0.2), c(0.0, -0.8), c(0.0, 0.0), c(0.4, 0.0)], grid(64)).unwrap();
    let (terms, worst) = r_independence(&f, &h, &NoNonlinearity, 1.0003, &[1.0, 0.7, 0.5]).unwrap();
    assert!(worst <= 1e-4, "{worst}");
    assert!(terms[0].max_beta() > 0.0);
    let zonal = h.with_zonal(-0.4);
    let g = PowerNonlinearity { p: 1.0, coupling: 2.0 };
    let f = solve_picard(model.clone(), &zonal, &g, &[c(1e-2, 0.0), c(0.0, 0.0), c(0.0, 5e-3)], grid(64), 1.0, 30, 1e-12).unwrap();
    let (_, worst) = r_independence(&f, &zonal, &g, 0.0, &[1.0, 0.7, 0.5]).unwrap();
    assert!(worst <= 1e-4, "{worst}");
    // Boundary data in degree 1 alone still excites a constant degree-0 part
    // through the coupling, so the vanishing order is 0 and degree-1
    // extraction sees a nonintegrable source.
    let f = solve_picard(model, &zonal, &g, &[c(0.0, 0.0), c(0.0, 0.0), c(1e-2, 0.0)], grid(64), 1.0, 30, 1e-12).unwrap();
    assert!(matches!(
        r_independence(&f, &zonal, &g, 1.0, &[1.0, 0.7, 0.5]),
        Err(freqlab::Error::NonintegrableForcing(_))
    ));
}

#[test]
fn blowup_limit_is_consistent_with_the_frequency() {
    let model = free_model(8, 16);
    let h = PerturbationSpec::inverse_square_eps(0.1, 0.5);
    let f = solve_perturbed(model, &h, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 1.0)], grid(64)).unwrap();
    let ctx = FrequencyContext::new(&f, &h, &NoNonlinearity).unwrap();
    let profile = ctx.profile(&log_radii(1.0, 2e-3, 0.5, 25)).unwrap();
    let (gamma, _) = estimate_gamma(&profile).unwrap();
    let term = extract_beta(&f, &h, &NoNonlinearity, gamma, 1.0).unwrap();
    assert!((term.gamma - gamma).abs() <= 1e-3);
    let report = blowup_trace(&f, &halving_sequence(0.5, 13), &term).unwrap();
    assert!(report.e0_monotone && report.e1_monotone);
    let scale = term.max_beta();
    assert!(report.e0.last().unwrap() / scale <= 1e-3);
    assert!(report.e0_limit / scale <= 1e-3);
    assert!(halving_sequence(0.5, 14).last().unwrap() < &f.grid.a().exp());
    assert!(blowup_trace(&f, &halving_sequence(0.5, 14), &term).is_err());
}

#[test]
fn planted_eigenspace_reproduces_the_trace() {
    let model = free_model(8, 16);
    let f = synthesize_model_solution(model, 1, c(0.5, -0.5), grid(32)).unwrap();
    let term = extract_beta_on(&f, &PerturbationSpec::zero(), &NoNonlinearity, 1, 1..4, 0.8).unwrap();
    let report = blowup_trace(&f, &halving_sequence(0.4, 6), &term).unwrap();
    assert!(report.e0.iter().all(|e| *e < 1e-12));
    assert!(report.e1.iter().all(|e| *e < 1e-10));
}

#[test]
fn pointwise_bound_is_uniform_on_annuli() {
    let model = free_model(8, 16);
    let h = PerturbationSpec::inverse_square_eps(0.1, 0.5);
    let f = solve_perturbed(model, &h, &[c(0.0, 0.0), c(1.0, 0.0)], grid(48)).unwrap();
    let bound = pointwise_bound(&f, 1.0, &geometric_annuli(1.0, 0.5, 10)).unwrap();
    assert!(bound.uniform);
    assert!(bound.c.is_finite() && bound.c > 0.0);
    assert!(bound.annulus_max.iter().all(|m| *m <= bound.c));
}
