//! Two ergodic MFG solutions from the two NLS solutions in the η = 7 well.

use critnls::mfg::{hjb_pointwise, hopf_cole_backward, kolmogorov_pointwise, kolmogorov_pointwise_centered, mfg_residuals, two_solution_pipeline};
use critnls::potentials::{sample_potential, PotentialSpec};
use critnls::solvers::SolverConfig;
use critnls::{build_domain, GridKind};

#[test]
fn two_distinct_solutions_at_small_alpha() {
    let d = build_domain(3, GridKind::RadialLogSpaced, 30.0, 4096).unwrap();
    let pot = sample_potential(&PotentialSpec::well(7.0, 1.0), &d).unwrap().decomposed(1.5, 0.1).unwrap();
    let out = two_solution_pipeline(&pot, 0.1, 0.2, &SolverConfig::default()).unwrap();
    assert!(out.gate.passes && out.distinct && out.separation > 1e-3);
    assert!(out.level.ordered());
    for (sol, nls) in [(&out.first, &out.minimizer), (&out.second, &out.saddle.bundle)] {
        assert_eq!(sol.lambda, 2.0 * nls.lambda);
        assert_eq!(sol.alpha, 0.1);
        let r = sol.residuals;
        assert!(r.mass_error <= 1e-10, "{r:?}");
        assert!(r.hjb <= 1e-5 && r.kolmogorov <= 1e-8, "{r:?}");
        assert_eq!(mfg_residuals(sol, &pot).unwrap(), r);
        assert!(sol.m.values().iter().all(|&m| m >= 0.0));
        // Back to the NLS field exactly up to rounding in the square root.
        assert!(hopf_cole_backward(sol).unwrap().distance(&nls.u).unwrap() < 1e-12);
        let h = hjb_pointwise(sol, &pot).unwrap();
        assert_eq!(h.iter().filter(|x| x.is_none()).count(), sol.u.iter().filter(|x| x.is_none()).count());
    }
    // The concentrated saddle has the more negative ergodic constant.
    assert!(out.second.lambda < out.first.lambda);
}

#[test]
fn fitted_flux_beats_the_centered_flux() {
    let d = build_domain(3, GridKind::RadialLogSpaced, 30.0, 4096).unwrap();
    let pot = sample_potential(&PotentialSpec::well(7.0, 1.0), &d).unwrap().decomposed(1.5, 0.1).unwrap();
    let out = two_solution_pipeline(&pot, 0.1, 0.2, &SolverConfig::default()).unwrap();
    let l2 = |r: &[f64]| d.norm_sq(r).sqrt();
    let fitted = l2(&kolmogorov_pointwise(&out.first));
    let centered = l2(&kolmogorov_pointwise_centered(&out.first));
    assert!(fitted < 1e-6 && centered > 10.0 * fitted, "{fitted} vs {centered}");
}
