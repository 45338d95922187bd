//! Shell decomposition V = V₁ + V₂ for slowly decaying potentials, with the
//! L^{N/2} budget re-integrated from the analytic profile.

mod common;

use std::f64::consts::PI;

use critnls::potentials::{decompose_shells, sample_potential, PotentialSpec};
use critnls::{build_domain, GridKind};

/// `∫|V₁|^{3/2}` over the selected cells, from the closed-form V.
fn independent_budget(spec: &PotentialSpec, d: &critnls::Domain, v1: &[f64]) -> f64 {
    (0..v1.len())
        .filter(|&i| v1[i] != 0.0)
        .map(|i| {
            let (a, b) = d.cell_bounds(i).unwrap();
            common::gauss_legendre(|r| spec.eval(r).abs().powf(1.5) * 4.0 * PI * r * r, a, b, 4)
        })
        .sum()
}

#[test]
fn budget_and_vanishing_annuli() {
    let cases = [
        (PotentialSpec::lorentzian(-2.0, 1.0), 200.0, 2.0),
        (PotentialSpec::lorentzian(1.5, 0.5), 200.0, 2.0),
        (PotentialSpec::coulomb_cut(-1.0, 0.5), 2000.0, 4.0),
        (PotentialSpec::coulomb_cut(-1.0, 0.05), 2000.0, 4.0),
    ];
    let delta = 0.05;
    for (spec, r_max, exponent) in cases {
        let d = build_domain(3, GridKind::RadialLogSpaced, r_max, 4096).unwrap();
        let pot = sample_potential(&spec, &d).unwrap();
        let dec = decompose_shells(&pot, exponent, delta).unwrap();
        let cert = &dec.certificate;
        assert!(cert.passes && cert.achieved <= 3.0 * delta, "{spec:?}: {}", cert.achieved);
        let independent = independent_budget(&spec, &d, dec.v1.values());
        assert!(independent <= 3.0 * delta, "{spec:?}: {independent}");
        assert!((independent - cert.achieved).abs() <= 1e-3 * cert.achieved.max(1e-12), "{spec:?}: {independent} vs {}", cert.achieved);
        assert!(cert.sups_vanish(1e-3), "{spec:?}: {:?}", cert.annulus_sups);
        // A deep enough core forces cells into V₁ and empties the inner ball of V₂.
        if spec == PotentialSpec::coulomb_cut(-1.0, 0.05) {
            assert!(cert.achieved > 0.5 * delta && cert.annulus_sups[0] == 0.0, "{cert:?}");
        }
        for i in 0..d.len() {
            assert_eq!(dec.v1.values()[i] + dec.v2.values()[i], pot.v().values()[i]);
        }
    }
}

#[test]
fn tail_outside_the_exponent_is_rejected() {
    let d = build_domain(3, GridKind::RadialLogSpaced, 200.0, 1024).unwrap();
    let pot = sample_potential(&PotentialSpec::lorentzian(-2.0, 1.0), &d).unwrap();
    // |x|^{-2} is in L^r at infinity only for r > 3/2.
    assert!(decompose_shells(&pot, 1.5, 0.05).is_err());
}
