//! Both unit-mass solutions of the critical NLS in the η = 7 well against a
//! radial shooting oracle.

mod common;

use common::*;
use critnls::functional::LevelCertificate;
use critnls::potentials::{sample_potential, PotentialSpec};
use critnls::solvers::{find_local_minimizer, find_mountain_pass, SolverConfig};
use critnls::{build_domain, GridKind};

#[test]
fn oracle_ground_state_is_frozen() {
    let s = critical_well().unit_mass(0.6, 0.75);
    assert!((s.mass - 1.0).abs() < 1e-9);
    assert!((s.lambda - GROUND_LAMBDA).abs() < 1e-7, "{}", s.lambda);
    assert!((energy_identity(&s, WELL_MU) - GROUND_ENERGY).abs() < 1e-5);
}

#[test]
fn oracle_saddle_is_frozen() {
    let s = critical_well().unit_mass(19.5, 28.4);
    assert!((s.lambda - SADDLE_LAMBDA).abs() < 1e-7, "{}", s.lambda);
    assert!((energy_identity(&s, WELL_MU) - SADDLE_ENERGY).abs() < 1e-4);
    // The direct quadrature agrees with the identity to its own accuracy.
    assert!((s.energy - SADDLE_ENERGY).abs() < 1e-3);
}

#[test]
fn solvers_match_the_oracle() {
    let d = build_domain(3, GridKind::RadialLogSpaced, 30.0, 4096).unwrap();
    let pot = sample_potential(&PotentialSpec::well(WELL_DEPTH, 1.0), &d).unwrap().decomposed(1.5, 0.1).unwrap();
    let cfg = SolverConfig::default();
    let min = find_local_minimizer(&pot, WELL_MU, &cfg).unwrap();
    assert!((min.lambda - GROUND_LAMBDA).abs() < 5e-5, "λ = {}", min.lambda);
    assert!((min.report.energy - GROUND_ENERGY).abs() < 5e-5, "E = {}", min.report.energy);
    let level = LevelCertificate::new(3, WELL_MU, cfg.annulus_eps, &pot.decomposition().unwrap().norms()).unwrap();
    let mp = find_mountain_pass(&pot, WELL_MU, &min, level.e_star, &cfg).unwrap();
    assert!((mp.bundle.lambda - SADDLE_LAMBDA).abs() < 5e-5, "λ = {}", mp.bundle.lambda);
    assert!((mp.bundle.report.energy - SADDLE_ENERGY).abs() < 2e-4, "E = {}", mp.bundle.report.energy);
    assert!(mp.distance_to_minimizer > 0.1);
}
