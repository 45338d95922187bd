//! Norm asymptotics of cut-off bubbles and the upper-bound sweep for the
//! mountain-pass level.

use critnls::bubbles::{aubin_talenti_field, bubble_norm_report, default_t_grid, mp_upper_bound_sweep, tilde_combination, BubbleParams, DEFAULT_CUTOFF, DEFAULT_EPS_FACTORS};
use critnls::functional::{energy, level_threshold};
use critnls::potentials::{sample_potential, PotentialSpec};
use critnls::solvers::{find_local_minimizer, SolverConfig};
use critnls::{build_domain, Field, GridKind};

fn default_eps() -> Vec<f64> {
    DEFAULT_EPS_FACTORS.iter().map(|f| f * DEFAULT_CUTOFF).collect()
}

#[test]
fn slopes_match_leading_orders_in_every_dimension() {
    for dim in 3..=5 {
        let d = build_domain(dim, GridKind::RadialLogSpaced, 4.0, 4096).unwrap();
        let u = Field::from_radial(&d, |r| (-r * r).exp()).unwrap().normalized().unwrap();
        let rep = bubble_norm_report(&default_eps(), DEFAULT_CUTOFF, &d, &[2.0], Some(&u), 5).unwrap();
        assert!(rep.passes(), "N={dim}: {:?}", rep.fits);
        let names: Vec<&str> = rep.fits.iter().map(|f| f.quantity.as_str()).collect();
        assert!(names.contains(&"gradient-deficit") && names.contains(&"critical-deficit") && names.contains(&"interaction"));
        let x: Vec<f64> = rep.measurements[rep.measurements.len() - rep.fit_window..].iter().map(|m| m.eps).collect();
        assert!(x.len() >= 4 && x[0] / x[x.len() - 1] >= 10.0, "fit window spans less than a decade");
        match dim {
            4 => assert!(rep.log_model_residual.unwrap() < rep.pure_model_residual.unwrap()),
            _ => assert!(names.contains(&"mass")),
        }
        assert!(rep.measurements.iter().all(|m| m.gradient > 0.0 && m.critical > 0.0 && m.mass > 0.0));
    }
}

#[test]
fn interaction_with_the_minimizer() {
    let d = build_domain(3, GridKind::RadialLogSpaced, 30.0, 4096).unwrap();
    let pot = sample_potential(&PotentialSpec::well(7.0, 1.0), &d).unwrap();
    let b = find_local_minimizer(&pot, 0.05, &SolverConfig::default()).unwrap();
    let rep = bubble_norm_report(&default_eps(), DEFAULT_CUTOFF, &d, &[], Some(&b.u), 5).unwrap();
    let fit = rep.fits.iter().find(|f| f.quantity == "interaction").unwrap();
    assert!((fit.slope - 0.5).abs() <= 0.1, "{fit:?}");
}

#[test]
fn sweep_stays_below_the_threshold_at_small_scales() {
    let mu = 0.05;
    let d = build_domain(3, GridKind::RadialLogSpaced, 30.0, 4096).unwrap();
    let pot = sample_potential(&PotentialSpec::well(7.0, 1.0), &d).unwrap();
    let b = find_local_minimizer(&pot, mu, &SolverConfig::default()).unwrap();
    let m = b.report.energy;
    let t_grid = default_t_grid(3, mu, 121);
    let (cert, surface) = mp_upper_bound_sweep(&b.u, m, &pot, mu, &default_eps(), &t_grid, DEFAULT_CUTOFF).unwrap();
    assert!(cert.passes, "{cert:?}");
    assert_eq!(cert.threshold, level_threshold(3, mu, m).unwrap());
    let smallest = &cert.rows[cert.rows.len() - 2..];
    assert!(smallest.iter().all(|r| r.interior && r.max_energy < cert.threshold));
    // M(ε) decreasing in ε at the small end.
    assert!(smallest[1].max_energy > smallest[0].max_energy);
    // t = 0 carries no bubble: the minimizer's own energy.
    assert_eq!(surface.len(), t_grid.len() * cert.rows.len());
    for row in surface.iter().filter(|p| p[0] == 0.0) {
        assert!((row[2] - m).abs() < 1e-12);
    }
    // Large t: the combination concentrates and the energy goes negative.
    assert!(surface.iter().filter(|p| p[0] == *t_grid.last().unwrap()).all(|p| p[2] < 0.0));
}

#[test]
fn combinations_have_unit_mass() {
    let d = build_domain(3, GridKind::RadialLogSpaced, 30.0, 4096).unwrap();
    let pot = sample_potential(&PotentialSpec::well(7.0, 1.0), &d).unwrap();
    let u = Field::from_radial(&d, |r| (-r).exp()).unwrap().normalized().unwrap();
    for eps in [0.2, 0.02] {
        let bubble = aubin_talenti_field(&BubbleParams { eps, cutoff: Some(DEFAULT_CUTOFF) }, &d).unwrap();
        for t in [0.0, 0.5, 3.0, 10.0] {
            let w = tilde_combination(&u, &bubble, t).unwrap();
            assert!((w.l2_norm_sq() - 1.0).abs() < 1e-10);
            assert!(energy(&w, &pot, 0.05).unwrap().is_finite());
        }
    }
}
