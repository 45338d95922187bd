//! Discrete energy against its own gradient and its own dilation slope.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use critnls::functional::{augmented_slope, energy, energy_report, l2_gradient};
use critnls::potentials::{sample_potential, PotentialSpec};
use critnls::{build_domain, Field, GridKind};

const MU: f64 = 0.05;

fn random_bumps(d: &std::sync::Arc<critnls::Domain>, rng: &mut ChaCha8Rng) -> Field {
    let bumps: Vec<(f64, f64, f64)> = (0..4).map(|_| (rng.gen_range(0.1..1.0), rng.gen_range(0.0..3.0), rng.gen_range(0.3..2.0))).collect();
    Field::from_radial(d, |r| bumps.iter().map(|(a, c, w)| a * (-((r - c) / w).powi(2)).exp()).sum()).unwrap()
}

#[test]
fn directional_derivatives_match_central_differences() {
    let d = build_domain(3, GridKind::RadialLogSpaced, 20.0, 2048).unwrap();
    let pot = sample_potential(&PotentialSpec::well(7.0, 1.0), &d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..20 {
        let u = random_bumps(&d, &mut rng).normalized().unwrap();
        let dir = random_bumps(&d, &mut rng).map(|x| x - 0.2);
        let g = l2_gradient(&u, &pot, MU).unwrap();
        let exact = g.inner(&dir).unwrap();
        let h = 1e-4;
        let e = |t: f64| energy(&u.axpy(t, &dir).unwrap(), &pot, MU).unwrap();
        let fd = (e(h) - e(-h)) / (2.0 * h);
        assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "field {k}: {fd} vs {exact}");
    }
}

/// Least-squares slope of `log₂ err` against `−log₂ n`.
fn fitted_order(n: &[f64], err: &[f64]) -> f64 {
    let x: Vec<f64> = n.iter().map(|v| v.log2()).collect();
    let y: Vec<f64> = err.iter().map(|v| -v.log2()).collect();
    let (mx, my) = (x.iter().sum::<f64>() / x.len() as f64, y.iter().sum::<f64>() / y.len() as f64);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn dilation_slope_converges_to_pohozaev() {
    let fields: [fn(f64) -> f64; 5] = [
        |r| (-(r / 0.5).powi(2)).exp(),
        |r| (-r * r).exp(),
        |r| (-(r / 2.0).powi(2)).exp(),
        |r| r * r * (-r * r).exp(),
        |r| (1.0 + r * r).powi(-4),
    ];
    let sizes = [512.0, 1024.0, 2048.0, 4096.0];
    for (k, f) in fields.iter().enumerate() {
        let err: Vec<f64> = sizes
            .iter()
            .map(|&n| {
                let d = build_domain(3, GridKind::RadialLogSpaced, 20.0, n as usize).unwrap();
                let pot = sample_potential(&PotentialSpec::lorentzian(-3.0, 1.0), &d).unwrap();
                let u = Field::from_radial(&d, f).unwrap().normalized().unwrap();
                (augmented_slope(&u, &pot, MU).unwrap() - energy_report(&u, &pot, MU).unwrap().pohozaev).abs()
            })
            .collect();
        assert!(err.windows(2).all(|w| w[1] < w[0]), "field {k}: {err:?}");
        let order = fitted_order(&sizes, &err);
        assert!(order >= 1.8, "field {k}: order {order}");
    }
}

#[test]
fn energy_report_is_self_consistent() {
    let d = build_domain(4, GridKind::RadialLogSpaced, 20.0, 2048).unwrap();
    let pot = sample_potential(&PotentialSpec::lorentzian(-2.0, 1.5), &d).unwrap();
    let u = Field::from_radial(&d, |r| (1.0 + r * r).powi(-3)).unwrap().normalized().unwrap();
    let rep = energy_report(&u, &pot, MU).unwrap();
    // N = 4: 2* = 4.
    assert!((rep.energy - (0.5 * rep.kinetic + 0.5 * rep.potential - MU / 4.0 * rep.critical)).abs() < 1e-12);
    assert!((rep.multiplier.unwrap() - (rep.kinetic + rep.potential - MU * rep.critical)).abs() < 1e-12);
    assert!((rep.mass - 1.0).abs() < 1e-12);
}
