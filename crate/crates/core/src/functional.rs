//! The energy on the unit L²-sphere,
//!
//! ```text
//! E_μ(u) = ½∫|∇u|² + ½∫V u² − (μ/2*)∫|u|^{2*},
//! ```
//!
//! its constrained gradient, the multiplier and Pohozaev quantities, the
//! dilation-augmented energy, and the closed-form level constants built from
//! the best Sobolev constant S.

use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::domain::{dilate, index_shift, Domain, DomainSpec, Field, GridKind};
use crate::error::{Error, Result};
use crate::potentials::{DecompositionNorms, SampledPotential};

/// Mass tolerance under which the multiplier formula is trusted.
pub const MASS_TOLERANCE: f64 = 1e-6;

pub fn critical_exponent(dim: usize) -> f64 {
    2.0 * dim as f64 / (dim as f64 - 2.0)
}

/// Every scalar functional of a field, from one set of quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `∫|∇u|²`
    pub kinetic: f64,
    /// `∫V u²`
    pub potential: f64,
    /// `∫|u|^{2*}`
    pub critical: f64,
    /// `∫V u ∇u·x`
    pub virial: f64,
    pub energy: f64,
    /// `kinetic + potential − μ critical`; absent off the sphere.
    pub multiplier: Option<f64>,
    pub pohozaev: f64,
    /// `‖u‖₂²`
    pub mass: f64,
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("μ must be positive, got {mu}")))
    }
}

fn potential_term(d: &Domain, v: &[f64], u: &[f64]) -> f64 {
    d.weights().iter().zip(v.iter().zip(u)).map(|(w, (v, u))| w * v * u * u).sum()
}

fn critical_term(d: &Domain, u: &[f64], p: f64) -> f64 {
    d.weights().iter().zip(u).map(|(w, u)| w * u.abs().powf(p)).sum()
}

/// `E_μ(u)` without the rest of the report.
pub fn energy(u: &Field, pot: &SampledPotential, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    u.check_same(pot.v())?;
    Ok(energy_values(u.domain(), pot.v().values(), u.values(), mu))
}

pub(crate) fn energy_values(d: &Domain, v: &[f64], u: &[f64], mu: f64) -> f64 {
    let p = critical_exponent(d.dim());
    0.5 * d.kinetic(u) + 0.5 * potential_term(d, v, u) - mu / p * critical_term(d, u, p)
}

pub fn energy_report(u: &Field, pot: &SampledPotential, mu: f64) -> Result<EnergyReport> {
    check_mu(mu)?;
    u.check_same(pot.v())?;
    let d = u.domain();
    let uv = u.values();
    let v = pot.v().values();
    let dim = d.dim() as f64;
    let p = critical_exponent(d.dim());
    let kinetic = d.kinetic(uv);
    let potential = potential_term(d, v, uv);
    let critical = critical_term(d, uv, p);
    let xgrad = d.radial_derivative(uv);
    let virial: f64 = (0..uv.len()).map(|i| d.weights()[i] * v[i] * uv[i] * xgrad[i]).sum();
    let mass = d.norm_sq(uv);
    let multiplier = ((mass.sqrt() - 1.0).abs() < MASS_TOLERANCE).then(|| kinetic + potential - mu * critical);
    Ok(EnergyReport {
        kinetic,
        potential,
        critical,
        virial,
        energy: 0.5 * kinetic + 0.5 * potential - mu / p * critical,
        multiplier,
        pohozaev: kinetic - mu * critical + 0.5 * dim * potential + virial,
        mass,
    })
}

/// Unconstrained L² gradient `−Δu + Vu − μ|u|^{2*−2}u`.
pub fn l2_gradient(u: &Field, pot: &SampledPotential, mu: f64) -> Result<Field> {
    check_mu(mu)?;
    u.check_same(pot.v())?;
    Ok(Field::from_parts(u.domain(), gradient_values(u.domain(), pot.v().values(), u.values(), mu)))
}

pub(crate) fn gradient_values(d: &Domain, v: &[f64], u: &[f64], mu: f64) -> Vec<f64> {
    let p = critical_exponent(d.dim());
    let mut g = d.neg_laplacian(u);
    for i in 0..u.len() {
        g[i] += v[i] * u[i] - mu * u[i].abs().powf(p - 2.0) * u[i];
    }
    g
}

/// Gradient of `E_μ` along the sphere: the L² gradient minus its component
/// along `u`.
pub fn tangential_gradient(u: &Field, pot: &SampledPotential, mu: f64) -> Result<Field> {
    let g = l2_gradient(u, pot, mu)?;
    let uu = u.l2_norm_sq();
    if !(uu > 1e-300) {
        return Err(Error::InvalidArgument("field has (near) zero mass".into()));
    }
    let coef = g.inner(u)? / uu;
    g.axpy(-coef, u)
}

/// `Ẽ_μ(u, s) = E_μ(e^{Ns/2} u(e^s x))`.
pub fn augmented_energy(u: &Field, s: f64, pot: &SampledPotential, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    if !s.is_finite() || s.abs() > 50.0 {
        return Err(Error::InvalidArgument(format!("dilation exponent {s} out of range")));
    }
    energy(&dilate(u, s.exp())?, pot, mu)
}

/// `∂_s Ẽ_μ(u, 0)` by a five-point stencil.  On log grids the stencil uses
/// exact index shifts (`s = ±ln q, ±2 ln q`).
pub fn augmented_slope(u: &Field, pot: &SampledPotential, mu: f64) -> Result<f64> {
    let step = match u.domain().ratio() {
        Some(q) => q.ln(),
        None => 1e-3,
    };
    let e = |k: f64| augmented_energy(u, k * step, pot, mu);
    Ok((e(-2.0)? - 8.0 * e(-1.0)? + 8.0 * e(1.0)? - e(2.0)?) / (12.0 * step))
}

// ---- Sobolev constant ---------------------------------------------------

/// `πN(N−2)(Γ(N/2)/Γ(N))^{2/N}`.
pub fn sobolev_closed_form(dim: usize) -> f64 {
    let n = dim as f64;
    std::f64::consts::PI * n * (n - 2.0) * (gamma(n / 2.0) / gamma(n)).powf(2.0 / n)
}

/// Aubin-Talenti profile of scale `eps`, normalized so that
/// `−ΔU = U^{2*−1}` and `‖∇U‖² = ‖U‖_{2*}^{2*} = S^{N/2}`.
pub fn bubble_profile(dim: usize, eps: f64, r: f64) -> f64 {
    let n = dim as f64;
    (n * (n - 2.0) * eps * eps).powf((n - 2.0) / 4.0) / (eps * eps + r * r).powf((n - 2.0) / 2.0)
}

/// Discrete Rayleigh quotient `‖∇U‖² / ‖U‖_{2*}²` of the uncut bubble on a
/// wide log grid.
pub fn bubble_rayleigh_quotient(dim: usize, n: usize) -> Result<f64> {
    let spec = DomainSpec::new(dim, GridKind::RadialLogSpaced, 1e12, n).with_r_min(1e-8);
    let d = Domain::new(spec)?;
    let u = Field::from_radial(&d, |r| bubble_profile(dim, 1.0, r))?;
    let p = critical_exponent(dim);
    let crit = critical_term(&d, u.values(), p);
    Ok(u.grad_norm_sq() / crit.powf(2.0 / p))
}

/// Best Sobolev constant from the bubble Rayleigh quotient, Richardson
/// extrapolated over three grids.  Cached per dimension.
pub fn sobolev_constant(dim: usize) -> Result<f64> {
    static CACHE: [OnceLock<f64>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    if !(3..=5).contains(&dim) {
        return Err(Error::InvalidArgument(format!("dimension {dim} not in 3..=5")));
    }
    if let Some(v) = CACHE[dim - 3].get() {
        return Ok(*v);
    }
    let q: Vec<f64> = [4096, 8192, 16384]
        .iter()
        .map(|&n| bubble_rayleigh_quotient(dim, n))
        .collect::<Result<_>>()?;
    let r1 = (4.0 * q[1] - q[0]) / 3.0;
    let r2 = (4.0 * q[2] - q[1]) / 3.0;
    let s = (16.0 * r2 - r1) / 15.0;
    Ok(*CACHE[dim - 3].get_or_init(|| s))
}

// ---- level constants ----------------------------------------------------

/// `R̄ = S^{N/4} μ^{1/2 − N/4}`.
pub fn ball_radius(dim: usize, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    let n = dim as f64;
    Ok(sobolev_constant(dim)?.powf(n / 4.0) * mu.powf(0.5 - n / 4.0))
}

/// Strict upper bound `2S^{N/2} / (N(S^{N/2−1} + 1))` for the constant C₀.
pub fn admissible_c0_bound(dim: usize) -> Result<f64> {
    let n = dim as f64;
    let s = sobolev_constant(dim)?;
    Ok(2.0 * s.powf(n / 2.0) / (n * (s.powf(n / 2.0 - 1.0) + 1.0)))
}

/// An admissible C₀: half of the strict bound.
pub fn admissible_c0(dim: usize) -> Result<f64> {
    Ok(0.5 * admissible_c0_bound(dim)?)
}

/// `m_μ + (1/N) S^{N/2} μ^{1−N/2}`.
pub fn level_threshold(dim: usize, mu: f64, m_mu: f64) -> Result<f64> {
    check_mu(mu)?;
    let n = dim as f64;
    Ok(m_mu + sobolev_constant(dim)?.powf(n / 2.0) * mu.powf(1.0 - n / 2.0) / n)
}

/// Smallness constants for the ground-state comparison, made concrete by
/// fixing both free margins to 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallnessConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

pub fn smallness_constants(dim: usize) -> Result<SmallnessConstants> {
    let n = dim as f64;
    let s = sobolev_constant(dim)?;
    let (a, b) = (n / 4.0, (n - 2.0) / 2.0);
    let margin = 0.5;
    // 1 − A S⁻¹ C₁ − B S^{−1/2} C₁ = margin.
    let c1 = (1.0 - margin) / (a / s + b / s.sqrt());
    // With δ₁ = margin, both branches of 2/δ₁ max{A v, B w x} stay below R̄²
    // when v ≤ C₂ μ^{1−N/2} and w ≤ C₂ μ^{1/2−N/4}; keep half of the room.
    let c2 = 0.5 * f64::min(margin * s.powf(n / 2.0) / (2.0 * a), margin * s.powf(n / 4.0) / (2.0 * b));
    Ok(SmallnessConstants { c0: admissible_c0(dim)?, c1, c2 })
}

// ---- mass rescaling -------------------------------------------------------

/// `(U, ρ) ↦ (u, μ) = (U/ρ, ρ^{2*−2})`.
pub fn mass_rescale(big_u: &Field, rho: f64) -> Result<(Field, f64)> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!("ρ must be positive, got {rho}")));
    }
    let p = critical_exponent(big_u.domain().dim());
    Ok((big_u.scaled(1.0 / rho), rho.powf(p - 2.0)))
}

/// Inverse of [`mass_rescale`]: `(u, μ) ↦ (ρu, ρ)`.
pub fn mass_unscale(u: &Field, mu: f64) -> Result<(Field, f64)> {
    check_mu(mu)?;
    let p = critical_exponent(u.domain().dim());
    let rho = mu.powf(1.0 / (p - 2.0));
    Ok((u.scaled(rho), rho))
}

pub fn rho_to_mu(dim: usize, rho: f64) -> f64 {
    rho.powf(critical_exponent(dim) - 2.0)
}

// ---- level certificate ------------------------------------------------------

/// Positive lower bound `δ μ^{1−N/2}` for the energy on the gradient annulus
/// `(1−ε)R̄² ≤ ‖∇u‖² ≤ R̄²`, with
/// `δ = (1/N − ε/2)S^{N/2} − ½S^{N/2−1}‖V₁⁻‖_{N/2} − ½μ^{N/2−1}‖V₂⁻‖_∞`.
/// Returns `(δ, δ μ^{1−N/2})`; the bound is only meaningful when δ > 0.
pub fn annulus_lower_bound(dim: usize, mu: f64, eps: f64, v1_minus: f64, v2_minus_sup: f64) -> Result<(f64, f64)> {
    check_mu(mu)?;
    let n = dim as f64;
    let s = sobolev_constant(dim)?;
    let delta = (1.0 / n - eps / 2.0) * s.powf(n / 2.0)
        - 0.5 * s.powf(n / 2.0 - 1.0) * v1_minus
        - 0.5 * mu.powf(n / 2.0 - 1.0) * v2_minus_sup;
    Ok((delta, delta * mu.powf(1.0 - n / 2.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCertificate {
    pub sobolev: f64,
    pub ball_radius: f64,
    pub annulus_fraction: f64,
    /// `δ` of the annulus bound.
    pub annulus_margin: f64,
    /// Analytic lower bound for E* (the certified value).
    pub e_star: f64,
    /// Smallest sampled energy on the annulus (sanity check only).
    pub e_star_sampled: Option<f64>,
    pub c0_bound: f64,
    /// `max{‖V₁⁻‖_{N/2}, μ^{(N−2)/2}‖V₂⁻‖_∞}`, to compare with C₀.
    pub c0_quantity: f64,
    pub m_mu: Option<f64>,
    pub c_mu: Option<f64>,
    pub threshold: Option<f64>,
}

impl LevelCertificate {
    pub fn new(dim: usize, mu: f64, eps: f64, norms: &DecompositionNorms) -> Result<Self> {
        let n = dim as f64;
        let (margin, e_star) = annulus_lower_bound(dim, mu, eps, norms.v1_minus_half_dim, norms.v2_minus_sup)?;
        Ok(Self {
            sobolev: sobolev_constant(dim)?,
            ball_radius: ball_radius(dim, mu)?,
            annulus_fraction: eps,
            annulus_margin: margin,
            e_star,
            e_star_sampled: None,
            c0_bound: admissible_c0_bound(dim)?,
            c0_quantity: norms.v1_minus_half_dim.max(mu.powf(n / 2.0 - 1.0) * norms.v2_minus_sup),
            m_mu: None,
            c_mu: None,
            threshold: None,
        })
    }

    pub fn with_minimum(mut self, dim: usize, mu: f64, m_mu: f64) -> Result<Self> {
        self.m_mu = Some(m_mu);
        self.threshold = Some(level_threshold(dim, mu, m_mu)?);
        Ok(self)
    }

    pub fn with_saddle(mut self, c_mu: f64) -> Self {
        self.c_mu = Some(c_mu);
        self
    }

    /// `m_μ < 0 < E* ≤ c_μ < threshold` on whatever levels are present.
    pub fn ordered(&self) -> bool {
        let mut ok = self.e_star > 0.0;
        if let Some(m) = self.m_mu {
            ok &= m < 0.0;
        }
        if let Some(c) = self.c_mu {
            ok &= self.e_star <= c;
            if let Some(t) = self.threshold {
                ok &= c < t;
            }
        }
        ok
    }
}

/// Smallest energy over random unit-mass fields dilated onto the annulus
/// `(1−ε)R̄² ≤ ‖∇u‖² ≤ R̄²`.  Sanity check for the analytic E* bound.
pub fn sample_annulus_infimum(pot: &SampledPotential, mu: f64, eps: f64, samples: usize, seed: u64) -> Result<f64> {
    let d: &Arc<Domain> = pot.domain();
    let dim = d.dim();
    let r_bar = ball_radius(dim, mu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        // Random positive combination of Gaussian bumps.
        let terms: Vec<(f64, f64)> = (0..3).map(|_| (rng.gen_range(0.1..1.0), rng.gen_range(0.3..3.0))).collect();
        let u = Field::from_radial(d, |r| terms.iter().map(|(a, s)| a * (-(r / s).powi(2)).exp()).sum())?.normalized()?;
        let target = r_bar * r_bar * (1.0 - eps * rng.gen_range(0.0..1.0));
        let mut h = (target / u.grad_norm_sq()).sqrt();
        if let Some(q) = d.ratio() {
            // Snap to an index shift when possible, it keeps the mass exact.
            if let Some(j) = index_shift(q.powf((h.ln() / q.ln()).round()), q) {
                let snapped = q.powi(j as i32);
                let k = u.grad_norm_sq() * snapped * snapped;
                if k >= (1.0 - eps) * r_bar * r_bar && k <= r_bar * r_bar {
                    h = snapped;
                }
            }
        }
        let uh = dilate(&u, h)?;
        let k = uh.grad_norm_sq();
        if k < (1.0 - eps) * r_bar * r_bar || k > r_bar * r_bar || uh.l2_norm_sq() > 1.0 + 1e-9 {
            continue;
        }
        best = best.min(energy(&uh, pot, mu)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_domain;
    use crate::potentials::{sample_potential, PotentialSpec};

    #[test]
    fn closed_form_sobolev_n3() {
        assert!((sobolev_closed_form(3) - 5.478).abs() < 5e-4);
    }

    #[test]
    fn rescale_round_trip() {
        let d = build_domain(3, GridKind::RadialLogSpaced, 20.0, 256).unwrap();
        let u = Field::from_radial(&d, |r| (-r * r).exp()).unwrap();
        let (small, mu) = mass_rescale(&u, 2.0).unwrap();
        assert_eq!(mu, 16.0);
        let (back, rho) = mass_unscale(&small, mu).unwrap();
        assert!((rho - 2.0).abs() < 1e-15);
        assert!(back.distance(&u).unwrap() < 1e-14);
        let (same, mu1) = mass_rescale(&u, 1.0).unwrap();
        assert_eq!(mu1, 1.0);
        assert_eq!(same.values(), u.values());
    }

    #[test]
    fn report_identities() {
        let d = build_domain(3, GridKind::RadialLogSpaced, 20.0, 1024).unwrap();
        let pot = sample_potential(&PotentialSpec::well(7.0, 1.0), &d).unwrap();
        let u = Field::from_radial(&d, |r| (-r * r / 2.0).exp()).unwrap().normalized().unwrap();
        let mu = 0.7;
        let rep = energy_report(&u, &pot, mu).unwrap();
        let p = critical_exponent(3);
        let lambda = rep.multiplier.unwrap();
        assert!((2.0 * rep.energy - lambda - mu * (1.0 - 2.0 / p) * rep.critical).abs() < 1e-12);
        let zero = energy_report(&Field::zeros(&d), &pot, mu).unwrap();
        assert_eq!(zero.energy, 0.0);
        assert_eq!(zero.multiplier, None);
    }

    #[test]
    fn tangential_gradient_is_orthogonal() {
        let d = build_domain(4, GridKind::RadialLogSpaced, 20.0, 512).unwrap();
        let pot = sample_potential(&PotentialSpec::lorentzian(-3.0, 1.0), &d).unwrap();
        let u = Field::from_radial(&d, |r| (1.0 + r) * (-r).exp()).unwrap().normalized().unwrap();
        let g = tangential_gradient(&u, &pot, 0.3).unwrap();
        assert!(g.inner(&u).unwrap().abs() < 1e-10 * g.l2_norm());
    }

    #[test]
    fn augmented_energy_at_zero_is_energy() {
        let d = build_domain(3, GridKind::RadialLogSpaced, 20.0, 512).unwrap();
        let pot = sample_potential(&PotentialSpec::well(7.0, 1.0), &d).unwrap();
        let u = Field::from_radial(&d, |r| (-r * r).exp()).unwrap().normalized().unwrap();
        assert_eq!(augmented_energy(&u, 0.0, &pot, 0.5).unwrap(), energy(&u, &pot, 0.5).unwrap());
    }

    #[test]
    fn level_formulas() {
        let s = sobolev_constant(4).unwrap();
        let rb = ball_radius(4, 1.0).unwrap();
        assert!((rb * rb - s * s).abs() < 1e-12 * s * s);
        let s3 = sobolev_constant(3).unwrap();
        let t = level_threshold(3, 1.0, -0.3).unwrap();
        assert!((t - (-0.3 + s3.powf(1.5) / 3.0)).abs() < 1e-12);
        assert!(admissible_c0(3).unwrap() < admissible_c0_bound(3).unwrap());
        assert!(ball_radius(3, 0.0).is_err());
    }
}
