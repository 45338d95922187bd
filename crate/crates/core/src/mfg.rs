//! Hopf-Cole conversion to the ergodic mean-field-game system
//!
//! ```text
//! −Δu + ½|∇u|² + λ_MFG + α m^{2/(N−2)} = 2V,   −Δm − div(m∇u) = 0,   ∫m = 1
//! ```
//!
//! with `m = v²`, `u = −ln m`, `λ_MFG = 2λ` and `α = 2μ`.  Both equations are
//! discretized on the stiffness graph of the domain.  The HJB operator is
//! exponentially fitted (`−2 e^{u/2} Δ_h e^{−u/2}`) and the Kolmogorov flux is
//! of Scharfetter-Gummel type, so the transform of a discrete NLS solution is
//! a discrete MFG solution up to the NLS residual.

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Field};
use crate::error::{Error, Result};
use crate::functional::LevelCertificate;
use crate::linalg::{conjugate_gradient, solve_tridiagonal};
use crate::potentials::SampledPotential;
use crate::solvers::{find_local_minimizer, find_mountain_pass, MountainPassRun, SolutionBundle, SolverConfig};

/// Nodes with `v` below this are dropped from `u` and kept as 0 in `m`.
pub const POSITIVITY_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfgResiduals {
    /// HJB residual in `L²(m dx)`.
    pub hjb: f64,
    /// Scharfetter-Gummel Kolmogorov residual in the `H⁻¹` dual norm of the
    /// Dirichlet stiffness, the natural norm for a divergence-form equation.
    pub kolmogorov: f64,
    /// The same residual in strong `L²`.  Near the origin of fine log grids
    /// this is dominated by rounding in the fluxes divided by tiny cell
    /// volumes.
    pub kolmogorov_strong: f64,
    /// `|∫m − 1|`
    pub mass_error: f64,
}

#[derive(Debug, Clone)]
pub struct MfgSolution {
    pub m: Field,
    /// Value function in the gauge `u = −ln m`; `None` below the floor.
    pub u: Vec<Option<f64>>,
    pub lambda: f64,
    pub alpha: f64,
    pub residuals: MfgResiduals,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfgSummary {
    pub lambda: f64,
    pub alpha: f64,
    pub mass: f64,
    pub residuals: MfgResiduals,
    pub masked_nodes: usize,
}

impl MfgSolution {
    pub fn summary(&self) -> MfgSummary {
        MfgSummary {
            lambda: self.lambda,
            alpha: self.alpha,
            mass: self.mass,
            residuals: self.residuals,
            masked_nodes: self.u.iter().filter(|x| x.is_none()).count(),
        }
    }

    pub fn domain(&self) -> &std::sync::Arc<Domain> {
        self.m.domain()
    }
}

/// Exponent of `m` in the coupling term.
fn coupling_exponent(dim: usize) -> f64 {
    2.0 / (dim as f64 - 2.0)
}

/// Bernoulli function `x / (eˣ − 1)`.
fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-10 {
        1.0 - 0.5 * x
    } else {
        x / x.exp_m1()
    }
}

pub fn hopf_cole_forward(bundle: &SolutionBundle, pot: &SampledPotential, mu: f64) -> Result<MfgSolution> {
    let v = &bundle.u;
    v.check_same(pot.v())?;
    if let Some(bad) = v.values().iter().copied().find(|x| *x < -POSITIVITY_FLOOR) {
        return Err(Error::InvalidArgument(format!("v takes the negative value {bad:e}")));
    }
    let d = v.domain();
    let mut m = Vec::with_capacity(d.len());
    let mut u = Vec::with_capacity(d.len());
    for &x in v.values() {
        if x < POSITIVITY_FLOOR {
            m.push(0.0);
            u.push(None);
        } else {
            let mi = x * x;
            m.push(mi);
            u.push(Some(-mi.ln()));
        }
    }
    let m = Field::new(d, m)?;
    let mut sol = MfgSolution { mass: m.integral(), m, u, lambda: 2.0 * bundle.lambda, alpha: 2.0 * mu, residuals: MfgResiduals { hjb: 0.0, kolmogorov: 0.0, kolmogorov_strong: 0.0, mass_error: 0.0 } };
    sol.residuals = mfg_residuals(&sol, pot)?;
    Ok(sol)
}

/// `v = √m`, the inverse of the transform on positive fields.
pub fn hopf_cole_backward(sol: &MfgSolution) -> Result<Field> {
    Ok(sol.m.map(f64::sqrt))
}

/// Pointwise exponentially fitted HJB residual; `None` on masked nodes.
pub fn hjb_pointwise(sol: &MfgSolution, pot: &SampledPotential) -> Result<Vec<Option<f64>>> {
    sol.m.check_same(pot.v())?;
    let d = sol.domain();
    // (A e^{−u/2})_i / e^{−u_i/2} in difference form.
    let mut ratio = vec![0.0; d.len()];
    d.for_each_edge(|i, j, c| match j {
        Some(j) => match (sol.u[i], sol.u[j]) {
            (Some(ui), Some(uj)) => {
                ratio[i] -= c * (-0.5 * (uj - ui)).exp_m1();
                ratio[j] -= c * (-0.5 * (ui - uj)).exp_m1();
            }
            (Some(_), None) => ratio[i] += c,
            (None, Some(_)) => ratio[j] += c,
            (None, None) => {}
        },
        None => ratio[i] += c,
    });
    let q = coupling_exponent(d.dim());
    let w = d.weights();
    let v = pot.v().values();
    let m = sol.m.values();
    Ok((0..d.len())
        .map(|i| sol.u[i].map(|_| -2.0 * ratio[i] / w[i] + sol.lambda + sol.alpha * m[i].powf(q) - 2.0 * v[i]))
        .collect())
}

/// Pointwise Scharfetter-Gummel residual of `−Δm − div(m∇u)`.
pub fn kolmogorov_pointwise(sol: &MfgSolution) -> Vec<f64> {
    let mut out = kolmogorov_weak(sol);
    out.iter_mut().zip(sol.domain().weights()).for_each(|(o, w)| *o /= w);
    out
}

/// Net Scharfetter-Gummel flux out of every cell.
fn kolmogorov_weak(sol: &MfgSolution) -> Vec<f64> {
    let d = sol.domain();
    let m = sol.m.values();
    let mut out = vec![0.0; d.len()];
    d.for_each_edge(|i, j, c| {
        // Flux of ∇m + m∇u from i to j; zero towards masked nodes and the
        // boundary, where m = 0 and u = +∞.
        if let Some(j) = j {
            if let (Some(ui), Some(uj)) = (sol.u[i], sol.u[j]) {
                let delta = uj - ui;
                let flux = c * (bernoulli(-delta) * m[j] - bernoulli(delta) * m[i]);
                out[i] -= flux;
                out[j] += flux;
            }
        }
    });
    out
}

/// `sqrt(rᵀA⁻¹r)` for a weak residual `r`.
fn dual_norm(d: &Domain, r: &[f64]) -> f64 {
    let z = match d.stiffness() {
        Some(a) => solve_tridiagonal(&a.off, &a.diag, &a.off, r).expect("Dirichlet stiffness is nonsingular"),
        None => conjugate_gradient(|x: &[f64], out: &mut [f64]| d.apply_stiffness(x, out), r, None, 1e-14, 10 * d.len()).0,
    };
    r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
}

/// Same residual with a centered flux `c[(m_j − m_i) + ½(m_i + m_j)(u_j − u_i)]`;
/// consistent but not exact on `m = e^{−u}`.
pub fn kolmogorov_pointwise_centered(sol: &MfgSolution) -> Vec<f64> {
    let d = sol.domain();
    let m = sol.m.values();
    let mut out = vec![0.0; d.len()];
    d.for_each_edge(|i, j, c| {
        if let Some(j) = j {
            if let (Some(ui), Some(uj)) = (sol.u[i], sol.u[j]) {
                let flux = c * ((m[j] - m[i]) + 0.5 * (m[i] + m[j]) * (uj - ui));
                out[i] -= flux;
                out[j] += flux;
            }
        }
    });
    out.iter_mut().zip(d.weights()).for_each(|(o, w)| *o /= w);
    out
}

pub fn mfg_residuals(sol: &MfgSolution, pot: &SampledPotential) -> Result<MfgResiduals> {
    let d = sol.domain();
    let w = d.weights();
    let m = sol.m.values();
    let hjb = hjb_pointwise(sol, pot)?;
    let hjb = (0..d.len()).map(|i| hjb[i].map_or(0.0, |h| w[i] * m[i] * h * h)).sum::<f64>().sqrt();
    let weak = kolmogorov_weak(sol);
    let kolmogorov_strong = weak.iter().zip(w).map(|(r, w)| r * r / w).sum::<f64>().sqrt();
    Ok(MfgResiduals { hjb, kolmogorov: dual_norm(d, &weak), kolmogorov_strong, mass_error: (sol.m.integral() - 1.0).abs() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaGate {
    pub alpha: f64,
    pub alpha_gate: f64,
    /// `α* − α`
    pub margin: f64,
    pub passes: bool,
}

pub fn alpha_gate(alpha: f64, alpha_gate: f64) -> AlphaGate {
    AlphaGate { alpha, alpha_gate, margin: alpha_gate - alpha, passes: alpha > 0.0 && alpha < alpha_gate }
}

#[derive(Debug, Clone)]
pub struct TwoSolutions {
    pub gate: AlphaGate,
    pub level: LevelCertificate,
    pub minimizer: SolutionBundle,
    pub saddle: MountainPassRun,
    pub first: MfgSolution,
    pub second: MfgSolution,
    /// `‖m₁ − m₂‖₂`
    pub separation: f64,
    pub distinct: bool,
}

/// Both MFG solutions at `α`: the local minimizer and the mountain pass of
/// the NLS problem with `μ = α/2`, converted by Hopf-Cole.  The saddle search
/// starts from the minimizer, so the two solves run in sequence.
pub fn two_solution_pipeline(pot: &SampledPotential, alpha: f64, alpha_max: f64, cfg: &SolverConfig) -> Result<TwoSolutions> {
    let gate = alpha_gate(alpha, alpha_max);
    if !gate.passes {
        return Err(Error::InvalidArgument(format!("α = {alpha} is outside the gate (0, {alpha_max}); margin {:e}", gate.margin)));
    }
    let d = pot.domain();
    let dim = d.dim();
    if !(3..=5).contains(&dim) {
        return Err(Error::InvalidArgument("the second solution needs N ∈ {3, 4, 5}".into()));
    }
    let dec = pot.decomposition().ok_or_else(|| Error::Missing("potential decomposition".into()))?;
    let mu = 0.5 * alpha;
    let minimizer = find_local_minimizer(pot, mu, cfg)?;
    let level = LevelCertificate::new(dim, mu, cfg.annulus_eps, &dec.norms())?.with_minimum(dim, mu, minimizer.report.energy)?;
    let saddle = find_mountain_pass(pot, mu, &minimizer, level.e_star, cfg)?;
    let level = level.with_saddle(saddle.bundle.report.energy);
    let first = hopf_cole_forward(&minimizer, pot, mu)?;
    let second = hopf_cole_forward(&saddle.bundle, pot, mu)?;
    let separation = first.m.distance(&second.m)?;
    Ok(TwoSolutions { gate, level, minimizer, saddle, distinct: separation > 10.0 * cfg.residual_tol, first, second, separation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, GridKind};
    use crate::functional::energy_report;
    use crate::potentials::{sample_potential, PotentialSpec};
    use crate::solvers::SolutionKind;

    fn bundle_from(u: Field, lambda: f64, pot: &SampledPotential, mu: f64) -> SolutionBundle {
        let report = energy_report(&u, pot, mu).unwrap();
        SolutionBundle { u, lambda, kind: SolutionKind::Eigenstate, report, pde_residual: 0.0, neg_part_norm: 0.0, lambda_fit: lambda, iterations: 0, log: vec![] }
    }

    #[test]
    fn multipliers_double() {
        let d = build_domain(3, GridKind::RadialLogSpaced, 10.0, 512).unwrap();
        let pot = sample_potential(&PotentialSpec::zero(), &d).unwrap();
        let u = Field::from_radial(&d, |r| (-r * r).exp()).unwrap().normalized().unwrap();
        let sol = hopf_cole_forward(&bundle_from(u.clone(), -1.0, &pot, 0.5), &pot, 0.5).unwrap();
        assert_eq!(sol.lambda, -2.0);
        assert_eq!(sol.alpha, 1.0);
        assert!(sol.residuals.mass_error < 1e-12);
        assert!(sol.residuals.kolmogorov < 1e-8, "{}", sol.residuals.kolmogorov);
        let back = hopf_cole_backward(&sol).unwrap();
        assert!(back.distance(&u).unwrap() < 1e-14);
    }

    #[test]
    fn gauge_shift_leaves_residuals() {
        let d = build_domain(3, GridKind::RadialLogSpaced, 10.0, 512).unwrap();
        let pot = sample_potential(&PotentialSpec::well(7.0, 1.0), &d).unwrap();
        let u = Field::from_radial(&d, |r| (-r).exp() / (1.0 + r)).unwrap().normalized().unwrap();
        let sol = hopf_cole_forward(&bundle_from(u, -2.0, &pot, 0.05), &pot, 0.05).unwrap();
        let mut shifted = sol.clone();
        shifted.u.iter_mut().for_each(|x| *x = x.map(|v| v + 3.7));
        let (a, b) = (mfg_residuals(&sol, &pot).unwrap(), mfg_residuals(&shifted, &pot).unwrap());
        // Equal up to rounding in the differences of u.
        assert!((a.hjb - b.hjb).abs() <= 1e-9 * a.hjb.max(1.0), "{} vs {}", a.hjb, b.hjb);
        assert!(a.kolmogorov < 1e-12 && b.kolmogorov < 1e-12);
    }

    #[test]
    fn uniform_density_on_box() {
        let d = build_domain(3, GridKind::BoxUniform, 1.0, 16).unwrap();
        let pot = sample_potential(&PotentialSpec::zero(), &d).unwrap();
        let vol = 8.0;
        let m = Field::new(&d, vec![1.0 / vol; d.len()]).unwrap();
        let sol = MfgSolution { u: vec![Some(0.0); d.len()], m, lambda: -0.3, alpha: 0.2, mass: 1.0, residuals: MfgResiduals { hjb: 0.0, kolmogorov: 0.0, kolmogorov_strong: 0.0, mass_error: 0.0 } };
        let h = hjb_pointwise(&sol, &pot).unwrap();
        // Interior cell: no wall edge, u constant, so only λ + αm^{2/(N−2)} remains.
        let interior = 8 * 256 + 8 * 16 + 8;
        let expected = -0.3 + 0.2 * (1.0 / vol).powf(2.0);
        assert!((h[interior].unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn negative_values_are_rejected() {
        let d = build_domain(3, GridKind::RadialLogSpaced, 10.0, 256).unwrap();
        let pot = sample_potential(&PotentialSpec::zero(), &d).unwrap();
        let u = Field::from_radial(&d, |r| (1.0 - r) * (-r).exp()).unwrap().normalized().unwrap();
        assert!(hopf_cole_forward(&bundle_from(u, -1.0, &pot, 0.1), &pot, 0.1).is_err());
        assert!(!alpha_gate(0.3, 0.2).passes);
    }
}
