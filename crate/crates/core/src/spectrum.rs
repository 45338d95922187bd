//! Principal eigenpair of `−Δ + V` on a grid.
//!
//! Radial grids use the symmetric tridiagonal `W^{-1/2}(A + WV)W^{-1/2}`:
//! Sturm bisection gives λ̃₁ to machine precision and one or two inverse
//! iterations give the vector.  The box grid runs shifted inverse iteration
//! with conjugate-gradient inner solves.

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Field};
use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, SymTridiagonal};
use crate::potentials::SampledPotential;

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalue: f64,
    /// Nonnegative, unit L² mass.
    pub psi: Field,
    /// `‖(−Δ + V − λ̃₁)ψ₁‖₂`
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attractivity {
    pub attractive: bool,
    /// `−λ̃₁`
    pub margin: f64,
    pub eigenvalue: f64,
}

/// The symmetrized radial operator and the diagonal `W^{1/2}`.
pub(crate) fn symmetrized_operator(d: &Domain, v: &[f64]) -> Option<(SymTridiagonal, Vec<f64>)> {
    let a = d.stiffness()?;
    let sw: Vec<f64> = d.weights().iter().map(|w| w.sqrt()).collect();
    let diag = (0..a.len()).map(|i| a.diag[i] / d.weights()[i] + v[i]).collect();
    let off = (0..a.off.len()).map(|i| a.off[i] / (sw[i] * sw[i + 1])).collect();
    Some((SymTridiagonal::new(diag, off), sw))
}

/// `‖(−Δ + V − λ)u‖₂` on the grid.
pub fn eigen_residual(u: &Field, pot: &SampledPotential, lambda: f64) -> Result<f64> {
    u.check_same(pot.v())?;
    let d = u.domain();
    let mut r = d.neg_laplacian(u.values());
    for (i, ri) in r.iter_mut().enumerate() {
        *ri += (pot.v().values()[i] - lambda) * u.values()[i];
    }
    Ok(d.norm_sq(&r).sqrt())
}

fn sign_normalize(d: &std::sync::Arc<Domain>, mut values: Vec<f64>) -> Result<Field> {
    let peak = values.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if peak < 0.0 {
        values.iter_mut().for_each(|x| *x = -*x);
    }
    for x in values.iter_mut() {
        if *x < 0.0 && *x > -1e-12 {
            *x = 0.0;
        }
    }
    Field::new(d, values)?.normalized()
}

pub fn principal_eigenpair(pot: &SampledPotential, tol: f64) -> Result<EigenResult> {
    let d = pot.domain();
    if d.is_radial() {
        radial_eigenpair(pot, tol)
    } else {
        box_eigenpair(pot, tol, 2000)
    }
}

fn radial_eigenpair(pot: &SampledPotential, tol: f64) -> Result<EigenResult> {
    let d = pot.domain();
    let (t, sw) = symmetrized_operator(d, pot.v().values()).expect("radial grid");
    let lambda = t.lowest_eigenvalue();
    let (lo, hi) = t.gershgorin();
    // A shift just below λ̃₁ keeps the solve nonsingular while making the
    // iteration converge in a step or two.
    let shift = lambda - 1e-10 * lambda.abs().max(1.0);
    let n = t.len();
    let mut x: Vec<f64> = sw.clone();
    let mut iterations = 0;
    let mut last_residual = f64::INFINITY;
    for _ in 0..20 {
        iterations += 1;
        let y = t
            .solve_shifted(shift, &x)
            .ok_or_else(|| Error::NonConvergence("singular inverse-iteration solve".into()))?;
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.into_iter().map(|v| v / norm).collect();
        let mut tx = vec![0.0; n];
        t.apply(&x, &mut tx);
        let res = tx.iter().zip(&x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        if res <= tol || res >= 0.5 * last_residual {
            last_residual = res;
            break;
        }
        last_residual = res;
    }
    let values: Vec<f64> = x.iter().zip(&sw).map(|(a, s)| a / s).collect();
    let psi = sign_normalize(d, values)?;
    let residual = eigen_residual(&psi, pot, lambda)?;
    if !(residual <= tol.max(1e3 * f64::EPSILON * (hi - lo).abs())) && last_residual > tol {
        return Err(Error::NonConvergence(format!("eigen residual {residual:e} above {tol:e}")));
    }
    Ok(EigenResult { eigenvalue: lambda, psi, residual, iterations })
}

fn box_eigenpair(pot: &SampledPotential, tol: f64, max_iter: usize) -> Result<EigenResult> {
    let d = pot.domain();
    let v = pot.v().values();
    let w = d.weights();
    let n = d.len();
    let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = v_min - 1.0;
    // (A + W(V − σ)) is symmetric positive definite.
    let apply = |x: &[f64], out: &mut [f64]| {
        d.apply_stiffness(x, out);
        for i in 0..x.len() {
            out[i] += w[i] * (v[i] - shift) * x[i];
        }
    };
    let mut x: Vec<f64> = d.radius().iter().map(|r| (-r * r).exp()).collect();
    let mut lambda = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let rhs: Vec<f64> = (0..n).map(|i| w[i] * x[i]).collect();
        let (y, _) = conjugate_gradient(apply, &rhs, Some(&x), 1e-12, 4 * n);
        let norm = d.norm_sq(&y).sqrt();
        x = y.into_iter().map(|v| v / norm).collect();
        let u = Field::new(d, x.clone())?;
        let rq = u.grad_norm_sq() + d.inner(&x, &x.iter().zip(v).map(|(a, b)| a * b).collect::<Vec<_>>());
        lambda = rq;
        residual = eigen_residual(&u, pot, lambda)?;
        if residual <= tol {
            let psi = sign_normalize(d, x)?;
            return Ok(EigenResult { eigenvalue: lambda, psi, residual, iterations: it });
        }
    }
    Err(Error::NonConvergence(format!("box eigen residual {residual:e} at λ = {lambda}")))
}

pub fn attractivity_check(pot: &SampledPotential) -> Result<Attractivity> {
    let e = principal_eigenpair(pot, 1e-8)?;
    Ok(Attractivity { attractive: e.eigenvalue < 0.0, margin: -e.eigenvalue, eigenvalue: e.eigenvalue })
}

/// Rayleigh quotient `(∫|∇u|² + ∫Vu²)/∫u²`.
pub fn rayleigh_quotient(u: &Field, pot: &SampledPotential) -> Result<f64> {
    u.check_same(pot.v())?;
    let d = u.domain();
    let uv = u.values();
    let pv: f64 = (0..uv.len()).map(|i| d.weights()[i] * pot.v().values()[i] * uv[i] * uv[i]).sum();
    Ok((u.grad_norm_sq() + pv) / u.l2_norm_sq())
}
