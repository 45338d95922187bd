//! Constrained critical points of `E_μ` on the unit L²-sphere: the local
//! minimizer inside the gradient ball and the mountain-pass solution.
//!
//! Both solvers work on radial grids.  Descent steps are preconditioned by
//! the tridiagonal `A + W(V − σ)`, with σ below the spectrum, and every
//! solver ends with a damped Newton polish on the bordered system
//! `(−Δ + V − λ − μ|u|^{2*−2})u = 0`, `‖u‖₂ = 1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bubbles::{aubin_talenti_field, tilde_combination, BubbleParams};
use crate::domain::{dilate, index_shift, Domain, Field};
use crate::error::{Error, Result};
use crate::functional::{
    augmented_energy, augmented_slope, ball_radius, critical_exponent, energy, energy_report, energy_values, gradient_values,
    level_threshold, sobolev_constant, EnergyReport,
};
use crate::linalg::solve_tridiagonal;
use crate::potentials::SampledPotential;
use crate::spectrum::principal_eigenpair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionKind {
    Eigenstate,
    LocalMin,
    MountainPass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub step: f64,
    pub backtrack: f64,
    /// Tangential gradient tolerance, relative to `‖∇u‖₂`.
    pub gradient_tol: f64,
    pub residual_tol: f64,
    pub mass_tol: f64,
    pub max_iter: usize,
    pub newton_max_iter: usize,
    /// Number of nodes on the mountain-pass path.
    pub path_nodes: usize,
    pub path_sweeps: usize,
    /// Hand over to Newton once the path maximum is this stationary.
    pub path_tol: f64,
    pub annulus_eps: f64,
    /// Scale of the bubble seeding the initial path, relative to the cutoff.
    pub bubble_eps: f64,
    pub bubble_cutoff: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            backtrack: 0.5,
            gradient_tol: 1e-8,
            residual_tol: 1e-6,
            mass_tol: 1e-10,
            max_iter: 2000,
            newton_max_iter: 60,
            path_nodes: 33,
            path_sweeps: 60,
            path_tol: 1e-3,
            annulus_eps: 0.1,
            bubble_eps: 0.00625,
            bubble_cutoff: crate::bubbles::DEFAULT_CUTOFF,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.step, self.gradient_tol, self.residual_tol, self.mass_tol, self.path_tol, self.annulus_eps, self.bubble_eps, self.bubble_cutoff];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("solver tolerances and steps must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidArgument("backtracking factor must lie in (0, 1)".into()));
        }
        if self.path_nodes < 8 {
            return Err(Error::InvalidArgument(format!("path needs at least 8 nodes, got {}", self.path_nodes)));
        }
        if self.annulus_eps >= 1.0 {
            return Err(Error::InvalidArgument("annulus fraction must be below 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub gradient_norm: f64,
    pub pohozaev: f64,
}

#[derive(Debug, Clone)]
pub struct SolutionBundle {
    pub u: Field,
    pub lambda: f64,
    pub kind: SolutionKind,
    pub report: EnergyReport,
    pub pde_residual: f64,
    pub neg_part_norm: f64,
    /// L² least-squares fit of `−Δu + Vu − μ|u|^{2*−2}u` against `u`.
    pub lambda_fit: f64,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
}

/// `‖−Δu + Vu − λu − μ|u|^{2*−2}u‖₂`.
pub fn pde_residual(u: &Field, lambda: f64, pot: &SampledPotential, mu: f64) -> Result<f64> {
    u.check_same(pot.v())?;
    let d = u.domain();
    let mut g = gradient_values(d, pot.v().values(), u.values(), mu);
    for (gi, ui) in g.iter_mut().zip(u.values()) {
        *gi -= lambda * ui;
    }
    Ok(d.norm_sq(&g).sqrt())
}

fn require_radial(d: &Domain) -> Result<()> {
    if d.is_radial() {
        Ok(())
    } else {
        Err(Error::InvalidDomain("the constrained solvers run on radial grids only".into()))
    }
}

fn normalized_values(d: &Domain, mut u: Vec<f64>) -> Vec<f64> {
    let norm = d.norm_sq(&u).sqrt();
    u.iter_mut().for_each(|x| *x /= norm);
    u
}

/// Tridiagonal `A + W(V − σ)` used as a Sobolev-type preconditioner.
struct Preconditioner {
    sub: Vec<f64>,
    diag: Vec<f64>,
}

impl Preconditioner {
    fn new(d: &Domain, v: &[f64], sigma: f64) -> Self {
        let a = d.stiffness().expect("radial grid");
        let diag = (0..a.len()).map(|i| a.diag[i] + d.weights()[i] * (v[i] - sigma)).collect();
        Self { sub: a.off, diag }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        solve_tridiagonal(&self.sub, &self.diag, &self.sub, rhs).expect("positive definite preconditioner")
    }

    /// Preconditioned gradient made W-orthogonal to `u` (tangent to the
    /// sphere), together with the weak gradient and the multiplier estimate.
    fn tangent_direction(&self, d: &Domain, v: &[f64], u: &[f64], mu: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let w = d.weights();
        let g = gradient_values(d, v, u, mu);
        let weak: Vec<f64> = g.iter().zip(w).map(|(g, w)| g * w).collect();
        let lambda = weak.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() / d.norm_sq(u);
        let z = self.solve(&weak);
        let wu: Vec<f64> = u.iter().zip(w).map(|(u, w)| u * w).collect();
        let y = self.solve(&wu);
        let coef = d.inner(u, &z) / d.inner(u, &y);
        let dir = z.iter().zip(&y).map(|(z, y)| z - coef * y).collect();
        (dir, weak, lambda)
    }
}

fn tangential_norm(d: &Domain, v: &[f64], u: &[f64], mu: f64) -> (f64, f64) {
    let g = gradient_values(d, v, u, mu);
    let lambda = d.inner(&g, u) / d.norm_sq(u);
    let t: Vec<f64> = g.iter().zip(u).map(|(g, u)| g - lambda * u).collect();
    (d.norm_sq(&t).sqrt(), lambda)
}

/// Damped Newton on the bordered system.  Returns `(u, λ, iterations)` with
/// `u` exactly normalized.
pub fn newton_polish(u0: &Field, lambda0: f64, pot: &SampledPotential, mu: f64, tol: f64, max_iter: usize) -> Result<(Field, f64, usize)> {
    let d = u0.domain();
    require_radial(d)?;
    let w = d.weights();
    let v = pot.v().values();
    let p = critical_exponent(d.dim());
    let a = d.stiffness().expect("radial grid");
    let mut u = normalized_values(d, u0.values().to_vec());
    let mut lambda = lambda0;
    let weak_residual = |u: &[f64], lambda: f64| -> (Vec<f64>, f64) {
        let mut r = vec![0.0; u.len()];
        d.apply_stiffness(u, &mut r);
        for i in 0..u.len() {
            r[i] += w[i] * (v[i] * u[i] - lambda * u[i] - mu * u[i].abs().powf(p - 2.0) * u[i]);
        }
        let strong = r.iter().zip(w).map(|(r, w)| r * r / w).sum::<f64>().sqrt();
        (r, strong)
    };
    let (mut r, mut res) = weak_residual(&u, lambda);
    let mut it = 0;
    while it < max_iter && res > 1e-3 * tol {
        it += 1;
        let diag: Vec<f64> = (0..u.len()).map(|i| a.diag[i] + w[i] * (v[i] - lambda - mu * (p - 1.0) * u[i].abs().powf(p - 2.0))).collect();
        let b: Vec<f64> = u.iter().zip(w).map(|(u, w)| -u * w).collect();
        let c = 0.5 * (1.0 - d.norm_sq(&u));
        let singular = || Error::NonConvergence("singular Newton system".into());
        let y1 = solve_tridiagonal(&a.off, &diag, &a.off, &r).ok_or_else(singular)?;
        let y2 = solve_tridiagonal(&a.off, &diag, &a.off, &b).ok_or_else(singular)?;
        let by1: f64 = b.iter().zip(&y1).map(|(a, b)| a * b).sum();
        let by2: f64 = b.iter().zip(&y2).map(|(a, b)| a * b).sum();
        let dl = (c - by1) / by2;
        let du: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| -a - b * dl).collect();
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-6 {
            let cand: Vec<f64> = u.iter().zip(&du).map(|(u, s)| u + alpha * s).collect();
            let cand = normalized_values(d, cand);
            let cl = lambda + alpha * dl;
            let (cr, cres) = weak_residual(&cand, cl);
            if cres.is_finite() && cres < (1.0 - 1e-4 * alpha) * res {
                u = cand;
                lambda = cl;
                r = cr;
                res = cres;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !(res <= tol) {
        return Err(Error::NonConvergence(format!("Newton stalled at residual {res:e}")));
    }
    Ok((Field::new(d, u)?, lambda, it))
}

fn finish(u: Field, kind: SolutionKind, pot: &SampledPotential, mu: f64, iterations: usize, log: Vec<IterationRecord>) -> Result<SolutionBundle> {
    let neg_part_norm = u.negative_part_norm();
    let report = energy_report(&u, pot, mu)?;
    let lambda = report.multiplier.ok_or_else(|| Error::NonConvergence("solution left the unit sphere".into()))?;
    let d = u.domain();
    let g = gradient_values(d, pot.v().values(), u.values(), mu);
    let lambda_fit = d.inner(&g, u.values()) / u.l2_norm_sq();
    let pde_residual = pde_residual(&u, lambda, pot, mu)?;
    Ok(SolutionBundle { u, lambda, kind, report, pde_residual, neg_part_norm, lambda_fit, iterations, log })
}

/// Bundle for a stored field: every reported quantity is recomputed from
/// `u` alone, so replays from dumped fields are exact.
pub fn certify_field(u: Field, kind: SolutionKind, pot: &SampledPotential, mu: f64) -> Result<SolutionBundle> {
    finish(u, kind, pot, mu, 0, Vec::new())
}

/// Nonnegative representative: `|u|`, exactly renormalized.
fn absolute(d: &Domain, u: &[f64]) -> Vec<f64> {
    normalized_values(d, u.iter().map(|x| x.abs()).collect())
}

pub fn find_local_minimizer(pot: &SampledPotential, mu: f64, cfg: &SolverConfig) -> Result<SolutionBundle> {
    cfg.validate()?;
    let d = pot.domain();
    require_radial(d)?;
    let v = pot.v().values();
    let r_bar = ball_radius(d.dim(), mu)?;
    let eig = principal_eigenpair(pot, 1e-8)?;
    if eig.eigenvalue >= 0.0 {
        return Err(Error::InvalidArgument(format!("potential is not attractive: λ̃₁ = {}", eig.eigenvalue)));
    }
    if eig.psi.grad_norm_sq().sqrt() >= r_bar {
        return Err(Error::NonConvergence("principal eigenfunction already lies outside the gradient ball".into()));
    }
    let pre = Preconditioner::new(d, v, eig.eigenvalue - 1.0);
    let mut u = eig.psi.values().to_vec();
    let mut e = energy_values(d, v, &u, mu);
    let mut log = Vec::new();
    let mut escapes = 0;
    let mut it = 0;
    while it < cfg.max_iter {
        let (dir, weak, _) = pre.tangent_direction(d, v, &u, mu);
        let slope: f64 = weak.iter().zip(&dir).map(|(a, b)| a * b).sum();
        // Gradient norm in the preconditioner metric.  The strong L² norm has
        // a roundoff floor near the origin of fine log grids.
        let gnorm = slope.max(0.0).sqrt();
        let field = Field::new(d, u.clone())?;
        log.push(IterationRecord { iteration: it, energy: e, gradient_norm: gnorm, pohozaev: energy_report(&field, pot, mu)?.pohozaev });
        if gnorm < cfg.gradient_tol * d.kinetic(&u).sqrt().max(1.0) {
            break;
        }
        let mut tau = cfg.step;
        let mut moved = false;
        let mut hit_ball = false;
        while tau > 1e-12 {
            let cand = absolute(d, &u.iter().zip(&dir).map(|(u, s)| u - tau * s).collect::<Vec<_>>());
            if d.kinetic(&cand).sqrt() >= r_bar {
                hit_ball = true;
            } else {
                let ec = energy_values(d, v, &cand, mu);
                if ec <= e - 1e-4 * tau * slope {
                    u = cand;
                    e = ec;
                    moved = true;
                    break;
                }
            }
            tau *= cfg.backtrack;
        }
        it += 1;
        if hit_ball && !moved {
            escapes += 1;
            if escapes >= 5 {
                return Err(Error::NonConvergence("descent keeps leaving the gradient ball; no local minimizer inside it".into()));
            }
        }
        if !moved {
            break;
        }
    }
    let start = Field::new(d, u)?;
    let (_, lambda) = tangential_norm(d, v, start.values(), mu);
    let (u, _, newton_it) = newton_polish(&start, lambda, pot, mu, cfg.residual_tol, cfg.newton_max_iter)?;
    let u = Field::new(d, absolute(d, u.values()))?;
    finish(u, SolutionKind::LocalMin, pot, mu, it + newton_it, log)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizerChecks {
    pub negative_energy: bool,
    pub below_principal: bool,
    pub principal_negative: bool,
    pub inside_ball: bool,
    pub residual_ok: bool,
    pub nonnegative: bool,
    pub unit_mass: bool,
    /// Multiplier formula and least-squares fit agree within 10⁻⁶.
    pub multiplier_consistent: bool,
}

impl MinimizerChecks {
    pub fn new(b: &SolutionBundle, principal: f64, mu: f64, cfg: &SolverConfig) -> Result<Self> {
        let r_bar = ball_radius(b.u.domain().dim(), mu)?;
        Ok(Self {
            negative_energy: b.report.energy < 0.0,
            below_principal: b.lambda < principal,
            principal_negative: principal < 0.0,
            inside_ball: b.report.kinetic.sqrt() < r_bar,
            residual_ok: b.pde_residual <= cfg.residual_tol,
            nonnegative: b.neg_part_norm <= 1e-8,
            unit_mass: (b.report.mass - 1.0).abs() <= cfg.mass_tol,
            multiplier_consistent: (b.lambda - b.lambda_fit).abs() <= 1e-6,
        })
    }

    pub fn all(&self) -> bool {
        self.negative_energy && self.below_principal && self.principal_negative && self.inside_ball && self.residual_ok && self.nonnegative && self.unit_mass && self.multiplier_consistent
    }
}

// ---- ground-state gate ------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateGate {
    /// `1 − A S⁻¹‖V₁*‖_{N/2} − B S^{−1/2}‖W₁‖_N`
    pub delta: f64,
    /// Upper bound on `‖∇u‖₂` for any negative-energy solution.
    pub gradient_bound: f64,
    pub ball_radius: f64,
    /// `R̄ − gradient_bound`
    pub margin: f64,
    /// `‖∇u‖₂` of the bundle, which must respect the bound.
    pub bundle_gradient: f64,
    pub passes: bool,
}

pub fn ground_state_gate(bundle: &SolutionBundle, pot: &SampledPotential, mu: f64) -> Result<GroundStateGate> {
    let dec = pot.decomposition().ok_or_else(|| Error::Missing("potential decomposition".into()))?;
    if !(bundle.report.energy < 0.0) {
        return Err(Error::InvalidArgument("the gate applies to negative-energy solutions".into()));
    }
    let dim = pot.domain().dim();
    let n = dim as f64;
    let s = sobolev_constant(dim)?;
    let norms = dec.norms();
    let (a, b) = (n / 4.0, (n - 2.0) / 2.0);
    let delta = 1.0 - a / s * norms.v1_star - b / s.sqrt() * norms.w1_dim;
    let r_bar = ball_radius(dim, mu)?;
    // δ x² < A v + B w x  ⇒  x below the positive root.
    let (v, w) = (norms.v2_star, norms.w2_sup);
    let bound = if delta > 0.0 { (b * w + (b * b * w * w + 4.0 * delta * a * v).sqrt()) / (2.0 * delta) } else { f64::INFINITY };
    let x = bundle.report.kinetic.sqrt();
    Ok(GroundStateGate {
        delta,
        gradient_bound: bound,
        ball_radius: r_bar,
        margin: r_bar - bound,
        bundle_gradient: x,
        passes: delta > 0.0 && bound <= r_bar && x <= bound,
    })
}

// ---- mountain pass ----------------------------------------------------------

/// Dilation `h^{N/2}w(hx)` snapped to an exact index shift on log grids.
fn snapped_dilation(w: &Field, h: f64) -> Result<(Field, f64)> {
    let d = w.domain();
    let h = match d.ratio() {
        Some(q) => {
            let j = (h.ln() / q.ln()).round();
            let snapped = q.powf(j);
            if index_shift(snapped, q).is_some() {
                snapped
            } else {
                h
            }
        }
        None => h,
    };
    Ok((dilate(w, h)?.normalized()?, h))
}

#[derive(Debug, Clone)]
pub struct Endpoints {
    pub h0: f64,
    pub h1: f64,
    pub low: Field,
    pub high: Field,
}

/// For `w` with `‖∇w‖₂² = R̄²`, find `h₀ < 1 < h₁` with
/// `‖∇w_{h₀}‖ < R̄`, `E(w_{h₀}) < E*`, `‖∇w_{h₁}‖ > R̄`, `E(w_{h₁}) < 0`.
pub fn mountain_pass_endpoints(w: &Field, pot: &SampledPotential, mu: f64, e_star: f64) -> Result<Endpoints> {
    let d = w.domain();
    let r_bar = ball_radius(d.dim(), mu)?;
    if ((w.grad_norm_sq() / (r_bar * r_bar)) - 1.0).abs() > 1e-3 || (w.l2_norm_sq() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument("w must be normalized with ‖∇w‖₂ = R̄".into()));
    }
    let mut h = 1.0;
    let mut low = None;
    for _ in 0..60 {
        h *= 0.5;
        let (wh, hs) = snapped_dilation(w, h)?;
        if wh.grad_norm_sq().sqrt() < r_bar && energy(&wh, pot, mu)? < e_star {
            low = Some((wh, hs));
            break;
        }
    }
    let mut h = 1.0;
    let mut high = None;
    let limit = d.r_max() / d.radial_nodes().map_or(d.r_max() / 1e3, |r| r[1]);
    while h < limit {
        h *= 1.25;
        let (wh, hs) = snapped_dilation(w, h)?;
        if wh.grad_norm_sq().sqrt() > r_bar && energy(&wh, pot, mu)? < 0.0 {
            high = Some((wh, hs));
            break;
        }
    }
    match (low, high) {
        (Some((low, h0)), Some((high, h1))) => Ok(Endpoints { h0, h1, low, high }),
        _ => Err(Error::NonConvergence("mountain-pass endpoint inequalities unreachable within the dilation range".into())),
    }
}

#[derive(Debug, Clone)]
pub struct MountainPassRun {
    pub bundle: SolutionBundle,
    pub endpoints: Endpoints,
    /// Path maximum energy after each sweep.
    pub path_maxima: Vec<f64>,
    pub distance_to_minimizer: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleChecks {
    /// `E* − tol ≤ E < threshold`
    pub in_window: bool,
    pub above_minimizer: bool,
    pub lambda_negative: bool,
    pub pohozaev_ok: bool,
    /// `L²` distance to the minimizer above 10⁻³.
    pub distinct: bool,
    pub residual_ok: bool,
    pub nonnegative: bool,
    pub unit_mass: bool,
    pub multiplier_consistent: bool,
}

impl SaddleChecks {
    pub fn new(saddle: &SolutionBundle, minimizer: &SolutionBundle, e_star: f64, threshold: f64, cfg: &SolverConfig) -> Result<Self> {
        let e = saddle.report.energy;
        Ok(Self {
            in_window: e >= e_star - cfg.path_tol && e < threshold,
            above_minimizer: e > minimizer.report.energy,
            lambda_negative: saddle.lambda < 0.0,
            pohozaev_ok: saddle.report.pohozaev.abs() < cfg.path_tol * saddle.report.kinetic.max(1.0),
            distinct: saddle.u.distance(&minimizer.u)? > 1e-3,
            residual_ok: saddle.pde_residual <= cfg.residual_tol,
            nonnegative: saddle.neg_part_norm <= 1e-8,
            unit_mass: (saddle.report.mass - 1.0).abs() <= cfg.mass_tol,
            multiplier_consistent: (saddle.lambda - saddle.lambda_fit).abs() <= 1e-6,
        })
    }

    pub fn all(&self) -> bool {
        self.in_window && self.above_minimizer && self.lambda_negative && self.pohozaev_ok && self.distinct && self.residual_ok && self.nonnegative && self.unit_mass && self.multiplier_consistent
    }
}

/// Piecewise-linear path through normalized nodes, reparametrized to equal
/// H¹-seminorm-plus-L² arc length.
fn reparametrize(d: &Domain, nodes: &[Vec<f64>], count: usize) -> Vec<Vec<f64>> {
    let dist = |a: &[f64], b: &[f64]| {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        (d.norm_sq(&diff) + d.kinetic(&diff)).sqrt()
    };
    let mut arc = vec![0.0];
    for k in 1..nodes.len() {
        arc.push(arc[k - 1] + dist(&nodes[k - 1], &nodes[k]));
    }
    let total = *arc.last().unwrap();
    (0..count)
        .map(|j| {
            let target = total * j as f64 / (count - 1) as f64;
            let k = arc.partition_point(|a| *a < target).clamp(1, nodes.len() - 1);
            let span = arc[k] - arc[k - 1];
            let t = if span > 0.0 { ((target - arc[k - 1]) / span).clamp(0.0, 1.0) } else { 0.0 };
            let mixed: Vec<f64> = nodes[k - 1].iter().zip(&nodes[k]).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            normalized_values(d, mixed)
        })
        .collect()
}

/// Discretized-path descent from the minimizer to a concentrated
/// negative-energy state, followed by a Newton polish at the path maximum.
/// The path maximum is also relaxed along its dilation fiber, which drives
/// the Pohozaev quantity to zero.
pub fn find_mountain_pass(pot: &SampledPotential, mu: f64, minimizer: &SolutionBundle, e_star: f64, cfg: &SolverConfig) -> Result<MountainPassRun> {
    cfg.validate()?;
    let d = pot.domain();
    require_radial(d)?;
    let dim = d.dim();
    if !(3..=5).contains(&dim) {
        return Err(Error::InvalidArgument("mountain-pass solver supports N ∈ {3, 4, 5}".into()));
    }
    let v = pot.v().values();
    let r_bar = ball_radius(dim, mu)?;
    let threshold = level_threshold(dim, mu, minimizer.report.energy)?;
    let u_mu = &minimizer.u;

    // Upper end: W̃_{t} with the bubble, pushed until it is outside the ball
    // at negative energy.
    let bubble = aubin_talenti_field(&BubbleParams { eps: cfg.bubble_eps * cfg.bubble_cutoff, cutoff: Some(cfg.bubble_cutoff) }, d)?;
    let t_star = mu.powf(-(dim as f64 - 2.0) / 4.0);
    let mut t_end = t_star;
    let mut top = tilde_combination(u_mu, &bubble, t_end)?;
    while !(energy(&top, pot, mu)? < 0.0 && top.grad_norm_sq().sqrt() > r_bar) {
        t_end *= 1.25;
        if t_end > 1e4 * t_star {
            return Err(Error::NonConvergence("no negative-energy state outside the ball along the bubble family".into()));
        }
        top = tilde_combination(u_mu, &bubble, t_end)?;
    }
    let (w, _) = {
        let h = r_bar / top.grad_norm_sq().sqrt();
        let wr = dilate(&top, h)?.normalized()?;
        (wr, h)
    };
    // Interpolated dilation is only approximately on the R̄ sphere; correct
    // the small gradient mismatch by one more rescaling.
    let w = {
        let h = r_bar / w.grad_norm_sq().sqrt();
        dilate(&w, h)?.normalized()?
    };
    let endpoints = mountain_pass_endpoints(&w, pot, mu, e_star)?;

    // Initial path: low → u_μ → W̃_t (t up to t_end).
    let k = cfg.path_nodes;
    let mut coarse: Vec<Vec<f64>> = Vec::new();
    for j in 0..4 {
        let s = j as f64 / 4.0;
        let mix: Vec<f64> = endpoints.low.values().iter().zip(u_mu.values()).map(|(a, b)| (1.0 - s) * a + s * b).collect();
        coarse.push(normalized_values(d, mix));
    }
    for j in 0..=4 * k {
        let t = t_end * j as f64 / (4 * k) as f64;
        coarse.push(tilde_combination(u_mu, &bubble, t)?.into_values());
    }
    let mut path = reparametrize(d, &coarse, k);

    let pre = Preconditioner::new(d, v, minimizer.lambda.min(0.0) - 1.0);
    let mut log = Vec::new();
    let mut maxima = Vec::new();
    let mut steps = vec![0.5 * cfg.step; k];
    let mut top_index = 0;
    for sweep in 0..cfg.path_sweeps {
        let energies: Vec<f64> = path.iter().map(|u| energy_values(d, v, u, mu)).collect();
        top_index = 0;
        for (i, e) in energies.iter().enumerate() {
            if *e > energies[top_index] {
                top_index = i;
            }
        }
        maxima.push(energies[top_index]);
        let top_field = Field::new(d, path[top_index].clone())?;
        let (gnorm, _) = tangential_norm(d, v, &path[top_index], mu);
        let slope = augmented_slope(&top_field, pot, mu)?;
        log.push(IterationRecord { iteration: sweep, energy: energies[top_index], gradient_norm: gnorm, pohozaev: slope });
        if top_index == 0 || top_index + 1 == k {
            return Err(Error::NonConvergence("path maximum moved to an endpoint".into()));
        }
        let scale = d.kinetic(&path[top_index]).sqrt().max(1.0);
        if gnorm / scale + slope.abs() / scale.powi(2) < cfg.path_tol {
            break;
        }
        // Descent of every interior node; endpoints stay fixed.
        let updated: Vec<(Vec<f64>, f64)> = (1..k - 1)
            .into_par_iter()
            .map(|i| {
                let u = &path[i];
                let (dir, weak, _) = pre.tangent_direction(d, v, u, mu);
                let slope: f64 = weak.iter().zip(&dir).map(|(a, b)| a * b).sum();
                let mut tau = (steps[i] * 2.0).min(cfg.step);
                while tau > 1e-10 {
                    let cand = absolute(d, &u.iter().zip(&dir).map(|(u, s)| u - tau * s).collect::<Vec<_>>());
                    if energy_values(d, v, &cand, mu) <= energies[i] - 1e-4 * tau * slope {
                        return (cand, tau);
                    }
                    tau *= cfg.backtrack;
                }
                (u.clone(), tau)
            })
            .collect();
        for (i, (u, tau)) in updated.into_iter().enumerate() {
            path[i + 1] = u;
            steps[i + 1] = tau;
        }
        // Dilation relaxation at the maximum: move to the top of its fiber.
        path[top_index] = relax_fiber(&path[top_index], d, pot, mu)?;
        // Past the ridge the energy is unbounded below and nodes would run
        // off to concentration.  Cut the path at the first node beyond the
        // maximum that is already a valid upper endpoint.
        let cut = (top_index + 1..k)
            .find(|&i| d.kinetic(&path[i]).sqrt() > r_bar && energy_values(d, v, &path[i], mu) < 0.0)
            .unwrap_or(k - 1);
        path.truncate(cut + 1);
        path = reparametrize(d, &path, k);
    }
    let (top, fiber_it) = fiber_descent(&path[top_index], d, pot, &pre, mu, cfg)?;
    let start = Field::new(d, top)?;
    let (_, lambda) = tangential_norm(d, v, start.values(), mu);
    let (u, _, newton_it) = newton_polish(&start, lambda, pot, mu, cfg.residual_tol, cfg.newton_max_iter)?;
    if u.negative_part_norm() > 1e-8 {
        return Err(Error::NonConvergence(format!("Newton converged to a sign-changing state (‖u⁻‖₂ = {:e})", u.negative_part_norm())));
    }
    let u = Field::new(d, absolute(d, u.values()))?;
    let distance = u.distance(u_mu)?;
    if distance < 1e-3 {
        return Err(Error::NonConvergence("path collapsed onto the local minimizer".into()));
    }
    let bundle = finish(u, SolutionKind::MountainPass, pot, mu, maxima.len() + fiber_it + newton_it, log)?;
    Ok(MountainPassRun { bundle, endpoints, path_maxima: maxima, distance_to_minimizer: distance, threshold })
}

/// Descent of the fiber maximum `u ↦ max_s Ẽ(u, s)`.  Its critical points
/// are the critical points of `E` on the upper branch of the Pohozaev set,
/// so this converges to the saddle rather than back to the minimizer.
fn fiber_descent(u0: &[f64], d: &std::sync::Arc<Domain>, pot: &SampledPotential, pre: &Preconditioner, mu: f64, cfg: &SolverConfig) -> Result<(Vec<f64>, usize)> {
    let v = pot.v().values();
    let mut u = relax_fiber(u0, d, pot, mu)?;
    let mut e = energy_values(d, v, &u, mu);
    let mut tau = cfg.step;
    let mut it = 0;
    while it < cfg.max_iter {
        let (gnorm, _) = tangential_norm(d, v, &u, mu);
        if gnorm < cfg.path_tol * d.kinetic(&u).sqrt().max(1.0) {
            break;
        }
        let (dir, weak, _) = pre.tangent_direction(d, v, &u, mu);
        let slope: f64 = weak.iter().zip(&dir).map(|(a, b)| a * b).sum();
        tau = (2.0 * tau).min(cfg.step);
        let mut moved = false;
        while tau > 1e-12 {
            let cand = absolute(d, &u.iter().zip(&dir).map(|(u, s)| u - tau * s).collect::<Vec<_>>());
            let cand = relax_fiber(&cand, d, pot, mu)?;
            let ec = energy_values(d, v, &cand, mu);
            if ec <= e - 1e-4 * tau * slope {
                u = cand;
                e = ec;
                moved = true;
                break;
            }
            tau *= cfg.backtrack;
        }
        it += 1;
        if !moved {
            break;
        }
    }
    Ok((u, it))
}

/// Maximize `Ẽ(u, s)` over a short bracket of exact index shifts (log
/// grids) or a golden-section search (other grids).
fn relax_fiber(u: &[f64], d: &std::sync::Arc<Domain>, pot: &SampledPotential, mu: f64) -> Result<Vec<f64>> {
    let field = Field::new(d, u.to_vec())?;
    let step = d.ratio().map_or(1e-2, |q| q.ln());
    let e = |j: i32| augmented_energy(&field, j as f64 * step, pot, mu);
    let mut best = (0, e(0)?);
    for dir in [1, -1] {
        let mut j = dir;
        loop {
            let ej = e(j)?;
            if ej <= best.1 {
                break;
            }
            best = (j, ej);
            j += dir;
            if j.abs() > 64 {
                break;
            }
        }
    }
    if best.0 == 0 {
        return Ok(u.to_vec());
    }
    Ok(dilate(&field, (best.0 as f64 * step).exp())?.normalized()?.into_values())
}
