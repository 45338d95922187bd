//! Potentials V, the weighted companion W = V·|x|, the constructive
//! splitting V = V₁ + V₂ with ‖V₁‖_{N/2}^{N/2} ≤ 3δ, and the Hölder/Sobolev
//! audits that bound the potential terms of the energy.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{sphere_area, Domain, Field};
use crate::error::{Error, Result};
use crate::functional::sobolev_constant;

/// Built-in radial potential families.  Sign conventions: a `Well` of depth
/// η > 0 is `-η` inside the ball; the other amplitudes are used as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PotentialFamily {
    Zero,
    Well { depth: f64, radius: f64 },
    Lorentzian { amplitude: f64, scale: f64 },
    CoulombCut { amplitude: f64, core: f64 },
    /// Piecewise-linear profile in `|x|`, zero beyond the last radius.
    Table { radii: Vec<f64>, values: Vec<f64> },
}

/// Analytic bound `|V(x)| ≤ c |x|^{-beta}` beyond the sampled region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEnvelope {
    pub c: f64,
    pub beta: f64,
}

/// Local summability of V near the origin, as declared by the user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalIntegrability {
    Bounded,
    Exponent(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub family: PotentialFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailEnvelope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local: Option<LocalIntegrability>,
}

impl PotentialSpec {
    pub fn new(family: PotentialFamily) -> Self {
        Self { family, tail: None, local: None }
    }

    pub fn well(depth: f64, radius: f64) -> Self {
        Self::new(PotentialFamily::Well { depth, radius })
    }

    pub fn lorentzian(amplitude: f64, scale: f64) -> Self {
        Self::new(PotentialFamily::Lorentzian { amplitude, scale })
    }

    pub fn coulomb_cut(amplitude: f64, core: f64) -> Self {
        Self::new(PotentialFamily::CoulombCut { amplitude, core })
    }

    pub fn zero() -> Self {
        Self::new(PotentialFamily::Zero)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        match &self.family {
            PotentialFamily::Zero => {}
            PotentialFamily::Well { depth, radius } => {
                if !depth.is_finite() || !(*radius > 0.0) {
                    return bad("well needs a finite depth and a positive radius");
                }
            }
            PotentialFamily::Lorentzian { amplitude, scale } => {
                if !amplitude.is_finite() || !(*scale > 0.0) {
                    return bad("lorentzian needs a finite amplitude and a positive scale");
                }
            }
            PotentialFamily::CoulombCut { amplitude, core } => {
                if !amplitude.is_finite() || !(*core > 0.0) {
                    return bad("coulomb-cut needs a finite amplitude and a positive core radius");
                }
            }
            PotentialFamily::Table { radii, values } => {
                if radii.len() < 2 || radii.len() != values.len() {
                    return bad("table needs at least two (radius, value) rows");
                }
                if radii.windows(2).any(|w| !(w[1] > w[0])) || radii[0] < 0.0 {
                    return bad("table radii must be increasing and nonnegative");
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return bad("table values must be finite");
                }
            }
        }
        if let Some(t) = self.tail {
            if !(t.c >= 0.0 && t.beta > 0.0) {
                return bad("tail envelope needs c >= 0 and beta > 0");
            }
        }
        Ok(())
    }

    /// V at radius `r`.
    pub fn eval(&self, r: f64) -> f64 {
        match &self.family {
            PotentialFamily::Zero => 0.0,
            PotentialFamily::Well { depth, radius } => {
                if r < *radius {
                    -depth
                } else {
                    0.0
                }
            }
            PotentialFamily::Lorentzian { amplitude, scale } => {
                let t = r / scale;
                amplitude / (1.0 + t * t)
            }
            PotentialFamily::CoulombCut { amplitude, core } => amplitude / r.max(*core),
            PotentialFamily::Table { radii, values } => {
                let last = radii.len() - 1;
                if r > radii[last] {
                    return 0.0;
                }
                if r <= radii[0] {
                    return values[0];
                }
                let k = radii.partition_point(|&x| x <= r).min(last).max(1);
                let (r0, r1) = (radii[k - 1], radii[k]);
                let t = (r - r0) / (r1 - r0);
                values[k - 1] * (1.0 - t) + values[k] * t
            }
        }
    }

    /// Radii where V jumps.
    pub fn jumps(&self) -> Vec<f64> {
        match &self.family {
            PotentialFamily::Well { radius, .. } => vec![*radius],
            PotentialFamily::Table { radii, values } if values[values.len() - 1] != 0.0 => {
                vec![radii[radii.len() - 1]]
            }
            _ => Vec::new(),
        }
    }

    /// Radius outside which V vanishes identically, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.family {
            PotentialFamily::Zero => Some(0.0),
            PotentialFamily::Well { radius, .. } => Some(*radius),
            PotentialFamily::Table { radii, .. } => Some(radii[radii.len() - 1]),
            _ => None,
        }
    }

    /// Natural length scale; used as the first annulus of the V₂ audit.
    pub fn length_scale(&self) -> f64 {
        match &self.family {
            PotentialFamily::Zero => 1.0,
            PotentialFamily::Well { radius, .. } => *radius,
            PotentialFamily::Lorentzian { scale, .. } => *scale,
            PotentialFamily::CoulombCut { core, .. } => *core,
            PotentialFamily::Table { radii, .. } => radii[radii.len() - 1] / 4.0,
        }
    }

    /// Tail envelope: the declared one, else the family's own.
    pub fn envelope(&self) -> Option<TailEnvelope> {
        if self.tail.is_some() {
            return self.tail;
        }
        match &self.family {
            PotentialFamily::Lorentzian { amplitude, scale } => {
                Some(TailEnvelope { c: amplitude.abs() * scale * scale, beta: 2.0 })
            }
            PotentialFamily::CoulombCut { amplitude, .. } => Some(TailEnvelope { c: amplitude.abs(), beta: 1.0 }),
            _ => None,
        }
    }

    pub fn local_integrability(&self) -> LocalIntegrability {
        self.local.unwrap_or(LocalIntegrability::Bounded)
    }
}

/// V and W sampled on a domain, optionally with a decomposition attached.
#[derive(Debug, Clone)]
pub struct SampledPotential {
    spec: PotentialSpec,
    v: Field,
    w: Field,
    decomposition: Option<Arc<Decomposition>>,
}

// 8-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

pub(crate) fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES.iter().zip(&GL_WEIGHTS).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Sample V and W = V·|x| on a domain.  On radial grids a cell that
/// straddles a jump of V takes the volume average of V over the cell, which
/// keeps the discrete operators second-order accurate across the jump.
pub fn sample_potential(spec: &PotentialSpec, domain: &Arc<Domain>) -> Result<SampledPotential> {
    spec.validate()?;
    let jumps = spec.jumps();
    let dim = domain.dim() as i32;
    let mut v = Vec::with_capacity(domain.len());
    for (i, &r) in domain.radius().iter().enumerate() {
        let mut value = spec.eval(r);
        if let Some((a, b)) = domain.cell_bounds(i) {
            let inside: Vec<f64> = jumps.iter().copied().filter(|&j| j > a && j < b).collect();
            if !inside.is_empty() {
                let mut cuts = vec![a];
                cuts.extend(inside);
                cuts.push(b);
                let mut num = 0.0;
                for w in cuts.windows(2) {
                    num += gauss_legendre(w[0], w[1], |s| spec.eval(s) * s.powi(dim - 1));
                }
                let den = (b.powi(dim) - a.powi(dim)) / dim as f64;
                value = num / den;
            }
        }
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("potential at radius {r}")));
        }
        v.push(value);
    }
    let w: Vec<f64> = v.iter().zip(domain.radius()).map(|(v, r)| v * r).collect();
    Ok(SampledPotential {
        spec: spec.clone(),
        v: Field::new(domain, v)?,
        w: Field::new(domain, w)?,
        decomposition: None,
    })
}

impl SampledPotential {
    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn domain(&self) -> &Arc<Domain> {
        self.v.domain()
    }

    pub fn v(&self) -> &Field {
        &self.v
    }

    pub fn w(&self) -> &Field {
        &self.w
    }

    pub fn decomposition(&self) -> Option<&Decomposition> {
        self.decomposition.as_deref()
    }

    pub fn with_decomposition(mut self, d: Decomposition) -> Self {
        self.decomposition = Some(Arc::new(d));
        self
    }

    /// Same potential with the decomposition computed and attached.
    pub fn decomposed(self, exponent: f64, delta: f64) -> Result<Self> {
        let d = decompose_shells(&self, exponent, delta)?;
        Ok(self.with_decomposition(d))
    }
}

pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    f.lp_norm(p)
}

// ---- shell decomposition --------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitCase {
    /// The part vanishes identically.
    Empty,
    /// Compactly supported: one threshold.
    Compact,
    /// Shells capturing tail mass δ/2^k.
    Shells,
}

/// Construction record for one sign part (V⁺ or V⁻).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellRecord {
    pub case: SplitCase,
    /// Share of δ assigned to this sign part.
    pub budget: f64,
    /// Outer radii `R_0, R_1, …`; shells beyond `R_max` come from the envelope.
    pub radii: Vec<f64>,
    /// Thresholds `η_0, η_1, …` (one per shell).
    pub thresholds: Vec<f64>,
    /// `∫_{Ω_k} V^r` per shell (quadrature inside the grid, envelope outside).
    pub shell_mass: Vec<f64>,
    /// Shells that had to take one cell more than the δ/2^k budget allowed.
    pub forced_cells: usize,
    /// Achieved `∫ V₁^{N/2}` for this part.
    pub achieved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCertificate {
    pub delta: f64,
    pub exponent: f64,
    /// `‖V₁‖_{N/2}^{N/2}` by quadrature.
    pub achieved: f64,
    pub bound: f64,
    pub positive: ShellRecord,
    pub negative: ShellRecord,
    /// Outer radii of the audit annuli (first is a ball).
    pub annulus_radii: Vec<f64>,
    /// `sup |V₂|` per audit annulus.
    pub annulus_sups: Vec<f64>,
    pub passes: bool,
}

impl DecompositionCertificate {
    /// True when the annulus sups never increase and the last one is below
    /// `fraction` of the first.  Leading regions where V₁ took everything
    /// (sup zero) are skipped, so the reference is the first nonzero sup.
    pub fn sups_vanish(&self, fraction: f64) -> bool {
        if self.annulus_sups.len() < 2 {
            return false;
        }
        let start = self.annulus_sups.iter().position(|&x| x > 0.0);
        let Some(start) = start else { return true };
        let s = &self.annulus_sups[start..];
        let monotone = s.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        monotone && s[s.len() - 1] < fraction * s[0]
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub v1: Field,
    pub v2: Field,
    pub w1: Field,
    pub w2: Field,
    pub certificate: DecompositionCertificate,
}

/// Norms of the decomposition pieces used by the level and gate formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionNorms {
    pub v1_half_dim: f64,
    pub v1_minus_half_dim: f64,
    pub w1_dim: f64,
    pub v2_sup: f64,
    pub v2_minus_sup: f64,
    pub w2_sup: f64,
    /// `‖[(N-4)V₁]⁺‖_{N/2}`.
    pub v1_star: f64,
    /// `‖[(N-4)V₂]⁺‖_∞`.
    pub v2_star: f64,
}

impl Decomposition {
    pub fn norms(&self) -> DecompositionNorms {
        let d = self.v1.domain();
        let n = d.dim() as f64;
        let v1 = self.v1.values();
        let v2 = self.v2.values();
        let neg = |x: &f64| (-x).max(0.0);
        let star = |x: &f64| ((n - 4.0) * x).max(0.0);
        let v1m: Vec<f64> = v1.iter().map(neg).collect();
        let v1s: Vec<f64> = v1.iter().map(star).collect();
        DecompositionNorms {
            v1_half_dim: d.lp_norm(v1, n / 2.0),
            v1_minus_half_dim: d.lp_norm(&v1m, n / 2.0),
            w1_dim: d.lp_norm(self.w1.values(), n),
            v2_sup: d.lp_norm(v2, f64::INFINITY),
            v2_minus_sup: v2.iter().map(neg).fold(0.0, f64::max),
            w2_sup: d.lp_norm(self.w2.values(), f64::INFINITY),
            v1_star: d.lp_norm(&v1s, n / 2.0),
            v2_star: v2.iter().map(star).fold(0.0, f64::max),
        }
    }
}

/// Split V = V₁ + V₂ by the shell construction, applied to V⁺ and V⁻
/// separately with δ/2 each (so the combined bound is still 3δ).
pub fn decompose_shells(pot: &SampledPotential, exponent: f64, delta: f64) -> Result<Decomposition> {
    let domain = pot.domain();
    let dim = domain.dim() as f64;
    if !(exponent >= dim / 2.0) || !exponent.is_finite() {
        return Err(Error::InvalidArgument(format!("exponent r = {exponent} below N/2")));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let v = pot.v().values();
    let plus: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    let minus: Vec<f64> = v.iter().map(|x| (-x).max(0.0)).collect();
    let has_plus = plus.iter().any(|&x| x > 0.0);
    let has_minus = minus.iter().any(|&x| x > 0.0);
    let share = if has_plus && has_minus { delta / 2.0 } else { delta };

    let spec = pot.spec();
    let (pos_mask, pos_rec) = split_part(domain, spec, &plus, exponent, share)?;
    let (neg_mask, neg_rec) = split_part(domain, spec, &minus, exponent, share)?;

    let v1: Vec<f64> = (0..v.len()).map(|i| if pos_mask[i] || neg_mask[i] { v[i] } else { 0.0 }).collect();
    let v2: Vec<f64> = v.iter().zip(&v1).map(|(a, b)| a - b).collect();
    let r = domain.radius();
    let w1: Vec<f64> = v1.iter().zip(r).map(|(a, b)| a * b).collect();
    let w2: Vec<f64> = pot.w().values().iter().zip(&w1).map(|(a, b)| a - b).collect();

    let achieved: f64 = domain.integrate(&v1.iter().map(|x| x.abs().powf(dim / 2.0)).collect::<Vec<_>>());
    let (annulus_radii, annulus_sups) = annulus_sups(domain, &v2, spec.length_scale());
    let bound = 3.0 * delta;
    let certificate = DecompositionCertificate {
        delta,
        exponent,
        achieved,
        bound,
        positive: pos_rec,
        negative: neg_rec,
        annulus_radii,
        annulus_sups,
        passes: achieved <= bound,
    };
    Ok(Decomposition {
        v1: Field::new(domain, v1)?,
        v2: Field::new(domain, v2)?,
        w1: Field::new(domain, w1)?,
        w2: Field::new(domain, w2)?,
        certificate,
    })
}

/// Sup of |V₂| over the ball of radius `base` and the dyadic annuli
/// `[2^k base, 2^{k+1} base)` that meet the grid.
fn annulus_sups(domain: &Domain, v2: &[f64], base: f64) -> (Vec<f64>, Vec<f64>) {
    let r = domain.radius();
    let r_max = domain.r_max();
    let mut radii = vec![base];
    while *radii.last().unwrap() < r_max {
        let next = radii.last().unwrap() * 2.0;
        radii.push(next.min(r_max));
    }
    let mut sups = vec![0.0; radii.len()];
    for (ri, vi) in r.iter().zip(v2) {
        let k = radii.partition_point(|&b| b <= *ri).min(radii.len() - 1);
        sups[k] = f64::max(sups[k], vi.abs());
    }
    (radii, sups)
}

/// Threshold for the mass-limited cut: the smallest node value `η` such that
/// `Σ_{g_i ≥ η} w_i g_i^{N/2} ≤ budget` over the selected nodes.
fn smallest_threshold(weights: &[f64], g: &[f64], nodes: &[usize], half_dim: f64, budget: f64) -> f64 {
    let mut order: Vec<usize> = nodes.iter().copied().filter(|&i| g[i] > 0.0).collect();
    if order.is_empty() {
        return 1.0;
    }
    order.sort_by(|&a, &b| g[b].total_cmp(&g[a]).then(a.cmp(&b)));
    let top = g[order[0]];
    let mut eta = top * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    let mut acc = 0.0;
    let mut k = 0;
    while k < order.len() {
        // Take a whole group of tied values at once.
        let value = g[order[k]];
        let mut group = 0.0;
        let mut j = k;
        while j < order.len() && g[order[j]] == value {
            group += weights[order[j]] * value.powf(half_dim);
            j += 1;
        }
        if acc + group > budget {
            break;
        }
        acc += group;
        eta = value;
        k = j;
    }
    eta
}

fn envelope_mass(dim: f64, env: TailEnvelope, exponent: f64, a: f64, b: f64) -> f64 {
    // ∫_{a<|x|<b} (c|x|^{-β})^r dx for βr > N.
    let p = dim - env.beta * exponent;
    let area = sphere_area(dim as usize);
    let outer = if b.is_infinite() { 0.0 } else { b.powf(p) };
    area * env.c.powf(exponent) * (a.powf(p) - outer) / (-p)
}

fn split_part(
    domain: &Arc<Domain>,
    spec: &PotentialSpec,
    g: &[f64],
    exponent: f64,
    budget: f64,
) -> Result<(Vec<bool>, ShellRecord)> {
    let n = g.len();
    let dim = domain.dim() as f64;
    let half_dim = dim / 2.0;
    let w = domain.weights();
    let r = domain.radius();
    let mut mask = vec![false; n];
    if g.iter().all(|&x| x == 0.0) {
        let rec = ShellRecord {
            case: SplitCase::Empty,
            budget,
            radii: vec![],
            thresholds: vec![],
            shell_mass: vec![],
            forced_cells: 0,
            achieved: 0.0,
        };
        return Ok((mask, rec));
    }
    let achieved_of = |mask: &[bool]| -> f64 {
        (0..n).filter(|&i| mask[i]).map(|i| w[i] * g[i].powf(half_dim)).sum()
    };

    if let Some(support) = spec.support_radius() {
        let all: Vec<usize> = (0..n).collect();
        let eta = smallest_threshold(w, g, &all, half_dim, budget);
        for i in 0..n {
            mask[i] = g[i] >= eta && g[i] > 0.0;
        }
        let rec = ShellRecord {
            case: SplitCase::Compact,
            budget,
            radii: vec![support],
            thresholds: vec![eta],
            shell_mass: vec![(0..n).map(|i| w[i] * g[i].powf(exponent)).sum()],
            forced_cells: 0,
            achieved: achieved_of(&mask),
        };
        return Ok((mask, rec));
    }

    let env = spec
        .envelope()
        .ok_or_else(|| Error::Missing("tail envelope for a potential without compact support".into()))?;
    if !(env.beta * exponent > dim) {
        return Err(Error::InvalidArgument(format!(
            "envelope |x|^-{} is not in L^{} at infinity",
            env.beta, exponent
        )));
    }
    let r_max = domain.r_max();
    // Suffix sums of ∫ V^r over the grid, node by node from the outside.
    let mass: Vec<f64> = (0..n).map(|i| w[i] * g[i].powf(exponent)).collect();
    let outside = envelope_mass(dim, env, exponent, r_max, f64::INFINITY);
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + mass[i];
    }
    let cell_outer = |i: usize| domain.cell_bounds(i).map(|c| c.1).unwrap_or(r[i]);

    // R_0: smallest radius whose complement carries at most the budget.
    let mut radii = Vec::new();
    let mut thresholds = Vec::new();
    let mut shell_mass = Vec::new();
    let mut forced = 0usize;
    let (first_outside, r0) = if outside > budget {
        let p = dim - env.beta * exponent;
        let area = sphere_area(dim as usize);
        let r0 = (budget * (-p) / (area * env.c.powf(exponent))).powf(1.0 / p);
        (n, r0.max(r_max))
    } else {
        let k = (0..=n).find(|&k| suffix[k] + outside <= budget).unwrap_or(n);
        let r0 = if k == 0 { 0.0 } else { cell_outer(k - 1) };
        (k, r0)
    };
    let core: Vec<usize> = (0..first_outside).collect();
    let eta0 = smallest_threshold(w, g, &core, half_dim, budget);
    for &i in &core {
        mask[i] = g[i] >= eta0 && g[i] > 0.0;
    }
    radii.push(r0);
    thresholds.push(eta0);
    shell_mass.push(core.iter().map(|&i| mass[i]).sum());

    let eta_k = |k: usize| -> f64 {
        if exponent > half_dim {
            (1.0 / k as f64).powf(1.0 / (exponent - half_dim))
        } else {
            0.5f64.powi(k as i32)
        }
    };

    let mut next = first_outside;
    let mut k = 1usize;
    let mut radius = r0;
    // Shells inside the grid.
    while next < n {
        let cap = budget / 2f64.powi(k as i32);
        let mut acc = 0.0;
        let start = next;
        while next < n && acc + mass[next] <= cap {
            acc += mass[next];
            next += 1;
        }
        if next == start {
            acc += mass[next];
            next += 1;
            forced += 1;
        }
        let eta = eta_k(k);
        for i in start..next {
            mask[i] = g[i] >= eta && g[i] > 0.0;
        }
        radius = cell_outer(next - 1);
        radii.push(radius);
        thresholds.push(eta);
        shell_mass.push(acc);
        k += 1;
    }
    // Shells beyond the grid follow from the envelope.  They carry no nodes;
    // the record shows where the construction continues.
    let p = dim - env.beta * exponent;
    let area = sphere_area(dim as usize);
    while k < 64 && radius.is_finite() {
        let cap = budget / 2f64.powi(k as i32);
        let a = radius.max(r_max);
        let remaining = a.powf(p) - cap * (-p) / (area * env.c.powf(exponent));
        let b = if remaining <= 0.0 { f64::INFINITY } else { remaining.powf(1.0 / p) };
        radii.push(if b.is_finite() { b } else { f64::MAX });
        thresholds.push(eta_k(k));
        shell_mass.push(envelope_mass(dim, env, exponent, a, b));
        radius = b;
        k += 1;
    }
    let rec = ShellRecord {
        case: SplitCase::Shells,
        budget,
        radii,
        thresholds,
        shell_mass,
        forced_cells: forced,
        achieved: achieved_of(&mask),
    };
    Ok((mask, rec))
}

// ---- inequality audit -------------------------------------------------------

/// Left and right sides of the four Hölder/Sobolev bounds on the potential
/// terms, in the order (V₁u², V₁ u ∇u·x, V₂u², V₂ u ∇u·x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityAudit {
    pub lhs: [f64; 4],
    pub rhs: [f64; 4],
    pub violated: [bool; 4],
}

impl InequalityAudit {
    pub fn holds(&self) -> bool {
        !self.violated.iter().any(|&v| v)
    }
}

pub fn inequality_audit(u: &Field, pot: &SampledPotential) -> Result<InequalityAudit> {
    let dec = pot.decomposition().ok_or_else(|| Error::Missing("potential decomposition".into()))?;
    u.check_same(pot.v())?;
    let d = u.domain();
    let dim = d.dim();
    let s = sobolev_constant(dim)?;
    let norms = dec.norms();
    let uv = u.values();
    let xgrad = d.radial_derivative(uv);
    let grad_sq = u.grad_norm_sq();
    let grad = grad_sq.sqrt();
    let mass = u.l2_norm();
    let quad = |vv: &[f64]| -> f64 {
        d.integrate(&vv.iter().zip(uv).map(|(a, b)| a * b * b).collect::<Vec<_>>())
    };
    let virial = |vv: &[f64]| -> f64 {
        d.integrate(&(0..uv.len()).map(|i| vv[i] * uv[i] * xgrad[i]).collect::<Vec<_>>())
    };
    let lhs = [
        quad(dec.v1.values()).abs(),
        virial(dec.v1.values()).abs(),
        quad(dec.v2.values()).abs(),
        virial(dec.v2.values()).abs(),
    ];
    let rhs = [
        norms.v1_half_dim * grad_sq / s,
        norms.w1_dim * grad_sq / s.sqrt(),
        norms.v2_sup * mass * mass,
        norms.w2_sup * mass * grad,
    ];
    let mut violated = [false; 4];
    for k in 0..4 {
        violated[k] = lhs[k] > rhs[k] + 1e-8 * (1.0 + rhs[k]);
    }
    Ok(InequalityAudit { lhs, rhs, violated })
}

// ---- scaling continuity -----------------------------------------------------

/// `‖s^α V(·/s) − V‖_p` for each `s`.
pub fn scaling_continuity(spec: &PotentialSpec, domain: &Arc<Domain>, alpha: f64, p: f64, s_list: &[f64]) -> Result<Vec<f64>> {
    if !(p >= 1.0) || p.is_infinite() {
        return Err(Error::InvalidArgument(format!("p = {p} must lie in [1, ∞)")));
    }
    let r = domain.radius();
    let base: Vec<f64> = r.iter().map(|&x| spec.eval(x)).collect();
    s_list
        .iter()
        .map(|&s| {
            if !(s > 0.0) {
                return Err(Error::InvalidArgument(format!("scale {s} must be positive")));
            }
            if s == 1.0 {
                return Ok(0.0);
            }
            let amp = s.powf(alpha);
            let diff: Vec<f64> = r.iter().zip(&base).map(|(&x, &v)| amp * spec.eval(x / s) - v).collect();
            Ok(domain.lp_norm(&diff, p))
        })
        .collect()
}

/// Does the declared local summability meet the dimension-dependent bar for
/// the mountain-pass theorem (r > 2, 4, 10 for N = 3, 4, 5, or bounded)?
pub fn local_integrability_gate(local: LocalIntegrability, dim: usize) -> bool {
    match local {
        LocalIntegrability::Bounded => true,
        LocalIntegrability::Exponent(r) => {
            let bar = match dim {
                3 => 2.0,
                4 => 4.0,
                5 => 10.0,
                _ => return false,
            };
            r > bar
        }
    }
}
