//! Cut-off Aubin-Talenti bubbles, their norm asymptotics, and the
//! upper-bound sweep for the mountain-pass level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::domain::{dilate, Domain, Field};
use crate::error::{Error, Result};
use crate::functional::{bubble_profile, critical_exponent, energy, level_threshold, sobolev_constant};
use crate::potentials::{gauss_legendre, SampledPotential};

/// Bubble of scale `eps`, optionally cut off smoothly between `R` and `3R/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub eps: f64,
    pub cutoff: Option<f64>,
}

/// Quintic smoothstep: 1 on `[0, R]`, 0 beyond `3R/2`.
pub fn cutoff_profile(r: f64, radius: f64) -> f64 {
    let x = (r - radius) / (0.5 * radius);
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

pub fn bubble_value(dim: usize, params: &BubbleParams, r: f64) -> f64 {
    let eta = params.cutoff.map_or(1.0, |c| cutoff_profile(r, c));
    if eta == 0.0 {
        0.0
    } else {
        eta * bubble_profile(dim, params.eps, r)
    }
}

fn check_resolution(d: &Domain, eps: f64) -> Result<()> {
    let Some(r) = d.radial_nodes() else {
        return Err(Error::InvalidDomain("bubbles need a radial grid".into()));
    };
    let mut widest = 0.0_f64;
    for i in 0..r.len() - 1 {
        if r[i] > eps {
            break;
        }
        widest = widest.max(r[i + 1] - r[i]);
    }
    if r[0] > eps / 8.0 || widest > eps / 8.0 {
        return Err(Error::InvalidDomain(format!("grid does not resolve the bubble core at ε = {eps:e}")));
    }
    Ok(())
}

pub fn aubin_talenti_field(params: &BubbleParams, d: &std::sync::Arc<Domain>) -> Result<Field> {
    if !(params.eps > 0.0) {
        return Err(Error::InvalidArgument(format!("bubble scale must be positive, got {}", params.eps)));
    }
    if let Some(c) = params.cutoff {
        if !(c > 0.0) || 1.5 * c >= d.r_max() {
            return Err(Error::InvalidArgument(format!("cutoff radius {c} must satisfy 0 < 3R/2 < R_max")));
        }
    }
    check_resolution(d, params.eps)?;
    Field::from_radial(d, |r| bubble_value(d.dim(), params, r))
}

/// `∫_{r₀}^∞ f(r) dr` for integrands with algebraic decay, via `r = r₀/x`.
fn tail_integral(r0: f64, f: impl Fn(f64) -> f64) -> f64 {
    let pieces = 16;
    (0..pieces)
        .map(|k| {
            let (a, b) = (k as f64 / pieces as f64, (k + 1) as f64 / pieces as f64);
            gauss_legendre(a, b, |x| if x <= 0.0 { 0.0 } else { f(r0 / x) * r0 / (x * x) })
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleMeasurement {
    pub eps: f64,
    pub gradient: f64,
    pub critical: f64,
    pub mass: f64,
    /// `(p, ‖U_ε‖_p^p)`
    pub lp: Vec<(f64, f64)>,
    /// `∫u_μ U_ε^{2*−1}`
    pub interaction: Option<f64>,
    /// `S^{N/2} − ‖∇U_ε‖²`, accumulated only where the cutoff acts.
    pub gradient_deficit: f64,
    /// `S^{N/2} − ‖U_ε‖_{2*}^{2*}`, same construction.
    pub critical_deficit: f64,
}

/// Compare with the uncut profile on the same nodes, so the core
/// discretization error cancels exactly and only the cut region and the
/// analytic tail beyond the grid contribute.
pub fn measure_bubble(params: &BubbleParams, d: &std::sync::Arc<Domain>, p_list: &[f64], u_mu: Option<&Field>) -> Result<BubbleMeasurement> {
    let cut = aubin_talenti_field(params, d)?;
    let dim = d.dim();
    let n = dim as f64;
    let p = critical_exponent(dim);
    let whole = Field::from_radial(d, |r| bubble_profile(dim, params.eps, r))?;
    let (c, w) = (d.couplings().expect("radial"), d.weights());
    let (a, b) = (whole.values(), cut.values());
    let len = a.len();
    let mut grad_def = 0.0;
    for i in 0..len - 1 {
        let (da, db) = (a[i + 1] - a[i], b[i + 1] - b[i]);
        grad_def += c[i] * (da - db) * (da + db);
    }
    let mut crit_def = 0.0;
    for i in 0..len {
        if a[i] != b[i] {
            crit_def += w[i] * (a[i].powf(p) - b[i].powf(p));
        }
    }
    let area = crate::domain::sphere_area(dim);
    let eps = params.eps;
    let amp = (n * (n - 2.0) * eps * eps).powf((n - 2.0) / 4.0);
    let r_last = d.radial_nodes().expect("radial")[len - 1];
    grad_def += tail_integral(r_last, |r| {
        area * (amp * (n - 2.0)).powi(2) * r.powf(n + 1.0) * (eps * eps + r * r).powf(-n)
    });
    crit_def += tail_integral(d.r_max(), |r| area * amp.powf(p) * (eps * eps + r * r).powf(-n) * r.powf(n - 1.0));
    let interaction = match u_mu {
        Some(u) => {
            u.check_same(&cut)?;
            Some(d.integrate(&u.values().iter().zip(b).map(|(u, b)| u * b.powf(p - 1.0)).collect::<Vec<_>>()))
        }
        None => None,
    };
    Ok(BubbleMeasurement {
        eps,
        gradient: cut.grad_norm_sq(),
        critical: cut.lp_norm(p)?.powf(p),
        mass: cut.l2_norm_sq(),
        lp: p_list.iter().map(|&q| Ok((q, cut.lp_norm(q)?.powf(q)))).collect::<Result<_>>()?,
        interaction,
        gradient_deficit: grad_def,
        critical_deficit: crit_def,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub quantity: String,
    pub slope: f64,
    /// Half width of the 95% interval on the slope.
    pub half_width: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub points: usize,
    pub passes: bool,
}

/// Least-squares line through `(ln x, ln y)`: slope, 95% half width, and
/// the residual sum of squares.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() < 3 || x.len() != y.len() {
        return Err(Error::InvalidArgument("slope fit needs at least 3 points".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let dof = m - 2.0;
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::InvalidArgument(e.to_string()))?.inverse_cdf(0.975);
    Ok((slope, t * (rss / dof / sxx).sqrt(), rss))
}

/// Residual of the one-parameter model `ln y = c + ln g(x)`.
fn model_residual(x: &[f64], y: &[f64], g: impl Fn(f64) -> f64) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(x, y)| y.ln() - g(*x).ln()).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    d.iter().map(|v| (v - mean).powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleReport {
    pub dim: usize,
    pub cutoff: f64,
    pub sobolev_power: f64,
    pub measurements: Vec<BubbleMeasurement>,
    /// Number of smallest scales entering each fit.
    pub fit_window: usize,
    pub fits: Vec<SlopeFit>,
    /// N = 4 only: residuals of the `ε²|ln ε|` and `ε²` mass models.
    pub log_model_residual: Option<f64>,
    pub pure_model_residual: Option<f64>,
}

impl BubbleReport {
    pub fn passes(&self) -> bool {
        self.fits.iter().all(|f| f.passes) && self.log_model_residual.zip(self.pure_model_residual).map_or(true, |(l, p)| l < p)
    }
}

/// Default cutoff radius for the upper-bound sweep and the path seed.
pub const DEFAULT_CUTOFF: f64 = 2.0;

/// Default scales as multiples of the cutoff radius.  The list runs four
/// halvings below the smallest decade: the sweep maximum only turns back up
/// toward the threshold below ε ≈ 0.004, and the fit window sits where
/// higher-order corrections are small.
pub const DEFAULT_EPS_FACTORS: [f64; 9] = [0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125, 0.0015625, 0.00078125];

pub fn bubble_norm_report(
    eps_list: &[f64],
    cutoff: f64,
    d: &std::sync::Arc<Domain>,
    p_list: &[f64],
    u_mu: Option<&Field>,
    fit_window: usize,
) -> Result<BubbleReport> {
    if eps_list.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 scales".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("scales must be strictly decreasing".into()));
    }
    let dim = d.dim();
    let n = dim as f64;
    let measurements: Vec<BubbleMeasurement> = eps_list
        .par_iter()
        .map(|&eps| measure_bubble(&BubbleParams { eps, cutoff: Some(cutoff) }, d, p_list, u_mu))
        .collect::<Result<_>>()?;
    let window = fit_window.clamp(3, measurements.len());
    let tail = &measurements[measurements.len() - window..];
    let x: Vec<f64> = tail.iter().map(|m| m.eps).collect();
    let mut fits = Vec::new();
    let mut push = |name: &str, y: Vec<f64>, predicted: f64, tolerance: f64| -> Result<()> {
        let (slope, half_width, _) = fit_loglog(&x, &y)?;
        fits.push(SlopeFit {
            quantity: name.into(),
            slope,
            half_width,
            predicted,
            tolerance,
            points: x.len(),
            passes: (slope - predicted).abs() <= tolerance,
        });
        Ok(())
    };
    push("gradient-deficit", tail.iter().map(|m| m.gradient_deficit).collect(), n - 2.0, 0.15)?;
    push("critical-deficit", tail.iter().map(|m| m.critical_deficit).collect(), n, 0.3)?;
    let masses: Vec<f64> = tail.iter().map(|m| m.mass).collect();
    let (mut log_res, mut pure_res) = (None, None);
    match dim {
        3 => push("mass", masses, 1.0, 0.1)?,
        5 => push("mass", masses, 2.0, 0.1)?,
        _ => {
            log_res = Some(model_residual(&x, &masses, |e| e * e * e.ln().abs()));
            pure_res = Some(model_residual(&x, &masses, |e| e * e));
        }
    }
    if tail.iter().all(|m| m.interaction.is_some()) {
        push("interaction", tail.iter().map(|m| m.interaction.unwrap()).collect(), (n - 2.0) / 2.0, 0.1)?;
    }
    Ok(BubbleReport {
        dim,
        cutoff,
        sobolev_power: sobolev_constant(dim)?.powf(n / 2.0),
        measurements,
        fit_window: window,
        fits,
        log_model_residual: log_res,
        pure_model_residual: pure_res,
    })
}

// ---- upper-bound sweep ------------------------------------------------------

/// `W̃ = s^{(N−2)/2} W(s x)` with `W = u + tU` and `s = ‖W‖₂`, renormalized
/// after interpolation so the mass is exactly one.
pub fn tilde_combination(u: &Field, bubble: &Field, t: f64) -> Result<Field> {
    let w = u.axpy(t, bubble)?;
    let s = w.l2_norm();
    if !(s > 0.0) {
        return Err(Error::InvalidArgument("zero combination".into()));
    }
    dilate(&w, s)?.normalized()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub t_max: f64,
    pub max_energy: f64,
    pub interior: bool,
    pub below_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundCertificate {
    pub m_mu: f64,
    pub threshold: f64,
    pub rows: Vec<SweepRow>,
    /// `M(ε)` grows as ε shrinks over the two smallest scales.
    pub decreasing_in_eps: bool,
    pub passes: bool,
}

fn golden_max(mut a: f64, mut b: f64, f: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..60 {
        if (b - a).abs() < 1e-7 * (1.0 + b.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Default t grid: 0 to 6t* with `t* = μ^{−(N−2)/4}`.
pub fn default_t_grid(dim: usize, mu: f64, points: usize) -> Vec<f64> {
    let t_star = mu.powf(-(dim as f64 - 2.0) / 4.0);
    (0..points).map(|k| 6.0 * t_star * k as f64 / (points - 1) as f64).collect()
}

/// Returns the certificate and the `(t, ε, E)` surface.
pub fn mp_upper_bound_sweep(
    u_mu: &Field,
    m_mu: f64,
    pot: &SampledPotential,
    mu: f64,
    eps_list: &[f64],
    t_grid: &[f64],
    cutoff: f64,
) -> Result<(UpperBoundCertificate, Vec<[f64; 3]>)> {
    if t_grid.len() < 3 {
        return Err(Error::InvalidArgument("t grid needs at least 3 points".into()));
    }
    let d = pot.domain();
    let threshold = level_threshold(d.dim(), mu, m_mu)?;
    let per_eps: Vec<(SweepRow, Vec<[f64; 3]>)> = eps_list
        .par_iter()
        .map(|&eps| -> Result<_> {
            let bubble = aubin_talenti_field(&BubbleParams { eps, cutoff: Some(cutoff) }, d)?;
            let e_at = |t: f64| -> Result<f64> { energy(&tilde_combination(u_mu, &bubble, t)?, pot, mu) };
            let values: Vec<f64> = t_grid.iter().map(|&t| e_at(t)).collect::<Result<_>>()?;
            let mut k = 0;
            for (i, v) in values.iter().enumerate() {
                if *v > values[k] {
                    k = i;
                }
            }
            let interior = k > 0 && k + 1 < t_grid.len();
            let (t_max, max_energy) = if interior { golden_max(t_grid[k - 1], t_grid[k + 1], e_at)? } else { (t_grid[k], values[k]) };
            let surface = t_grid.iter().zip(&values).map(|(t, e)| [*t, eps, *e]).collect();
            Ok((SweepRow { eps, t_max, max_energy, interior, below_threshold: max_energy < threshold }, surface))
        })
        .collect::<Result<_>>()?;
    let (rows, surfaces): (Vec<_>, Vec<_>) = per_eps.into_iter().unzip();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|a, b| rows[*a].eps.total_cmp(&rows[*b].eps));
    let smallest: Vec<&SweepRow> = order.iter().take(2).map(|&i| &rows[i]).collect();
    let decreasing_in_eps = smallest.len() == 2 && smallest[0].max_energy >= smallest[1].max_energy;
    let passes = smallest.iter().all(|r| r.interior && r.below_threshold) && decreasing_in_eps;
    Ok((
        UpperBoundCertificate { m_mu, threshold, rows, decreasing_in_eps, passes },
        surfaces.into_iter().flatten().collect(),
    ))
}
