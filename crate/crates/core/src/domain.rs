//! Discretizations of ℝ^N: radial grids (log-spaced or uniform) for
//! N ∈ {3,4,5} and a uniform box for N = 3.
//!
//! Radial grids use a finite-volume layout.  Node `i` owns the shell between
//! the faces `f_{i-1/2}` and `f_{i+1/2}`; the first face sits at the origin
//! and the last at `R_max`, so the weights integrate 1 to the exact ball
//! volume.  The Dirichlet form is `Σ c_i (u_{i+1} - u_i)^2` with a virtual
//! zero node at `R_max`.  At a node on the origin this reduces to the
//! regularized stencil `N u''(0)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::linalg::SymTridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    RadialLogSpaced,
    RadialUniform,
    BoxUniform,
}

impl GridKind {
    pub fn is_radial(self) -> bool {
        !matches!(self, GridKind::BoxUniform)
    }

    pub fn label(self) -> &'static str {
        match self {
            GridKind::RadialLogSpaced => "radial-log-spaced",
            GridKind::RadialUniform => "radial-uniform",
            GridKind::BoxUniform => "box-uniform",
        }
    }
}

/// Parameters of a grid.  For the box kind `n` is the number of cells per
/// axis and the box is `[-R_max, R_max]^3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub dim: usize,
    pub kind: GridKind,
    pub r_max: f64,
    pub n: usize,
    /// Innermost node of a log-spaced grid; defaults to `1e-6 R_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
}

impl DomainSpec {
    pub fn new(dim: usize, kind: GridKind, r_max: f64, n: usize) -> Self {
        Self { dim, kind, r_max, n, r_min: None }
    }

    pub fn with_r_min(mut self, r_min: f64) -> Self {
        self.r_min = Some(r_min);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(3..=5).contains(&self.dim) {
            return Err(Error::InvalidDomain(format!("dimension {} not in 3..=5", self.dim)));
        }
        if self.kind == GridKind::BoxUniform && self.dim != 3 {
            return Err(Error::InvalidDomain("box grids are only available for N = 3".into()));
        }
        if !(self.r_max > 0.0) || !self.r_max.is_finite() {
            return Err(Error::InvalidDomain(format!("R_max must be positive, got {}", self.r_max)));
        }
        if self.n < 16 {
            return Err(Error::InvalidDomain(format!("need at least 16 nodes, got {}", self.n)));
        }
        if let Some(r_min) = self.r_min {
            if !(r_min > 0.0 && r_min < self.r_max) {
                return Err(Error::InvalidDomain(format!("r_min {r_min} must lie in (0, R_max)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
enum Geometry {
    Radial {
        r: Vec<f64>,
        /// Edge couplings `ω_N f^{N-1} / (r_{i+1} - r_i)`; the last edge
        /// joins node `n-1` to the Dirichlet node at `R_max`.
        coupling: Vec<f64>,
        /// Constant node ratio `q` of a log-spaced grid.
        ratio: Option<f64>,
    },
    Box {
        cells: usize,
        spacing: f64,
        half: f64,
    },
}

#[derive(Debug)]
pub struct Domain {
    spec: DomainSpec,
    weights: Vec<f64>,
    radius: Vec<f64>,
    geometry: Geometry,
}

/// Surface area of the unit sphere in ℝ^N.
pub fn sphere_area(dim: usize) -> f64 {
    let half = dim as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma(half)
}

/// Volume of the ball of radius `r` in ℝ^N.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    sphere_area(dim) * r.powi(dim as i32) / dim as f64
}

pub fn build_domain(dim: usize, kind: GridKind, r_max: f64, n: usize) -> Result<Arc<Domain>> {
    Domain::new(DomainSpec::new(dim, kind, r_max, n))
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Arc<Domain>> {
        spec.validate()?;
        let domain = match spec.kind {
            GridKind::RadialLogSpaced | GridKind::RadialUniform => Self::radial(spec),
            GridKind::BoxUniform => Self::boxed(spec),
        };
        Ok(Arc::new(domain))
    }

    fn radial(spec: DomainSpec) -> Domain {
        let n = spec.n;
        let dim = spec.dim;
        let area = sphere_area(dim);
        let (r, ratio) = match spec.kind {
            GridKind::RadialUniform => {
                let dr = spec.r_max / n as f64;
                ((0..=n).map(|i| i as f64 * dr).collect::<Vec<_>>(), None)
            }
            _ => {
                let r_min = spec.r_min.unwrap_or(1e-6 * spec.r_max);
                let q = (spec.r_max / r_min).powf(1.0 / n as f64);
                let mut r: Vec<f64> = (0..=n).map(|i| r_min * q.powi(i as i32)).collect();
                r[n] = spec.r_max;
                (r, Some(q))
            }
        };
        // Faces between consecutive nodes, including the one before R_max.
        let face = |i: usize| -> f64 {
            match ratio {
                Some(_) => (r[i] * r[i + 1]).sqrt(),
                None => 0.5 * (r[i] + r[i + 1]),
            }
        };
        let nd = dim as i32;
        let mut weights = Vec::with_capacity(n);
        let mut inner = 0.0_f64;
        for i in 0..n {
            let outer = if i + 1 == n { spec.r_max } else { face(i) };
            weights.push(area * (outer.powi(nd) - inner.powi(nd)) / dim as f64);
            inner = outer;
        }
        let coupling = (0..n).map(|i| area * face(i).powi(nd - 1) / (r[i + 1] - r[i])).collect();
        let mut nodes = r;
        nodes.truncate(n);
        Domain {
            radius: nodes.clone(),
            weights,
            geometry: Geometry::Radial { r: nodes, coupling, ratio },
            spec,
        }
    }

    fn boxed(spec: DomainSpec) -> Domain {
        let m = spec.n;
        let half = spec.r_max;
        let h = 2.0 * half / m as f64;
        let total = m * m * m;
        let mut radius = Vec::with_capacity(total);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let x = -half + (i as f64 + 0.5) * h;
                    let y = -half + (j as f64 + 0.5) * h;
                    let z = -half + (k as f64 + 0.5) * h;
                    radius.push((x * x + y * y + z * z).sqrt());
                }
            }
        }
        Domain {
            weights: vec![h * h * h; total],
            radius,
            geometry: Geometry::Box { cells: m, spacing: h, half },
            spec,
        }
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn kind(&self) -> GridKind {
        self.spec.kind
    }

    pub fn r_max(&self) -> f64 {
        self.spec.r_max
    }

    /// Number of unknowns (nodes).
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_radial(&self) -> bool {
        self.spec.kind.is_radial()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `|x|` at every node.
    pub fn radius(&self) -> &[f64] {
        &self.radius
    }

    /// Grid ratio `q` of a log-spaced grid.
    pub fn ratio(&self) -> Option<f64> {
        match &self.geometry {
            Geometry::Radial { ratio, .. } => *ratio,
            Geometry::Box { .. } => None,
        }
    }

    /// Radial nodes; `None` on a box grid.
    pub fn radial_nodes(&self) -> Option<&[f64]> {
        match &self.geometry {
            Geometry::Radial { r, .. } => Some(r),
            Geometry::Box { .. } => None,
        }
    }

    /// Edge couplings of a radial grid; the last one joins the Dirichlet node.
    pub fn couplings(&self) -> Option<&[f64]> {
        match &self.geometry {
            Geometry::Radial { coupling, .. } => Some(coupling),
            Geometry::Box { .. } => None,
        }
    }

    /// Shell `[inner, outer)` owned by node `i` of a radial grid.
    pub fn cell_bounds(&self, i: usize) -> Option<(f64, f64)> {
        let r = self.radial_nodes()?;
        let n = r.len();
        let face = |k: usize| -> f64 {
            if k + 1 == n {
                self.spec.r_max
            } else if self.ratio().is_some() {
                (r[k] * r[k + 1]).sqrt()
            } else {
                0.5 * (r[k] + r[k + 1])
            }
        };
        let inner = if i == 0 { 0.0 } else { face(i - 1) };
        Some((inner, face(i)))
    }

    /// Cartesian coordinates of node `i` (radial grids report `(r, 0, 0)`).
    pub fn coordinates(&self, i: usize) -> [f64; 3] {
        match &self.geometry {
            Geometry::Radial { r, .. } => [r[i], 0.0, 0.0],
            Geometry::Box { cells, spacing, half } => {
                let m = *cells;
                let (a, rest) = (i / (m * m), i % (m * m));
                let (b, c) = (rest / m, rest % m);
                let at = |k: usize| -half + (k as f64 + 0.5) * spacing;
                [at(a), at(b), at(c)]
            }
        }
    }

    pub fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || self.spec == other.spec
    }

    // ---- quadrature ---------------------------------------------------

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
    }

    pub fn norm_sq(&self, a: &[f64]) -> f64 {
        self.inner(a, a)
    }

    pub fn lp_norm(&self, f: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            return f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        }
        let s: f64 = self.weights.iter().zip(f).map(|(w, v)| w * v.abs().powf(p)).sum();
        s.powf(1.0 / p)
    }

    // ---- differential operators -----------------------------------------

    /// Visit every edge `(i, j, coupling)` of the stiffness graph once.
    /// `j = None` is an edge to the Dirichlet boundary, where values are 0.
    pub fn for_each_edge(&self, mut f: impl FnMut(usize, Option<usize>, f64)) {
        match &self.geometry {
            Geometry::Radial { coupling, .. } => {
                let n = coupling.len();
                for (i, c) in coupling.iter().enumerate() {
                    f(i, (i + 1 < n).then_some(i + 1), *c);
                }
            }
            Geometry::Box { cells, spacing, .. } => {
                let h = *spacing;
                for_each_box_edge(*cells, |a, b| f(a, b, if b.is_some() { h } else { 2.0 * h }));
            }
        }
    }

    /// Discrete `∫|∇u|^2`.
    pub fn kinetic(&self, u: &[f64]) -> f64 {
        match &self.geometry {
            Geometry::Radial { coupling, .. } => {
                let n = u.len();
                let mut acc = 0.0;
                for i in 0..n {
                    let next = if i + 1 < n { u[i + 1] } else { 0.0 };
                    let d = next - u[i];
                    acc += coupling[i] * d * d;
                }
                acc
            }
            Geometry::Box { cells, spacing, .. } => {
                let m = *cells;
                let h = *spacing;
                let mut acc = 0.0;
                for_each_box_edge(m, |a, b| {
                    let d = match b {
                        Some(b) => u[a] - u[b],
                        None => u[a] * std::f64::consts::SQRT_2,
                    };
                    acc += h * d * d;
                });
                acc
            }
        }
    }

    /// `out = A u` where `uᵀ A u` is the discrete Dirichlet form.
    pub fn apply_stiffness(&self, u: &[f64], out: &mut [f64]) {
        match &self.geometry {
            Geometry::Radial { coupling, .. } => {
                let n = u.len();
                for i in 0..n {
                    // Difference form; the last coupling is the Dirichlet face.
                    let mut acc = if i + 1 < n { coupling[i] * (u[i] - u[i + 1]) } else { coupling[i] * u[i] };
                    if i > 0 {
                        acc += coupling[i - 1] * (u[i] - u[i - 1]);
                    }
                    out[i] = acc;
                }
            }
            Geometry::Box { cells, spacing, .. } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let h = *spacing;
                for_each_box_edge(*cells, |a, b| match b {
                    Some(b) => {
                        let d = h * (u[a] - u[b]);
                        out[a] += d;
                        out[b] -= d;
                    }
                    None => out[a] += 2.0 * h * u[a],
                });
            }
        }
    }

    /// `-Δu` at every node.
    pub fn neg_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply_stiffness(u, &mut out);
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o /= w;
        }
        out
    }

    /// Stiffness matrix of a radial grid as a symmetric tridiagonal.
    pub fn stiffness(&self) -> Option<SymTridiagonal> {
        match &self.geometry {
            Geometry::Radial { coupling, .. } => {
                let n = coupling.len();
                let diag = (0..n).map(|i| coupling[i] + if i > 0 { coupling[i - 1] } else { 0.0 }).collect();
                let off = (0..n - 1).map(|i| -coupling[i]).collect();
                Some(SymTridiagonal::new(diag, off))
            }
            Geometry::Box { .. } => None,
        }
    }

    /// `x·∇u` at every node by second-order centered differences.
    pub fn radial_derivative(&self, u: &[f64]) -> Vec<f64> {
        match &self.geometry {
            Geometry::Radial { r, .. } => {
                let n = u.len();
                let r_max = self.spec.r_max;
                let mut out = vec![0.0; n];
                for i in 0..n {
                    let (rm, um) = if i == 0 {
                        // Even extension through the origin.
                        (-r[0], u[0])
                    } else {
                        (r[i - 1], u[i - 1])
                    };
                    let (rp, up) = if i + 1 < n { (r[i + 1], u[i + 1]) } else { (r_max, 0.0) };
                    let hm = r[i] - rm;
                    let hp = rp - r[i];
                    let deriv = if hm == 0.0 {
                        0.0
                    } else {
                        ((up - u[i]) * hm / hp + (u[i] - um) * hp / hm) / (hm + hp)
                    };
                    out[i] = r[i] * deriv;
                }
                out
            }
            Geometry::Box { cells, spacing, .. } => {
                let m = *cells;
                let h = *spacing;
                let mut out = vec![0.0; u.len()];
                let stride = [m * m, m, 1];
                for (idx, o) in out.iter_mut().enumerate() {
                    let x = self.coordinates(idx);
                    let pos = [idx / (m * m), (idx / m) % m, idx % m];
                    let mut acc = 0.0;
                    for axis in 0..3 {
                        // Ghost values reflect oddly through the Dirichlet wall.
                        let lo = if pos[axis] == 0 { -u[idx] } else { u[idx - stride[axis]] };
                        let hi = if pos[axis] + 1 == m { -u[idx] } else { u[idx + stride[axis]] };
                        acc += x[axis] * (hi - lo) / (2.0 * h);
                    }
                    *o = acc;
                }
                out
            }
        }
    }

    // ---- dilation -------------------------------------------------------

    /// Evaluate a field at radius `rho` (radial grids): cubic Lagrange in
    /// `log r` on log grids and in `r` on uniform grids.
    pub fn interpolate_radial(&self, u: &[f64], rho: f64) -> f64 {
        let Geometry::Radial { r, ratio, .. } = &self.geometry else {
            return f64::NAN;
        };
        let n = u.len();
        if rho >= self.spec.r_max {
            return 0.0;
        }
        let (pos, lookup): (f64, Box<dyn Fn(isize) -> f64 + '_>) = match ratio {
            Some(q) => {
                if rho <= r[0] {
                    return u[0];
                }
                let pos = (rho / r[0]).ln() / q.ln();
                (pos, Box::new(move |k: isize| ghost(u, n, k, true)))
            }
            None => {
                let dr = r[1] - r[0];
                (rho / dr, Box::new(move |k: isize| ghost(u, n, k, false)))
            }
        };
        let k = pos.floor() as isize;
        let t = pos - k as f64;
        let (p0, p1, p2, p3) = (lookup(k - 1), lookup(k), lookup(k + 1), lookup(k + 2));
        // Cubic Lagrange through offsets -1, 0, 1, 2.
        let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3
    }

    /// Mass-preserving dilation `h^{N/2} u(h x)`.
    pub fn dilate_values(&self, u: &[f64], h: f64) -> Vec<f64> {
        let amp = h.powf(self.spec.dim as f64 / 2.0);
        match &self.geometry {
            Geometry::Radial { r, ratio, .. } => {
                if let Some(shift) = ratio.and_then(|q| index_shift(h, q)) {
                    let n = u.len() as isize;
                    return (0..n)
                        .map(|i| {
                            let k = i + shift;
                            let v = if k >= n {
                                0.0
                            } else if k < 0 {
                                u[0]
                            } else {
                                u[k as usize]
                            };
                            amp * v
                        })
                        .collect();
                }
                r.iter().map(|&ri| amp * self.interpolate_radial(u, h * ri)).collect()
            }
            Geometry::Box { cells, spacing, half } => {
                let m = *cells;
                (0..u.len())
                    .map(|idx| {
                        let x = self.coordinates(idx);
                        amp * trilinear(u, m, *spacing, *half, [h * x[0], h * x[1], h * x[2]])
                    })
                    .collect()
            }
        }
    }
}

/// Integer `j` with `h = q^j`, if `h` is (numerically) a power of the ratio.
pub fn index_shift(h: f64, q: f64) -> Option<isize> {
    let j = h.ln() / q.ln();
    let jr = j.round();
    if (j - jr).abs() < 1e-9 {
        Some(jr as isize)
    } else {
        None
    }
}

fn ghost(u: &[f64], n: usize, k: isize, log_grid: bool) -> f64 {
    if k < 0 {
        // Even extension through the origin.
        if log_grid {
            u[0]
        } else {
            u[(-k) as usize]
        }
    } else if (k as usize) < n {
        u[k as usize]
    } else if k as usize == n {
        0.0
    } else {
        // Odd reflection through the Dirichlet node.
        let m = 2 * n as isize - k;
        if m >= 0 && (m as usize) < n {
            -u[m as usize]
        } else {
            0.0
        }
    }
}

fn trilinear(u: &[f64], m: usize, h: f64, half: f64, x: [f64; 3]) -> f64 {
    let mut base = [0isize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let s = (x[a] + half) / h - 0.5;
        let f = s.floor();
        base[a] = f as isize;
        frac[a] = s - f;
    }
    let at = |i: isize, j: isize, k: isize| -> f64 {
        let mi = m as isize;
        if i < 0 || j < 0 || k < 0 || i >= mi || j >= mi || k >= mi {
            0.0
        } else {
            u[((i * mi + j) * mi + k) as usize]
        }
    };
    let mut acc = 0.0;
    for di in 0..2 {
        for dj in 0..2 {
            for dk in 0..2 {
                let w = (if di == 1 { frac[0] } else { 1.0 - frac[0] })
                    * (if dj == 1 { frac[1] } else { 1.0 - frac[1] })
                    * (if dk == 1 { frac[2] } else { 1.0 - frac[2] });
                acc += w * at(base[0] + di, base[1] + dj, base[2] + dk);
            }
        }
    }
    acc
}

/// Visit each edge of the box grid once; `None` marks an edge to the wall.
fn for_each_box_edge(m: usize, mut f: impl FnMut(usize, Option<usize>)) {
    let stride = [m * m, m, 1];
    for idx in 0..m * m * m {
        let pos = [idx / (m * m), (idx / m) % m, idx % m];
        for axis in 0..3 {
            if pos[axis] + 1 < m {
                f(idx, Some(idx + stride[axis]));
            } else {
                f(idx, None);
            }
            if pos[axis] == 0 {
                f(idx, None);
            }
        }
    }
}

/// One real value per node of a domain.
#[derive(Debug, Clone)]
pub struct Field {
    domain: Arc<Domain>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(domain: &Arc<Domain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DomainMismatch);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at node {i}")));
        }
        Ok(Self { domain: Arc::clone(domain), values })
    }

    pub fn zeros(domain: &Arc<Domain>) -> Self {
        Self { domain: Arc::clone(domain), values: vec![0.0; domain.len()] }
    }

    /// Sample a radial profile `f(|x|)`.
    pub fn from_radial(domain: &Arc<Domain>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = domain.radius().iter().map(|&r| f(r)).collect();
        Self::new(domain, values)
    }

    pub(crate) fn from_parts(domain: &Arc<Domain>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        Self { domain: Arc::clone(domain), values }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_same(&self, other: &Field) -> Result<()> {
        if self.domain.same_as(&other.domain) {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_parts(&self.domain, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Field) -> Result<Field> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect();
        Ok(Field::from_parts(&self.domain, values))
    }

    pub fn integral(&self) -> f64 {
        self.domain.integrate(&self.values)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.domain.norm_sq(&self.values)
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.domain.inner(&self.values, &other.values))
    }

    pub fn grad_norm_sq(&self) -> f64 {
        self.domain.kinetic(&self.values)
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("p = {p} < 1")));
        }
        Ok(self.domain.lp_norm(&self.values, p))
    }

    /// Rescale to unit L² norm.
    pub fn normalized(&self) -> Result<Field> {
        let n = self.l2_norm();
        if !(n > 0.0) {
            return Err(Error::InvalidArgument("cannot normalize a zero field".into()));
        }
        Ok(self.scaled(1.0 / n))
    }

    /// L² norm of the negative part.
    pub fn negative_part_norm(&self) -> f64 {
        let neg: Vec<f64> = self.values.iter().map(|&v| v.min(0.0)).collect();
        self.domain.norm_sq(&neg).sqrt()
    }

    pub fn distance(&self, other: &Field) -> Result<f64> {
        Ok(self.axpy(-1.0, other)?.l2_norm())
    }
}

pub fn integrate(f: &Field) -> f64 {
    f.integral()
}

pub fn grad_norm_sq(u: &Field) -> f64 {
    u.grad_norm_sq()
}

/// `h ⋆ u`: exact index shift on log grids when `h` is a power of the grid
/// ratio, interpolation otherwise.
pub fn dilate(u: &Field, h: f64) -> Result<Field> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("dilation factor must be positive, got {h}")));
    }
    if h == 1.0 {
        return Ok(u.clone());
    }
    let values = u.domain().dilate_values(u.values(), h);
    Ok(Field::from_parts(u.domain(), values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(dim: usize) -> impl Fn(f64) -> f64 {
        // Unit-mass standard Gaussian in ℝ^N.
        move |r: f64| (PI).powf(-(dim as f64) / 4.0) * (-r * r / 2.0).exp()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_domain(6, GridKind::RadialUniform, 1.0, 100).is_err());
        assert!(build_domain(4, GridKind::BoxUniform, 1.0, 32).is_err());
        assert!(build_domain(3, GridKind::RadialUniform, -1.0, 100).is_err());
        assert!(build_domain(3, GridKind::RadialUniform, 1.0, 8).is_err());
    }

    #[test]
    fn volumes_are_exact() {
        let d = build_domain(3, GridKind::RadialUniform, 10.0, 1000).unwrap();
        let ones = vec![1.0; d.len()];
        assert!((d.integrate(&ones) / (4.0 / 3.0 * PI * 1000.0) - 1.0).abs() < 1e-12);
        let d = build_domain(4, GridKind::RadialLogSpaced, 50.0, 2048).unwrap();
        let ones = vec![1.0; d.len()];
        assert!((d.integrate(&ones) / ball_volume(4, 50.0) - 1.0).abs() < 1e-12);
        let b = build_domain(3, GridKind::BoxUniform, 8.0, 64).unwrap();
        let ones = vec![1.0; b.len()];
        assert!((b.integrate(&ones) - 16f64.powi(3)).abs() < 1e-8);
    }

    #[test]
    fn log_grid_has_constant_ratio() {
        let d = build_domain(4, GridKind::RadialLogSpaced, 50.0, 2048).unwrap();
        let r = d.radial_nodes().unwrap();
        let q = d.ratio().unwrap();
        for w in r.windows(2) {
            assert!((w[1] / w[0] - q).abs() < 1e-12 * q);
        }
    }

    #[test]
    fn gaussian_mass_and_gradient() {
        let spec = DomainSpec::new(3, GridKind::RadialUniform, 12.0, 8000);
        let d = Domain::new(spec).unwrap();
        let u = Field::from_radial(&d, gaussian(3)).unwrap();
        assert!((u.l2_norm_sq() - 1.0).abs() < 1e-6);
        assert!((u.grad_norm_sq() / 1.5 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn index_shift_dilation_preserves_mass() {
        let d = build_domain(3, GridKind::RadialLogSpaced, 40.0, 2048).unwrap();
        let q = d.ratio().unwrap();
        let u = Field::from_radial(&d, gaussian(3)).unwrap();
        for j in [-7, -1, 1, 5] {
            let h = q.powi(j);
            let uh = dilate(&u, h).unwrap();
            assert!((uh.l2_norm_sq() - u.l2_norm_sq()).abs() < 1e-8);
            let ratio = uh.grad_norm_sq() / u.grad_norm_sq();
            assert!((ratio / (h * h) - 1.0).abs() < 1e-8, "j={j}: {ratio}");
        }
    }

    #[test]
    fn interpolated_dilation_is_accurate() {
        let d = build_domain(3, GridKind::RadialLogSpaced, 40.0, 4096).unwrap();
        let u = Field::from_radial(&d, gaussian(3)).unwrap();
        let h = 1.37;
        let uh = dilate(&u, h).unwrap();
        let exact = Field::from_radial(&d, |r| h.powf(1.5) * gaussian(3)(h * r)).unwrap();
        assert!(uh.distance(&exact).unwrap() < 1e-8);
    }

    #[test]
    fn origin_stencil_matches_regularized_laplacian() {
        // For u = 1 - r^2 in N dims, -Δu = 2N everywhere.
        let d = build_domain(4, GridKind::RadialUniform, 1.0, 400).unwrap();
        let u: Vec<f64> = d.radius().iter().map(|r| 1.0 - r * r).collect();
        let lap = d.neg_laplacian(&u);
        assert!((lap[0] - 8.0).abs() < 1e-9);
        assert!((lap[100] - 8.0).abs() < 1e-6);
    }

    #[test]
    fn box_gradient_of_gaussian() {
        let d = build_domain(3, GridKind::BoxUniform, 6.0, 48).unwrap();
        let u = Field::from_radial(&d, gaussian(3)).unwrap();
        assert!((u.l2_norm_sq() - 1.0).abs() < 1e-4);
        assert!((u.grad_norm_sq() / 1.5 - 1.0).abs() < 2e-2);
    }
}
