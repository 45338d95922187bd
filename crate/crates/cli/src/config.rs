//! Run configuration (TOML).
//!
//! ```toml
//! [domain]
//! dim = 3
//! kind = "radial-log-spaced"   # radial-uniform | box-uniform
//! r_max = 30.0
//! n = 4096
//!
//! [potential]
//! family = "well"              # zero | well | lorentzian | coulomb-cut | table
//! depth = 7.0
//! radius = 1.0
//! delta = 0.1                  # shell-decomposition budget
//!
//! [problem]
//! mu = 0.05                    # or rho = …, never both
//!
//! [problem.solver]
//! residual_tol = 1e-6
//! ```
//!
//! Relative paths (the potential table) are resolved against the directory
//! of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use critnls::bubbles::{DEFAULT_CUTOFF, DEFAULT_EPS_FACTORS};
use critnls::functional::rho_to_mu;
use critnls::potentials::{LocalIntegrability, PotentialFamily, PotentialSpec, TailEnvelope};
use critnls::solvers::SolverConfig;
use critnls::{DomainSpec, GridKind};

use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub dim: usize,
    pub kind: GridKind,
    pub r_max: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialBlock {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub core: Option<f64>,
    /// Two-column CSV `r,value` for the `table` family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailEnvelope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local: Option<LocalIntegrability>,
    /// Shell-decomposition exponent; defaults to N/2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Mass `ρ`; the run uses `μ = ρ^{2*−2}` after rescaling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// MFG coupling; defaults to `2μ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_alpha_gate")]
    pub alpha_gate: f64,
    /// Random annulus samples backing the analytic E* bound.
    #[serde(default = "default_annulus_samples")]
    pub annulus_samples: usize,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_alpha_gate() -> f64 {
    0.2
}

fn default_annulus_samples() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BubbleBlock {
    /// Scales as multiples of the cutoff radius, decreasing.
    #[serde(default = "default_eps_factors")]
    pub eps_factors: Vec<f64>,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default)]
    pub p_list: Vec<f64>,
    #[serde(default = "default_fit_window")]
    pub fit_window: usize,
    #[serde(default = "default_t_points")]
    pub t_points: usize,
}

fn default_eps_factors() -> Vec<f64> {
    DEFAULT_EPS_FACTORS.to_vec()
}

fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF
}

fn default_fit_window() -> usize {
    5
}

fn default_t_points() -> usize {
    121
}

impl Default for BubbleBlock {
    fn default() -> Self {
        Self { eps_factors: default_eps_factors(), cutoff: default_cutoff(), p_list: Vec::new(), fit_window: default_fit_window(), t_points: default_t_points() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    /// Also write little-endian `f64` dumps next to the CSV files.
    #[serde(default)]
    pub binary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainBlock,
    pub potential: PotentialBlock,
    pub problem: ProblemBlock,
    #[serde(default)]
    pub bubbles: BubbleBlock,
    #[serde(default)]
    pub outputs: OutputBlock,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(csv) = &cfg.potential.csv {
            if csv.is_relative() {
                cfg.potential.csv = Some(base.join(csv));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        self.domain_spec().validate().map_err(|e| RunError::Config(e.to_string()))?;
        match (self.problem.mu, self.problem.rho) {
            (Some(mu), None) if mu > 0.0 && mu.is_finite() => {}
            (None, Some(rho)) if rho > 0.0 && rho.is_finite() => {}
            (Some(_), Some(_)) => return bad("give exactly one of problem.mu and problem.rho".into()),
            (None, None) => return bad("problem.mu or problem.rho is required".into()),
            _ => return bad("problem.mu / problem.rho must be positive".into()),
        }
        self.problem.solver.validate().map_err(|e| RunError::Config(e.to_string()))?;
        if !(self.potential.delta > 0.0) {
            return bad("potential.delta must be positive".into());
        }
        if let Some(csv) = &self.potential.csv {
            if !csv.exists() {
                return bad(format!("potential table {} does not exist", csv.display()));
            }
        }
        let b = &self.bubbles;
        if b.eps_factors.len() < 3 || b.eps_factors.windows(2).any(|w| !(w[1] < w[0])) || b.eps_factors.iter().any(|e| !(*e > 0.0)) {
            return bad("bubbles.eps_factors needs at least 3 positive, strictly decreasing values".into());
        }
        if !(b.cutoff > 0.0) || b.t_points < 3 || b.fit_window < 3 {
            return bad("bubbles needs cutoff > 0, t_points ≥ 3 and fit_window ≥ 3".into());
        }
        self.potential_spec()?;
        Ok(())
    }

    pub fn domain_spec(&self) -> DomainSpec {
        let d = &self.domain;
        let spec = DomainSpec::new(d.dim, d.kind, d.r_max, d.n);
        match d.r_min {
            Some(r) => spec.with_r_min(r),
            None => spec,
        }
    }

    /// μ after the mass rescaling, if the problem was stated with ρ.
    pub fn mu(&self) -> f64 {
        match (self.problem.mu, self.problem.rho) {
            (Some(mu), _) => mu,
            (None, Some(rho)) => rho_to_mu(self.domain.dim, rho),
            _ => unreachable!("validated"),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.problem.alpha.unwrap_or(2.0 * self.mu())
    }

    pub fn exponent(&self) -> f64 {
        self.potential.exponent.unwrap_or(self.domain.dim as f64 / 2.0)
    }

    pub fn eps_list(&self) -> Vec<f64> {
        self.bubbles.eps_factors.iter().map(|f| f * self.bubbles.cutoff).collect()
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec, RunError> {
        let p = &self.potential;
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| RunError::Config(format!("potential.{name} is required for family {}", p.family)));
        let family = match p.family.as_str() {
            "zero" => PotentialFamily::Zero,
            "well" => PotentialFamily::Well { depth: need(p.depth, "depth")?, radius: need(p.radius, "radius")? },
            "lorentzian" => PotentialFamily::Lorentzian { amplitude: need(p.amplitude, "amplitude")?, scale: need(p.scale, "scale")? },
            "coulomb-cut" => PotentialFamily::CoulombCut { amplitude: need(p.amplitude, "amplitude")?, core: need(p.core, "core")? },
            "table" => {
                let path = p.csv.as_ref().ok_or_else(|| RunError::Config("potential.csv is required for family table".into()))?;
                let (radii, values) = read_table(path)?;
                PotentialFamily::Table { radii, values }
            }
            other => return Err(RunError::Config(format!("unknown potential family {other:?}"))),
        };
        let spec = PotentialSpec { family, tail: p.tail, local: p.local };
        spec.validate().map_err(|e| RunError::Config(e.to_string()))?;
        Ok(spec)
    }
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), RunError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    let (mut radii, mut values) = (Vec::new(), Vec::new());
    for row in reader.records() {
        let row = row.map_err(|e| RunError::Config(e.to_string()))?;
        let parse = |k: usize| -> Result<f64, RunError> {
            row.get(k).and_then(|s| s.trim().parse().ok()).ok_or_else(|| RunError::Config(format!("bad potential table row {row:?}")))
        };
        radii.push(parse(0)?);
        values.push(parse(1)?);
    }
    Ok((radii, values))
}
