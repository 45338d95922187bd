//! Subcommands.  Every run is split into a solve phase, which writes field
//! dumps, and a certify phase, which rebuilds the report from those dumps
//! and the configuration alone.  `verify` repeats only the second phase, so
//! a replay is byte-identical exactly when the dumps and config are intact.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use critnls::bubbles::{aubin_talenti_field, bubble_norm_report, default_t_grid, mp_upper_bound_sweep, BubbleParams};
use critnls::functional::{level_threshold, sample_annulus_infimum, LevelCertificate};
use critnls::mfg::{alpha_gate, hopf_cole_forward, MfgSolution};
use critnls::potentials::{sample_potential, Decomposition, SampledPotential};
use critnls::solvers::{certify_field, find_local_minimizer, find_mountain_pass, ground_state_gate, MinimizerChecks, SaddleChecks, SolutionKind};
use critnls::spectrum::{attractivity_check, eigen_residual, principal_eigenpair, rayleigh_quotient};
use critnls::{Domain, Field};

use crate::config::RunConfig;
use crate::output::{dump_field, load_field, to_json, field_csv, write_text};
use crate::RunError;

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const LOG_FILE: &str = "solver_log.json";
pub const VERIFY_FILE: &str = "verify.json";

/// MFG residual bounds.
const HJB_TOL: f64 = 1e-5;
const KOLMOGOROV_TOL: f64 = 1e-8;
const MFG_MASS_TOL: f64 = 1e-10;
const EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Eig,
    Decompose,
    Minimize,
    Saddle,
    Bubbles,
    Mfg,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Eig, Stage::Decompose, Stage::Minimize, Stage::Saddle, Stage::Bubbles, Stage::Mfg];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Eig => "eig",
            Stage::Decompose => "decompose",
            Stage::Minimize => "minimize",
            Stage::Saddle => "saddle",
            Stage::Bubbles => "bubbles",
            Stage::Mfg => "mfg",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Everything a phase needs: the effective config, its grid and hash, and
/// the output directory.
pub struct Context {
    pub cfg: RunConfig,
    pub dir: PathBuf,
    pub domain: Arc<Domain>,
    pub config_text: String,
    pub config_hash: String,
}

impl Context {
    pub fn new(mut cfg: RunConfig, dir: &Path) -> Result<Self, RunError> {
        // Where the artifacts live is not part of the computation.
        cfg.outputs.directory = None;
        cfg.validate()?;
        let domain = Domain::new(cfg.domain_spec()).map_err(|e| RunError::Config(e.to_string()))?;
        let config_text = cfg.to_toml();
        let config_hash = Sha256::digest(config_text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self { cfg, dir: dir.to_path_buf(), domain, config_text, config_hash })
    }

    fn potential(&self) -> Result<SampledPotential, RunError> {
        Ok(sample_potential(&self.cfg.potential_spec()?, &self.domain)?)
    }

    fn decomposed(&self) -> Result<SampledPotential, RunError> {
        Ok(self.potential()?.decomposed(self.cfg.exponent(), self.cfg.potential.delta)?)
    }

    fn dump(&self, name: &str, field: &Field) -> Result<(), RunError> {
        dump_field(&self.dir, name, field, self.cfg.outputs.binary)
    }

    fn load(&self, name: &str) -> Result<Field, RunError> {
        load_field(&self.dir, name, &self.domain)
    }
}

#[derive(Serialize)]
struct GridMeta {
    dim: usize,
    kind: &'static str,
    r_max: f64,
    n: usize,
    nodes: usize,
    /// Innermost node of radial grids.
    first_node: Option<f64>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema_version: u32,
    subcommand: &'a str,
    config_hash: &'a str,
    grid: GridMeta,
    passes: bool,
    certificates: Value,
}

/// Output of the certify phase.  `extras` are derived files written by a
/// run and ignored by a replay.
pub struct Certified {
    pub passes: bool,
    pub certificates: Value,
    pub extras: Vec<(String, String)>,
}

fn certified(passes: bool, certificates: Value) -> Certified {
    Certified { passes, certificates, extras: Vec::new() }
}

pub fn render_report(ctx: &Context, stage: Stage, c: &Certified) -> String {
    let d = &ctx.domain;
    to_json(&Envelope {
        schema_version: SCHEMA_VERSION,
        subcommand: stage.name(),
        config_hash: &ctx.config_hash,
        grid: GridMeta {
            dim: d.dim(),
            kind: d.kind().label(),
            r_max: d.r_max(),
            n: d.spec().n,
            nodes: d.len(),
            first_node: d.radial_nodes().map(|r| r[0]),
        },
        passes: c.passes,
        certificates: c.certificates.clone(),
    })
}

fn value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

// ---- solve phase ------------------------------------------------------------

/// Runs the solvers and writes the field dumps; returns the solver log.
pub fn solve(ctx: &Context, stage: Stage) -> Result<Value, RunError> {
    match stage {
        Stage::Eig => {
            let eig = principal_eigenpair(&ctx.potential()?, EIGEN_TOL)?;
            ctx.dump("psi", &eig.psi)?;
            Ok(json!({ "iterations": eig.iterations, "eigenvalue": eig.eigenvalue, "residual": eig.residual }))
        }
        Stage::Decompose => {
            let pot = ctx.decomposed()?;
            let dec = pot.decomposition().expect("decomposed");
            ctx.dump("v", pot.v())?;
            for (name, f) in [("v1", &dec.v1), ("v2", &dec.v2), ("w1", &dec.w1), ("w2", &dec.w2)] {
                ctx.dump(name, f)?;
            }
            Ok(json!({}))
        }
        Stage::Minimize => {
            let pot = ctx.decomposed()?;
            let eig = principal_eigenpair(&pot, EIGEN_TOL)?;
            ctx.dump("psi", &eig.psi)?;
            if rayleigh_quotient(&eig.psi, &pot)? >= 0.0 {
                return Ok(json!({ "skipped": "potential is not attractive" }));
            }
            let b = find_local_minimizer(&pot, ctx.cfg.mu(), &ctx.cfg.problem.solver)?;
            ctx.dump("u", &b.u)?;
            Ok(json!({ "iterations": b.iterations, "history": b.log }))
        }
        Stage::Saddle => {
            let pot = ctx.decomposed()?;
            let mu = ctx.cfg.mu();
            let level = level_certificate(ctx, &pot, mu)?;
            if !smallness_passes(&level) {
                return Ok(json!({ "skipped": "smallness gate failed" }));
            }
            let cfg = &ctx.cfg.problem.solver;
            let minimizer = find_local_minimizer(&pot, mu, cfg)?;
            let run = find_mountain_pass(&pot, mu, &minimizer, level.e_star, cfg)?;
            ctx.dump("u_min", &minimizer.u)?;
            ctx.dump("u_mp", &run.bundle.u)?;
            Ok(json!({
                "minimizer": { "iterations": minimizer.iterations, "history": minimizer.log },
                "saddle": {
                    "iterations": run.bundle.iterations,
                    "history": run.bundle.log,
                    "path_maxima": run.path_maxima,
                    "dilations": [run.endpoints.h0, run.endpoints.h1],
                    "distance_to_minimizer": run.distance_to_minimizer,
                },
            }))
        }
        Stage::Bubbles => {
            let eps = ctx.cfg.eps_list();
            let smallest = BubbleParams { eps: *eps.last().expect("validated"), cutoff: Some(ctx.cfg.bubbles.cutoff) };
            ctx.dump("bubble", &aubin_talenti_field(&smallest, &ctx.domain)?)?;
            let pot = ctx.potential()?;
            if !attractivity_check(&pot)?.attractive {
                return Ok(json!({ "minimizer": Value::Null }));
            }
            let b = find_local_minimizer(&pot, ctx.cfg.mu(), &ctx.cfg.problem.solver)?;
            ctx.dump("u", &b.u)?;
            Ok(json!({ "minimizer": { "iterations": b.iterations, "history": b.log } }))
        }
        Stage::Mfg => {
            let alpha = ctx.cfg.alpha();
            let gate = alpha_gate(alpha, ctx.cfg.problem.alpha_gate);
            if !gate.passes {
                return Ok(json!({ "skipped": "alpha gate failed" }));
            }
            let pot = ctx.decomposed()?;
            let mu = 0.5 * alpha;
            let cfg = &ctx.cfg.problem.solver;
            let level = level_certificate(ctx, &pot, mu)?;
            let minimizer = find_local_minimizer(&pot, mu, cfg)?;
            let run = find_mountain_pass(&pot, mu, &minimizer, level.e_star, cfg)?;
            ctx.dump("u_min", &minimizer.u)?;
            ctx.dump("u_mp", &run.bundle.u)?;
            let dec = pot.decomposition().expect("decomposed");
            ctx.dump("v1", &dec.v1)?;
            ctx.dump("v2", &dec.v2)?;
            Ok(json!({
                "minimizer": { "iterations": minimizer.iterations, "history": minimizer.log },
                "saddle": { "iterations": run.bundle.iterations, "history": run.bundle.log, "path_maxima": run.path_maxima },
            }))
        }
    }
}

// ---- certify phase ----------------------------------------------------------

fn level_certificate(ctx: &Context, pot: &SampledPotential, mu: f64) -> Result<LevelCertificate, RunError> {
    let dec = pot.decomposition().expect("decomposed");
    Ok(LevelCertificate::new(ctx.domain.dim(), mu, ctx.cfg.problem.solver.annulus_eps, &dec.norms())?)
}

/// `max{‖V₁⁻‖, μ^{N/2−1}‖V₂⁻‖_∞} < C₀` together with a positive annulus margin.
fn smallness_passes(level: &LevelCertificate) -> bool {
    level.c0_quantity < level.c0_bound && level.annulus_margin > 0.0
}

fn smallness_report(level: &LevelCertificate) -> Value {
    json!({
        "c0_quantity": level.c0_quantity,
        "c0_bound": level.c0_bound,
        "c0_margin": level.c0_bound - level.c0_quantity,
        "annulus_margin": level.annulus_margin,
        "passes": smallness_passes(level),
    })
}

fn bundle_report(b: &critnls::solvers::SolutionBundle) -> Value {
    json!({
        "kind": b.kind,
        "energy": b.report,
        "lambda": b.lambda,
        "lambda_fit": b.lambda_fit,
        "pde_residual": b.pde_residual,
        "negative_part_norm": b.neg_part_norm,
    })
}

/// Rebuild the report of `stage` from the dumps in `ctx.dir`.
pub fn certify(ctx: &Context, stage: Stage) -> Result<Certified, RunError> {
    match stage {
        Stage::Eig => {
            let pot = ctx.potential()?;
            let psi = ctx.load("psi")?;
            let lambda = rayleigh_quotient(&psi, &pot)?;
            let residual = eigen_residual(&psi, &pot, lambda)?;
            let tol = ctx.cfg.problem.solver.residual_tol;
            let attractive = lambda < 0.0;
            Ok(certified(
                attractive && residual <= tol,
                json!({
                    "eigenvalue": lambda,
                    "residual": residual,
                    "residual_tol": tol,
                    "mass": psi.l2_norm_sq(),
                    "negative_part_norm": psi.negative_part_norm(),
                    "attractive": attractive,
                    "margin": -lambda,
                }),
            ))
        }
        Stage::Decompose => {
            let pot = ctx.decomposed()?;
            let certificate = pot.decomposition().expect("decomposed").certificate.clone();
            let stored = Decomposition { v1: ctx.load("v1")?, v2: ctx.load("v2")?, w1: ctx.load("w1")?, w2: ctx.load("w2")?, certificate };
            let v = ctx.load("v")?;
            let split_error = (0..v.values().len()).map(|i| (stored.v1.values()[i] + stored.v2.values()[i] - v.values()[i]).abs()).fold(0.0, f64::max);
            let sups_vanish = stored.certificate.sups_vanish(1e-3);
            Ok(certified(
                stored.certificate.passes && sups_vanish,
                json!({
                    "certificate": stored.certificate,
                    "norms": stored.norms(),
                    "split_error": split_error,
                    "annulus_sups_vanish": sups_vanish,
                }),
            ))
        }
        Stage::Minimize => {
            let pot = ctx.decomposed()?;
            let mu = ctx.cfg.mu();
            let principal = rayleigh_quotient(&ctx.load("psi")?, &pot)?;
            if principal >= 0.0 {
                return Ok(certified(false, json!({ "mu": mu, "principal_eigenvalue": principal, "attractive": false })));
            }
            let b = certify_field(ctx.load("u")?, SolutionKind::LocalMin, &pot, mu)?;
            let checks = MinimizerChecks::new(&b, principal, mu, &ctx.cfg.problem.solver)?;
            let gate = if b.report.energy < 0.0 { Some(ground_state_gate(&b, &pot, mu)?) } else { None };
            let gate_passes = gate.is_some_and(|g| g.passes);
            Ok(certified(
                checks.all() && gate_passes,
                json!({
                    "mu": mu,
                    "principal_eigenvalue": principal,
                    "minimizer": bundle_report(&b),
                    "checks": checks,
                    "ground_state_gate": gate,
                }),
            ))
        }
        Stage::Saddle => {
            let pot = ctx.decomposed()?;
            let mu = ctx.cfg.mu();
            let mut level = level_certificate(ctx, &pot, mu)?;
            if !smallness_passes(&level) {
                return Ok(certified(false, json!({ "mu": mu, "smallness": smallness_report(&level), "level": level })));
            }
            let cfg = &ctx.cfg.problem.solver;
            let dim = ctx.domain.dim();
            let minimizer = certify_field(ctx.load("u_min")?, SolutionKind::LocalMin, &pot, mu)?;
            let saddle = certify_field(ctx.load("u_mp")?, SolutionKind::MountainPass, &pot, mu)?;
            let (m, c) = (minimizer.report.energy, saddle.report.energy);
            level = level.with_minimum(dim, mu, m)?.with_saddle(c);
            let sampled = sample_annulus_infimum(&pot, mu, cfg.annulus_eps, ctx.cfg.problem.annulus_samples, cfg.seed)?;
            level.e_star_sampled = Some(sampled);
            let threshold = level_threshold(dim, mu, m)?;
            let checks = SaddleChecks::new(&saddle, &minimizer, level.e_star, threshold, cfg)?;
            let t_grid = default_t_grid(dim, mu, ctx.cfg.bubbles.t_points);
            let (sweep, surface) = mp_upper_bound_sweep(&minimizer.u, m, &pot, mu, &ctx.cfg.eps_list(), &t_grid, ctx.cfg.bubbles.cutoff)?;
            let sample_consistent = sampled >= level.e_star;
            let mut csv = String::from("t,eps,energy\n");
            for [t, eps, e] in &surface {
                csv.push_str(&format!("{t:.16e},{eps:.16e},{e:.16e}\n"));
            }
            Ok(Certified {
                passes: checks.all() && level.ordered() && sweep.passes && sample_consistent,
                certificates: json!({
                    "mu": mu,
                    "smallness": smallness_report(&level),
                    "level": level,
                    "level_ordered": level.ordered(),
                    "sampled_above_bound": sample_consistent,
                    "minimizer": bundle_report(&minimizer),
                    "saddle": bundle_report(&saddle),
                    "distance": saddle.u.distance(&minimizer.u)?,
                    "checks": checks,
                    "upper_bound": sweep,
                }),
                extras: vec![("surface.csv".into(), csv)],
            })
        }
        Stage::Bubbles => {
            let pot = ctx.potential()?;
            let u_mu = if attractivity_check(&pot)?.attractive { Some(ctx.load("u")?) } else { None };
            let b = &ctx.cfg.bubbles;
            let report = bubble_norm_report(&ctx.cfg.eps_list(), b.cutoff, &ctx.domain, &b.p_list, u_mu.as_ref(), b.fit_window)?;
            Ok(certified(report.passes(), value(&report)))
        }
        Stage::Mfg => {
            let alpha = ctx.cfg.alpha();
            let gate = alpha_gate(alpha, ctx.cfg.problem.alpha_gate);
            if !gate.passes {
                return Ok(certified(false, json!({ "alpha_gate": gate })));
            }
            let pot = ctx.decomposed()?;
            let mu = 0.5 * alpha;
            let dim = ctx.domain.dim();
            let minimizer = certify_field(ctx.load("u_min")?, SolutionKind::LocalMin, &pot, mu)?;
            let saddle = certify_field(ctx.load("u_mp")?, SolutionKind::MountainPass, &pot, mu)?;
            let level = level_certificate(ctx, &pot, mu)?.with_minimum(dim, mu, minimizer.report.energy)?.with_saddle(saddle.report.energy);
            let first = hopf_cole_forward(&minimizer, &pot, mu)?;
            let second = hopf_cole_forward(&saddle, &pot, mu)?;
            let separation = first.m.distance(&second.m)?;
            let distinct = separation > 10.0 * ctx.cfg.problem.solver.residual_tol;
            let solution = |s: &MfgSolution, b: &critnls::solvers::SolutionBundle| {
                let r = &s.residuals;
                let ok = r.hjb <= HJB_TOL && r.kolmogorov <= KOLMOGOROV_TOL && r.mass_error <= MFG_MASS_TOL && s.lambda == 2.0 * b.lambda;
                (ok, json!({ "summary": s.summary(), "lambda_nls": b.lambda, "multiplier_doubled": s.lambda == 2.0 * b.lambda, "passes": ok }))
            };
            let (ok1, first_report) = solution(&first, &minimizer);
            let (ok2, second_report) = solution(&second, &saddle);
            let mut extras = Vec::new();
            for (tag, s) in [("1", &first), ("2", &second)] {
                extras.push((format!("m{tag}.csv"), field_csv(&ctx.domain, &s.m.values().iter().copied().map(Some).collect::<Vec<_>>())));
                extras.push((format!("value{tag}.csv"), field_csv(&ctx.domain, &s.u)));
            }
            Ok(Certified {
                passes: ok1 && ok2 && distinct && level.ordered(),
                certificates: json!({
                    "alpha_gate": gate,
                    "level": level,
                    "level_ordered": level.ordered(),
                    "tolerances": { "hjb": HJB_TOL, "kolmogorov": KOLMOGOROV_TOL, "mass": MFG_MASS_TOL },
                    "first": first_report,
                    "second": second_report,
                    "separation": separation,
                    "distinct": distinct,
                }),
                extras,
            })
        }
    }
}

// ---- drivers ----------------------------------------------------------------

pub struct Outcome {
    pub passes: bool,
    pub report: String,
}

/// Solve, dump, reload, certify, and write the report, config and log.
pub fn run(ctx: &Context, stage: Stage) -> Result<Outcome, RunError> {
    std::fs::create_dir_all(&ctx.dir).map_err(|e| RunError::Config(format!("output directory {}: {e}", ctx.dir.display())))?;
    write_text(&ctx.dir.join(CONFIG_FILE), &ctx.config_text)?;
    let log = solve(ctx, stage)?;
    write_text(&ctx.dir.join(LOG_FILE), &to_json(&json!({ "subcommand": stage.name(), "config_hash": ctx.config_hash, "log": log })))?;
    let c = certify(ctx, stage)?;
    for (name, text) in &c.extras {
        write_text(&ctx.dir.join(name), text)?;
    }
    let report = render_report(ctx, stage, &c);
    write_text(&ctx.dir.join(REPORT_FILE), &report)?;
    Ok(Outcome { passes: c.passes, report })
}

#[derive(Debug, Serialize)]
pub struct Replay {
    pub subcommand: String,
    pub config_hash: String,
    pub identical: bool,
    /// First differing line, 1-based.
    pub first_difference: Option<usize>,
}

/// Recompute the report in `dir` from its dumps and compare bytes.
pub fn verify(dir: &Path, config: Option<&Path>) -> Result<Replay, RunError> {
    let cfg_path = config.map(Path::to_path_buf).unwrap_or_else(|| dir.join(CONFIG_FILE));
    let cfg = RunConfig::load(&cfg_path)?;
    let ctx = Context::new(cfg, dir)?;
    let stored = std::fs::read_to_string(dir.join(REPORT_FILE)).map_err(|e| RunError::Io(format!("{}: {e}", dir.join(REPORT_FILE).display())))?;
    let parsed: Value = serde_json::from_str(&stored).map_err(|e| RunError::Io(format!("{REPORT_FILE}: {e}")))?;
    let name = parsed["subcommand"].as_str().unwrap_or_default().to_string();
    let stage = Stage::from_name(&name).ok_or_else(|| RunError::Io(format!("{REPORT_FILE}: unknown subcommand {name:?}")))?;
    let fresh = render_report(&ctx, stage, &certify(&ctx, stage)?);
    let first_difference = if fresh == stored {
        None
    } else {
        Some(fresh.lines().zip(stored.lines()).position(|(a, b)| a != b).unwrap_or_else(|| fresh.lines().count().min(stored.lines().count())) + 1)
    };
    let replay = Replay { subcommand: name, config_hash: ctx.config_hash.clone(), identical: first_difference.is_none(), first_difference };
    write_text(&dir.join(VERIFY_FILE), &to_json(&replay))?;
    Ok(replay)
}
