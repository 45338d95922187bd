//! Independent oracles shared by the integration tests and the acceptance
//! harness.  Nothing here calls into the library.

#![allow(dead_code)]

use std::f64::consts::PI;

/// `u = rψ` solves `u'' = (V − λ)u`, `u(0) = 0`, for the square well of
/// depth `depth` on the unit ball.  Returns `u(r_max)` by RK4 with the jump on
/// a step boundary.
pub fn well_shoot(depth: f64, lambda: f64, r_max: f64) -> f64 {
    let steps = 20_000;
    let mut state = [0.0, 1.0];
    for (a, b) in [(0.0, 1.0), (1.0, r_max)] {
        let v = if a < 1.0 { -depth } else { 0.0 };
        let h = (b - a) / steps as f64;
        let f = |s: [f64; 2]| [s[1], (v - lambda) * s[0]];
        for _ in 0..steps {
            let k1 = f(state);
            let k2 = f([state[0] + 0.5 * h * k1[0], state[1] + 0.5 * h * k1[1]]);
            let k3 = f([state[0] + 0.5 * h * k2[0], state[1] + 0.5 * h * k2[1]]);
            let k4 = f([state[0] + h * k3[0], state[1] + h * k3[1]]);
            for i in 0..2 {
                state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        // Rescale to keep the growing branch finite.
        let s = state[0].abs().max(state[1].abs());
        state = [state[0] / s, state[1] / s];
    }
    state[0]
}

/// Ground state of the Dirichlet well in `B_{r_max}`: where `u(r_max)` first
/// changes sign.
pub fn well_eigenvalue(depth: f64, r_max: f64) -> f64 {
    let (mut lo, mut hi) = (-depth, 0.0);
    assert!(well_shoot(depth, lo, r_max) > 0.0 && well_shoot(depth, hi, r_max) < 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if well_shoot(depth, mid, r_max) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sobolev constants from elementary closed forms: `S₃ = 3(π/2)^{4/3}`,
/// `S₄ = 8π/√6`, `S₅ = 15π(√π/32)^{2/5}`.
pub fn sobolev_elementary(dim: usize) -> f64 {
    match dim {
        3 => 3.0 * (PI / 2.0).powf(4.0 / 3.0),
        4 => 8.0 * PI / 6f64.sqrt(),
        5 => 15.0 * PI * (PI.sqrt() / 32.0).powf(0.4),
        _ => panic!("dimension {dim}"),
    }
}

// ---- radial shooting for the critical NLS ----------------------------------

/// Radial solutions of `−Δu + Vu − μu⁵ = λu` in ℝ³ with `V = −η χ_{B₁}`,
/// integrated in `s = ln r` where `u_ss + u_s = r²((V − λ)u − μu⁵)`.
pub struct CriticalWell {
    pub depth: f64,
    pub mu: f64,
    pub r_max: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RadialState {
    pub amplitude: f64,
    pub lambda: f64,
    pub mass: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub critical: f64,
    pub energy: f64,
}

impl CriticalWell {
    fn rhs(&self, s: f64, u: f64, p: f64, lambda: f64, inside: bool) -> (f64, f64) {
        let v = if inside { -self.depth } else { 0.0 };
        (p, -p + (2.0 * s).exp() * ((v - lambda) * u - self.mu * u.powi(5)))
    }

    /// Integrates from `u(0) = a` with the series start and calls `visit`
    /// with `(s, u, u_s)` after each step until it returns false.  Returns
    /// the final `(u, u_s)`.
    fn integrate(&self, a: f64, lambda: f64, mut visit: impl FnMut(f64, f64, f64) -> bool) -> (f64, f64) {
        let s0 = (1e-4 / a.powi(2).max(1.0)).ln();
        let r0 = s0.exp();
        let f0 = (-self.depth - lambda) * a - self.mu * a.powi(5);
        let (mut u, mut p, mut s) = (a + f0 * r0 * r0 / 6.0, r0 * r0 * f0 / 3.0, s0);
        if !visit(s, u, p) {
            return (u, p);
        }
        // The jump at r = 1 (s = 0) falls on a step boundary.
        for (start, end, inside) in [(s0, 0.0, true), (0.0, self.r_max.ln(), false)] {
            let count = ((end - start) / self.step).ceil() as usize;
            let h = (end - start) / count as f64;
            for _ in 0..count {
                let (k1u, k1p) = self.rhs(s, u, p, lambda, inside);
                let (k2u, k2p) = self.rhs(s + h / 2.0, u + h / 2.0 * k1u, p + h / 2.0 * k1p, lambda, inside);
                let (k3u, k3p) = self.rhs(s + h / 2.0, u + h / 2.0 * k2u, p + h / 2.0 * k2p, lambda, inside);
                let (k4u, k4p) = self.rhs(s + h, u + h * k3u, p + h * k3p, lambda, inside);
                u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
                p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
                s += h;
                if !visit(s, u, p) {
                    return (u, p);
                }
            }
        }
        (u, p)
    }

    /// +1 when the profile turns up before crossing zero (λ too low),
    /// −1 when it crosses zero.
    fn outcome(&self, a: f64, lambda: f64) -> i8 {
        let mut result = 0;
        let (_, p) = self.integrate(a, lambda, |s, u, p| {
            if u < 0.0 {
                result = -1;
            } else if s > 0.0 && p > 0.0 {
                result = 1;
            }
            result == 0
        });
        if result == 0 {
            if p > 0.0 {
                1
            } else {
                -1
            }
        } else {
            result
        }
    }

    /// Multiplier of the decaying positive solution with `u(0) = a`.
    pub fn lambda_of(&self, a: f64) -> f64 {
        let grid: Vec<f64> = (0..120).map(|k| -0.01 * (2e4f64).powf(k as f64 / 119.0)).collect();
        let outs: Vec<i8> = grid.iter().map(|&l| self.outcome(a, l)).collect();
        let j = (0..grid.len() - 1).find(|&j| outs[j] < 0 && outs[j + 1] > 0).expect("no bracket for λ");
        let (mut lo, mut hi) = (grid[j + 1], grid[j]);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.outcome(a, mid) > 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Integrals of the decaying solution, cut where it is smallest outside
    /// the well (before the shooting error takes over).
    pub fn state(&self, a: f64) -> RadialState {
        let lambda = self.lambda_of(a);
        let mut path: Vec<(f64, f64, f64)> = Vec::new();
        self.integrate(a, lambda, |s, u, p| {
            path.push((s, u, p));
            true
        });
        let cut = path
            .iter()
            .enumerate()
            .filter(|(_, x)| x.0 > 0.0)
            .min_by(|a, b| a.1 .1.abs().total_cmp(&b.1 .1.abs()))
            .map(|(k, _)| k)
            .unwrap();
        let path = &path[..cut];
        let trapezoid = |g: &dyn Fn(f64, f64, f64) -> f64| -> f64 {
            path.windows(2)
                .map(|w| {
                    let (a, b) = (w[0], w[1]);
                    let f = |x: (f64, f64, f64)| g(x.0, x.1, x.2) * (3.0 * x.0).exp();
                    0.5 * (b.0 - a.0) * (f(a) + f(b))
                })
                .sum::<f64>()
                * 4.0
                * PI
        };
        let mass = trapezoid(&|_, u, _| u * u);
        let kinetic = trapezoid(&|s, _, p| (p / s.exp()).powi(2));
        let depth = self.depth;
        let potential = trapezoid(&|s, u, _| if s < 0.0 { -depth * u * u } else { 0.0 });
        let critical = trapezoid(&|_, u, _| u.powi(6));
        let energy = 0.5 * kinetic + 0.5 * potential - self.mu / 6.0 * critical;
        RadialState { amplitude: a, lambda, mass, kinetic, potential, critical, energy }
    }

    /// Unit-mass solution with `u(0)` between `lo` and `hi`, by bisection in
    /// `ln a` on `mass − 1`.
    pub fn unit_mass(&self, mut lo: f64, mut hi: f64) -> RadialState {
        let g = |a: f64| self.state(a).mass - 1.0;
        let g_lo = g(lo);
        assert!(g_lo.signum() != g(hi).signum(), "mass − 1 does not change sign on [{lo}, {hi}]");
        for _ in 0..40 {
            let mid = (lo * hi).sqrt();
            if g(mid).signum() == g_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.state((lo * hi).sqrt())
    }
}

/// Unit-mass energy from the multiplier: `E = λ/2 + μC/3` follows from
/// `λ = K + ∫Vu² − μC`.
pub fn energy_identity(s: &RadialState, mu: f64) -> f64 {
    0.5 * s.lambda + mu * s.critical / 3.0
}

// Frozen outputs of the shooting oracle for η = 7, μ = 0.05 (step 10⁻³,
// R = 30).  The two unit-mass solutions on the branch u(0) ↦ mass.
pub const WELL_DEPTH: f64 = 7.0;
pub const WELL_MU: f64 = 0.05;
pub const GROUND_LAMBDA: f64 = -2.267_534_1;
pub const GROUND_ENERGY: f64 = -1.133_03;
pub const SADDLE_LAMBDA: f64 = -5.643_869_7;
pub const SADDLE_ENERGY: f64 = 16.2706;

pub fn critical_well() -> CriticalWell {
    CriticalWell { depth: WELL_DEPTH, mu: WELL_MU, r_max: 30.0, step: 1e-3 }
}

/// Composite 8-point Gauss-Legendre rule on `[a, b]` with `pieces` panels.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    const X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
    const W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            half * X.iter().zip(&W).map(|(x, w)| w * (f(mid - half * x) + f(mid + half * x))).sum::<f64>()
        })
        .sum()
}
