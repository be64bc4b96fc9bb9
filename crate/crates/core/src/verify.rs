//! Numerical checks of the speed-tracking loop's stability guarantee, the
//! estimator gain bound and the estimator error decay.
//!
//! The stability checks run on the two-state reduced loop in `(ω_r, ĝ)`
//! obtained once the flux dynamics have settled, with ω_rd, β and V_w held
//! constant.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::controller::{
    a_prime, closed_loop_matrix, derive_torque_quadratic, FeedbackGain, GainConfig, SteadyFluxMap,
};
use crate::error::{Error, Result};
use crate::linalg::eig4_real;
use crate::plant::{aero_unchecked, Plant, TurbineParams};
use crate::sim::rk4_step;

/// Bounds on the slope of the lumped torque term with respect to rotor speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaBounds {
    pub lower: f64,
    pub upper: f64,
}

impl GammaBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower < 0.0 && upper > 0.0 && lower.is_finite() && upper.is_finite() {
            Ok(Self { lower, upper })
        } else {
            Err(Error::Domain(format!(
                "slope bounds must satisfy lower < 0 < upper, got ({lower}, {upper})"
            )))
        }
    }
}

/// Lumped torque term `P_m/ω − a′ − C_f·ω`; NaN for nonpositive speed.
pub fn lumped_torque(p: &TurbineParams, omega_r: f64, beta: f64, v_w: f64) -> f64 {
    if !(omega_r > 0.0) {
        return f64::NAN;
    }
    aero_unchecked(p, omega_r, beta, v_w).p_m / omega_r - a_prime(p) - p.friction * omega_r
}

/// Geometric grid of `n` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Lowest speed (pu) of the grids used by the stability checks.
pub const SLOPE_GRID_MIN: f64 = 1e-3;

/// Slope bounds of the lumped term from central differences over `omega_grid`,
/// widened by 10 %.
pub fn estimate_gamma_bounds(
    p: &TurbineParams,
    beta: f64,
    v_w: f64,
    omega_grid: &[f64],
) -> Result<GammaBounds> {
    if omega_grid.len() < 1000 {
        return Err(Error::Domain(format!(
            "slope grid needs at least 1000 points, got {}",
            omega_grid.len()
        )));
    }
    if !(v_w > 0.0) || omega_grid.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::Domain(
            "slope grid needs positive speeds and positive wind".into(),
        ));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &w in omega_grid {
        let d = slope(p, w, beta, v_w);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    GammaBounds::new(1.1 * lo, 1.1 * hi)
}

fn slope(p: &TurbineParams, w: f64, beta: f64, v_w: f64) -> f64 {
    let step = 1e-5 * w;
    (lumped_torque(p, w + step, beta, v_w) - lumped_torque(p, w - step, beta, v_w)) / (2.0 * step)
}

/// The function whose minimum over `x > 0` bounds the required estimator gain.
pub fn bound_objective(x: f64, gb: &GammaBounds) -> f64 {
    let a = gb.lower + x;
    let b = gb.upper + x;
    a.powi(2).max(b.powi(2)) / (4.0 * x)
}

/// Closed-form minimum of [`bound_objective`].
#[allow(non_snake_case)]
pub fn gain_bound_F(gb: &GammaBounds) -> f64 {
    let (lo, hi) = (gb.lower, gb.upper);
    if hi >= -lo / 3.0 {
        hi
    } else {
        -(hi - lo).powi(2) / (8.0 * (lo + hi))
    }
}

/// Minimise [`bound_objective`] over a geometric grid on `[1e-4, 1e4]`,
/// returning `(argmin, min)`.
pub fn brute_force_bound(gb: &GammaBounds, n: usize) -> (f64, f64) {
    let (a, b) = (1e-4f64.ln(), 1e4f64.ln());
    (0..n)
        .map(|k| {
            let x = (a + (b - a) * k as f64 / (n - 1) as f64).exp();
            (x, bound_objective(x, gb))
        })
        .fold((f64::NAN, f64::INFINITY), |best, cur| {
            if cur.1 < best.1 {
                cur
            } else {
                best
            }
        })
}

/// Grid size used for the brute-force bound and the Lyapunov weight.
pub const BOUND_GRID: usize = 100_000;

/// Largest speed up to which the lumped term stays positive, by bisection.
/// Returns the right end of the final bracket, where the term is nonpositive.
pub fn zero_speed(p: &TurbineParams, beta: f64, v_w: f64) -> Result<f64> {
    let g = |w: f64| lumped_torque(p, w, beta, v_w);
    let mut lo = SLOPE_GRID_MIN;
    if !(g(lo) > 0.0) {
        return Err(Error::Domain(format!(
            "lumped torque is not positive at low speed (β = {beta}, V_w = {v_w})"
        )));
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 80 {
            return Err(Error::NoConvergence { iterations: doublings });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Constant operating point and tuning of the reduced loop.
#[derive(Debug, Clone)]
pub struct ReducedLoop<'a> {
    pub turbine: &'a TurbineParams,
    pub alpha: f64,
    pub h: f64,
    pub beta: f64,
    pub v_w: f64,
    pub omega_rd: f64,
}

impl ReducedLoop<'_> {
    fn g(&self, w: f64) -> f64 {
        lumped_torque(self.turbine, w, self.beta, self.v_w)
    }

    /// Time derivative of `(ω_r, ĝ)`.
    pub fn rate(&self, x: &[f64; 2]) -> [f64; 2] {
        let (w, g_hat) = (x[0], x[1]);
        let j = self.turbine.inertia;
        let g = self.g(w);
        let r2 = (g_hat + self.alpha * (w / self.omega_rd).ln()).max(0.0);
        [(g - r2) / j, self.h / j * (g - g_hat)]
    }

    pub fn equilibrium(&self) -> [f64; 2] {
        [self.omega_rd, self.g(self.omega_rd)]
    }

    /// Lyapunov function with speed weight `c`.
    pub fn lyapunov(&self, c: f64, x: &[f64; 2]) -> f64 {
        let speed = self.omega_rd * log_gap((x[0] - self.omega_rd) / self.omega_rd);
        self.alpha * c * speed + 0.5 * (self.g(x[0]) - x[1]).powi(2)
    }
}

/// `(1 + d)·ln(1 + d) − d`, accurate for small `d`.
fn log_gap(d: f64) -> f64 {
    if d.abs() < 1e-2 {
        // Σ (−1)ⁿ dⁿ / (n (n − 1)) for n ≥ 2
        let mut term = d * d;
        let mut sum = 0.0;
        for n in 2..12 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * term / (n * (n - 1)) as f64;
            term *= d;
        }
        sum
    } else {
        (1.0 + d) * d.ln_1p() - d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Config {
    pub beta: f64,
    pub v_w: f64,
    /// Speed reference as a fraction of the zero speed.
    pub omega_rd_fraction: f64,
    pub grid_n: usize,
    pub horizon: f64,
    pub dt: f64,
    pub residual_tol: f64,
    /// Allowed per-step increase of the Lyapunov value, relative to
    /// `max(1, V)`.
    pub lyapunov_tol: f64,
}

impl Default for Theorem1Config {
    fn default() -> Self {
        Self {
            beta: 0.0,
            v_w: 10.0,
            omega_rd_fraction: 0.8,
            grid_n: 20,
            horizon: 200.0,
            dt: 1e-2,
            residual_tol: 1e-3,
            lyapunov_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryReport {
    pub omega0: f64,
    pub g_hat0: f64,
    pub converged: bool,
    pub invariant: bool,
    pub max_v_increase: f64,
    pub residual: f64,
}

impl TrajectoryReport {
    pub fn passed(&self, lyapunov_tol: f64) -> bool {
        self.converged && self.invariant && self.max_v_increase <= lyapunov_tol
    }
}

#[derive(Debug, Clone)]
pub struct Theorem1Report {
    pub omega_zero: f64,
    pub omega_rd: f64,
    pub gamma: GammaBounds,
    pub gain_bound: f64,
    /// Lyapunov speed weight, the argmin of the bound objective.
    pub c: f64,
    pub h: f64,
    pub g_hat_range: (f64, f64),
    pub lyapunov_tol: f64,
    pub trajectories: Vec<TrajectoryReport>,
}

impl Theorem1Report {
    pub fn gain_condition_met(&self) -> bool {
        self.h > self.gain_bound
    }

    pub fn failures(&self) -> impl Iterator<Item = &TrajectoryReport> {
        self.trajectories
            .iter()
            .filter(|t| !t.passed(self.lyapunov_tol))
    }

    pub fn all_passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("omega0,g_hat0,converged,invariant,max_v_increase,residual\n");
        for t in &self.trajectories {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                crate::scenario::fmt_sig(t.omega0),
                crate::scenario::fmt_sig(t.g_hat0),
                t.converged,
                t.invariant,
                crate::scenario::fmt_sig(t.max_v_increase),
                crate::scenario::fmt_sig(t.residual)
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Integrate one trajectory of the reduced loop.
pub fn run_trajectory(
    sys: &ReducedLoop,
    c: f64,
    omega_zero: f64,
    x0: [f64; 2],
    cfg: &Theorem1Config,
) -> TrajectoryReport {
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let mut x = x0;
    let mut v = sys.lyapunov(c, &x);
    let mut max_increase = f64::NEG_INFINITY;
    let mut invariant = x[0] > 0.0 && x[0] <= omega_zero;
    for k in 0..steps {
        match rk4_step(|_, s| sys.rate(s), &x, k as f64 * cfg.dt, cfg.dt) {
            Ok(next) => x = next,
            Err(_) => {
                invariant = false;
                break;
            }
        }
        if !(x[0] > 0.0 && x[0] <= omega_zero) {
            invariant = false;
            break;
        }
        let v_next = sys.lyapunov(c, &x);
        max_increase = max_increase.max((v_next - v) / v.max(1.0));
        v = v_next;
    }
    let eq = sys.equilibrium();
    let residual = if invariant {
        (x[0] - eq[0]).abs() + (x[1] - eq[1]).abs()
    } else {
        f64::INFINITY
    };
    TrajectoryReport {
        omega0: x0[0],
        g_hat0: x0[1],
        converged: residual < cfg.residual_tol,
        invariant,
        max_v_increase: if steps == 0 { 0.0 } else { max_increase },
        residual,
    }
}

/// Check convergence, positive invariance and Lyapunov decrease of the
/// reduced loop from a grid of initial points covering the admissible set.
pub fn check_theorem1(
    p: &TurbineParams,
    gc: &GainConfig,
    cfg: &Theorem1Config,
) -> Result<Theorem1Report> {
    if !(gc.alpha > 0.0 && gc.h > 0.0) {
        return Err(Error::Validation("alpha and h must be positive".into()));
    }
    if cfg.grid_n < 2 || !(cfg.dt > 0.0) || !(cfg.horizon >= 0.0) {
        return Err(Error::Validation(
            "grid needs at least 2 points per axis, dt > 0 and horizon >= 0".into(),
        ));
    }
    if !(cfg.omega_rd_fraction > 0.0 && cfg.omega_rd_fraction <= 1.0) {
        return Err(Error::Validation(format!(
            "speed reference fraction must lie in (0, 1], got {}",
            cfg.omega_rd_fraction
        )));
    }
    let omega_zero = zero_speed(p, cfg.beta, cfg.v_w)?;
    let grid = log_grid(SLOPE_GRID_MIN, omega_zero, 20_000);
    let gamma = estimate_gamma_bounds(p, cfg.beta, cfg.v_w, &grid)?;
    let gain_bound = gain_bound_F(&gamma);
    let (c, _) = brute_force_bound(&gamma, BOUND_GRID);
    if gc.h <= gain_bound {
        log::warn!(
            "estimator gain {} does not exceed the bound {gain_bound}; convergence is not guaranteed",
            gc.h
        );
    }
    let sys = ReducedLoop {
        turbine: p,
        alpha: gc.alpha,
        h: gc.h,
        beta: cfg.beta,
        v_w: cfg.v_w,
        omega_rd: cfg.omega_rd_fraction * omega_zero,
    };
    let g_max = grid
        .iter()
        .map(|&w| sys.g(w))
        .fold(f64::NEG_INFINITY, f64::max);
    let g_hat_range = (-2.0 * a_prime(p).abs(), 2.0 * g_max);

    let n = cfg.grid_n;
    let starts: Vec<[f64; 2]> = (0..n)
        .flat_map(|i| {
            let w = omega_zero * (i + 1) as f64 / n as f64;
            (0..n).map(move |j| {
                let f = j as f64 / (n - 1) as f64;
                [w, g_hat_range.0 + f * (g_hat_range.1 - g_hat_range.0)]
            })
        })
        .collect();
    let trajectories = starts
        .par_iter()
        .map(|x0| run_trajectory(&sys, c, omega_zero, *x0, cfg))
        .collect();
    Ok(Theorem1Report {
        omega_zero,
        omega_rd: sys.omega_rd,
        gamma,
        gain_bound,
        c,
        h: gc.h,
        g_hat_range,
        lyapunov_tol: cfg.lyapunov_tol,
        trajectories,
    })
}

/// Linear tracking loop with a constant unknown term, used to check the
/// estimator error decay.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorDecayConfig {
    pub inertia: f64,
    pub h: f64,
    pub alpha: f64,
    /// The constant unknown term.
    pub f: f64,
    pub x0: f64,
    pub x_d: f64,
    pub f_hat0: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl Default for EstimatorDecayConfig {
    fn default() -> Self {
        Self {
            inertia: 10.08,
            h: 16.0,
            alpha: 5.0,
            f: 2.0,
            x0: 0.5,
            x_d: 0.8,
            f_hat0: 0.0,
            horizon: 5.0,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimatorDecayReport {
    /// Largest relative deviation of the estimation error from
    /// `f̃(0)·exp(−h t / J)`.
    pub max_rel_error: f64,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub f_tilde: Vec<f64>,
}

pub fn check_estimator_decay(cfg: &EstimatorDecayConfig) -> Result<EstimatorDecayReport> {
    if !(cfg.h > 0.0 && cfg.inertia > 0.0 && cfg.dt > 0.0 && cfg.horizon >= 0.0) {
        return Err(Error::Validation(
            "estimator decay needs h > 0, J > 0, dt > 0 and horizon >= 0".into(),
        ));
    }
    let (j, h, alpha) = (cfg.inertia, cfg.h, cfg.alpha);
    // State (x, z) with f̂ = z + h·x.
    let rate = |_: f64, s: &[f64; 2]| {
        let f_hat = s[1] + h * s[0];
        let u = -f_hat - alpha * (s[0] - cfg.x_d);
        [(cfg.f + u) / j, -h / j * (u + f_hat)]
    };
    let mut s = [cfg.x0, cfg.f_hat0 - h * cfg.x0];
    let f_tilde0 = cfg.f - cfg.f_hat0;
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let mut rep = EstimatorDecayReport::default();
    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let f_tilde = cfg.f - (s[1] + h * s[0]);
        let exact = f_tilde0 * (-h * t / j).exp();
        let err = if f_tilde0 == 0.0 {
            f_tilde.abs()
        } else {
            ((f_tilde - exact) / exact).abs()
        };
        rep.max_rel_error = rep.max_rel_error.max(err);
        rep.t.push(t);
        rep.x.push(s[0]);
        rep.f_tilde.push(f_tilde);
        if k < steps {
            s = rk4_step(rate, &s, t, cfg.dt)?;
        }
    }
    Ok(rep)
}

/// Worst deviation of the steady-state torque from `r² + a′` over random
/// polar controls with `r ∈ [0, 8)`.
pub fn check_torque_identity(
    p: &TurbineParams,
    k: &FeedbackGain,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let plant = Plant::new(p.clone())?;
    let map = SteadyFluxMap::new(&plant, k)?;
    let tq = derive_torque_quadratic(p, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let r: f64 = rng.random_range(0.0..8.0);
        let th = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let (u1, u2) = tq.polar_to_control(r, th);
        let te = plant.electromagnetic_torque(&map.flux(u1, u2));
        worst = worst.max((te - r * r - tq.a_prime).abs());
    }
    Ok(worst)
}

/// Smallest Hessian eigenvalue of the torque quadratic for the given turbine
/// and for `count` random variants with resistances, inductances and stator
/// voltage scaled by up to `±spread`. Returns one value per parameter set,
/// the unperturbed one first.
pub fn check_hessian_definiteness(
    p: &TurbineParams,
    k: &FeedbackGain,
    count: usize,
    spread: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count + 1);
    let min_eig = |q: &TurbineParams| -> Result<f64> {
        let tq = derive_torque_quadratic(q, k)?;
        Ok(tq.d[0].min(tq.d[1]))
    };
    out.push(min_eig(p)?);
    while out.len() < count + 1 {
        let mut f = || 1.0 + rng.random_range(-spread..=spread);
        let q = TurbineParams {
            r_s: p.r_s * f(),
            r_r: p.r_r * f(),
            l_s: p.l_s * f(),
            l_r: p.l_r * f(),
            l_m: p.l_m * f(),
            v_ds: p.v_ds * f(),
            v_qs: p.v_qs + 0.1 * spread * rng.random_range(-1.0..=1.0),
            ..p.clone()
        };
        if q.validate().is_err() {
            continue;
        }
        out.push(match min_eig(&q) {
            Ok(v) => v,
            Err(Error::NotPositiveDefinite(d)) => d[0].min(d[1]),
            Err(e) => return Err(e),
        });
    }
    Ok(out)
}

/// Closed-loop flux eigenvalues and the relative distance of each to its
/// target after the best pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleReport {
    pub eigenvalues: Vec<Complex64>,
    pub targets: Vec<Complex64>,
    pub worst_relative_gap: f64,
}

pub fn check_pole_placement(
    p: &TurbineParams,
    k: &FeedbackGain,
    targets: [Complex64; 4],
) -> Result<PoleReport> {
    let plant = Plant::new(p.clone())?;
    let ev = eig4_real(&closed_loop_matrix(&plant, k))?;
    let mut best = f64::INFINITY;
    let mut perm = [0usize, 1, 2, 3];
    // Heap's algorithm over the 24 pairings.
    let mut c = [0usize; 4];
    let gap = |perm: &[usize; 4]| {
        (0..4)
            .map(|i| (ev[perm[i]] - targets[i]).norm() / targets[i].norm())
            .fold(0.0, f64::max)
    };
    best = best.min(gap(&perm));
    let mut i = 0;
    while i < 4 {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(gap(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(PoleReport {
        eigenvalues: ev.to_vec(),
        targets: targets.to_vec(),
        worst_relative_gap: best,
    })
}

/// Which closed form of the gain bound applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundRegime {
    /// `γ̄ ≥ −γ̲`
    UpperDominant,
    /// `−γ̲ > γ̄ ≥ −γ̲/3`
    Intermediate,
    /// `γ̄ < −γ̲/3`
    LowerDominant,
}

pub fn bound_regime(gb: &GammaBounds) -> BoundRegime {
    if gb.upper >= -gb.lower {
        BoundRegime::UpperDominant
    } else if gb.upper >= -gb.lower / 3.0 {
        BoundRegime::Intermediate
    } else {
        BoundRegime::LowerDominant
    }
}

/// Compare the closed-form gain bound with the brute-force minimum on
/// `count` random bound pairs drawn evenly from the three regimes. Returns
/// `(bounds, relative error)` per pair.
pub fn check_gain_bound_agreement(count: usize, seed: u64) -> Vec<(GammaBounds, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let lower = -(10f64).powf(rng.random_range(-1.5..1.5));
            let m = -lower;
            let upper = match i % 3 {
                0 => m * rng.random_range(1.0..5.0),
                1 => m * rng.random_range(1.0 / 3.0..1.0),
                _ => m * rng.random_range(0.02..1.0 / 3.0),
            };
            let gb = GammaBounds { lower, upper };
            let exact = gain_bound_F(&gb);
            let (_, brute) = brute_force_bound(&gb, BOUND_GRID);
            (gb, ((brute - exact) / exact).abs())
        })
        .collect()
}
