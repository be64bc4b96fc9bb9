use std::f64::consts::PI;

use super::gains::{FeedbackGain, GainConfig};
use super::quadratic::{derive_with, rotor_voltages, wrap_angle, SteadyFluxMap, TorqueQuadratic};
use crate::error::Result;
use crate::plant::{Plant, TurbineParams};

pub const THETA_GRID: usize = 720;
/// Final bracket width of the golden-section refinement (rad).
pub const THETA_TOL: f64 = 1e-9;
/// Local minima of the grid scan that get refined.
const MAX_REFINED_BASINS: usize = 4;

/// Weighted squared power error `½ eᵀ W e`.
pub fn performance_u(gc: &GainConfig, p: f64, q: f64, p_d: f64, q_d: f64) -> f64 {
    let (ep, eq) = (p - p_d, q - q_d);
    0.5 * (gc.w_p * ep * ep + 2.0 * gc.w_pq * ep * eq + gc.w_q * eq * eq)
}

/// Steady-state (P, Q) predicted for a commanded torque and angle.
#[derive(Debug, Clone)]
pub struct PowerPredictor {
    pub plant: Plant,
    pub k: FeedbackGain,
    pub map: SteadyFluxMap,
    pub tq: TorqueQuadratic,
}

impl PowerPredictor {
    pub fn new(plant: Plant, k: FeedbackGain) -> Result<Self> {
        let map = SteadyFluxMap::new(&plant, &k)?;
        let tq = derive_with(&plant, &map)?;
        Ok(Self { plant, k, map, tq })
    }

    pub fn predict(&self, r2: f64, theta: f64, omega_rd: f64) -> (f64, f64) {
        let (u1, u2) = self.tq.polar_to_control(r2.max(0.0).sqrt(), theta);
        let phi = self.map.flux(u1, u2);
        let (vdr, vqr) = rotor_voltages(&self.k, &phi, omega_rd, u1, u2);
        let out = self.plant.outputs(&phi, vdr, vqr);
        (out.p, out.q)
    }

    pub fn cost(&self, gc: &GainConfig, r2: f64, theta: f64, omega_rd: f64, p_d: f64, q_d: f64) -> f64 {
        let (p, q) = self.predict(r2, theta, omega_rd);
        performance_u(gc, p, q, p_d, q_d)
    }

    /// Angle in [−π, π) minimising the predicted performance measure.
    pub fn theta_minimize(&self, gc: &GainConfig, r2: f64, omega_rd: f64, p_d: f64, q_d: f64) -> f64 {
        minimize_periodic(|th| self.cost(gc, r2, th, omega_rd, p_d, q_d))
    }
}

pub fn predict_pq(
    p: &TurbineParams,
    k: &FeedbackGain,
    r2: f64,
    theta: f64,
    omega_rd: f64,
) -> Result<(f64, f64)> {
    let pred = PowerPredictor::new(Plant::new(p.clone())?, *k)?;
    Ok(pred.predict(r2, theta, omega_rd))
}

pub fn theta_minimize(
    p: &TurbineParams,
    k: &FeedbackGain,
    gc: &GainConfig,
    r2: f64,
    omega_rd: f64,
    p_d: f64,
    q_d: f64,
) -> Result<f64> {
    let pred = PowerPredictor::new(Plant::new(p.clone())?, *k)?;
    Ok(pred.theta_minimize(gc, r2, omega_rd, p_d, q_d))
}

/// Global minimiser of a 2π-periodic function over [−π, π): grid scan, then
/// golden-section refinement around the deepest local minima. Ties go to
/// the smallest angle.
pub fn minimize_periodic(f: impl Fn(f64) -> f64) -> f64 {
    let n = THETA_GRID;
    let step = 2.0 * PI / n as f64;
    let grid: Vec<f64> = (0..n).map(|k| f(-PI + k as f64 * step)).collect();

    let mut best_k = 0;
    for k in 1..n {
        if grid[k] < grid[best_k] {
            best_k = k;
        }
    }
    let mut best = (-PI + best_k as f64 * step, grid[best_k]);

    let mut basins: Vec<usize> = (0..n)
        .filter(|&k| {
            let prev = grid[(k + n - 1) % n];
            let next = grid[(k + 1) % n];
            grid[k] <= prev && grid[k] <= next && (grid[k] < prev || grid[k] < next)
        })
        .collect();
    basins.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]).then(a.cmp(&b)));
    basins.truncate(MAX_REFINED_BASINS);

    for k in basins {
        let centre = -PI + k as f64 * step;
        let (th, val) = golden_section(&f, centre - step, centre + step, THETA_TOL);
        let th = wrap_angle(th);
        if val < best.1 || (val == best.1 && th < best.0) {
            best = (th, val);
        }
    }
    best.0
}

/// Golden-section search for a minimum inside `[lo, hi]`; returns the best
/// point seen and its value.
pub fn golden_section(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
