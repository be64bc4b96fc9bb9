use super::gains::GainConfig;
use super::quadratic::a_prime;
use crate::error::{Error, Result};
use crate::plant::{mechanical_power_pu, TurbineParams};

/// Internal state of the uncertainty estimator. The estimate itself is
/// `ĝ = z + h·ω_r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorState {
    pub z: f64,
}

impl EstimatorState {
    /// State whose estimate equals `g_hat` at rotor speed `omega_r`.
    pub fn from_estimate(g_hat: f64, h: f64, omega_r: f64) -> Self {
        Self { z: g_hat - h * omega_r }
    }

    pub fn g_hat(&self, h: f64, omega_r: f64) -> f64 {
        self.z + h * omega_r
    }
}

/// Commanded equivalent torque `max(ĝ + α ln(ω_r/ω_rd), 0)`.
pub fn equivalent_torque(alpha: f64, g_hat: f64, omega_r: f64, omega_rd: f64) -> f64 {
    (g_hat + alpha * (omega_r / omega_rd).ln()).max(0.0)
}

/// `ż` with the rotor speed held fixed.
pub fn estimator_rate(gc: &GainConfig, inertia: f64, z: f64, omega_r: f64, omega_rd: f64) -> f64 {
    let g_hat = z + gc.h * omega_r;
    let r2 = equivalent_torque(gc.alpha, g_hat, omega_r, omega_rd);
    -(gc.h / inertia) * (g_hat - r2)
}

/// Advance the estimator one RK4 step at frozen `ω_r`. Returns the new state
/// and the `r²` commanded at the start of the step.
pub fn torque_estimator_step(
    gc: &GainConfig,
    inertia: f64,
    est: EstimatorState,
    omega_r: f64,
    omega_rd: f64,
    dt: f64,
) -> Result<(EstimatorState, f64)> {
    if !(omega_r > 0.0 && omega_rd > 0.0) {
        return Err(Error::Domain(format!(
            "estimator needs positive speeds, got omega_r = {omega_r}, omega_rd = {omega_rd}"
        )));
    }
    let r2 = equivalent_torque(gc.alpha, est.g_hat(gc.h, omega_r), omega_r, omega_rd);
    let f = |z: f64| estimator_rate(gc, inertia, z, omega_r, omega_rd);
    let z = est.z;
    let k1 = f(z);
    let k2 = f(z + 0.5 * dt * k1);
    let k3 = f(z + 0.5 * dt * k2);
    let k4 = f(z + dt * k3);
    let z = z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    Ok((EstimatorState { z }, r2))
}

/// True lumped torque term `P_m/ω_r − a′ − C_f·ω_r`. The controller never
/// sees this; it is the quantity the estimator tracks.
pub fn lumped_uncertainty_g(p: &TurbineParams, omega_r: f64, beta: f64, v_w: f64) -> Result<f64> {
    let aero = mechanical_power_pu(p, omega_r, beta, v_w)?;
    Ok(aero.p_m / omega_r - a_prime(p) - p.friction * omega_r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_argument_clamps_to_zero() {
        let gc = GainConfig::default();
        let est = EstimatorState::from_estimate(-3.0, gc.h, 0.5);
        let (_, r2) = torque_estimator_step(&gc, 10.08, est, 0.5, 0.9, 1e-3).unwrap();
        assert_eq!(r2, 0.0);
    }

    #[test]
    fn on_target_speed_passes_estimate_through() {
        let gc = GainConfig::default();
        let est = EstimatorState::from_estimate(0.5, gc.h, 0.8);
        let (_, r2) = torque_estimator_step(&gc, 10.08, est, 0.8, 0.8, 1e-3).unwrap();
        assert!((r2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_speed() {
        let gc = GainConfig::default();
        let est = EstimatorState { z: 0.0 };
        assert!(torque_estimator_step(&gc, 10.08, est, 0.0, 0.8, 1e-3).is_err());
        assert!(torque_estimator_step(&gc, 10.08, est, 0.5, -1.0, 1e-3).is_err());
    }

    #[test]
    fn estimate_round_trip() {
        let e = EstimatorState::from_estimate(2.5, 16.0, 0.7);
        assert!((e.g_hat(16.0, 0.7) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn lumped_term_positive_at_low_speed() {
        let p = TurbineParams::default();
        assert!(lumped_uncertainty_g(&p, 0.05, 0.0, 10.0).unwrap() > 0.0);
        assert!(lumped_uncertainty_g(&p, 0.0, 0.0, 10.0).is_err());
        assert!(lumped_uncertainty_g(&p, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn lumped_term_rearranges_to_power_over_speed() {
        let p = TurbineParams {
            friction: 0.0,
            ..TurbineParams::default()
        };
        for w in [0.3, 0.9, 1.7] {
            let g = lumped_uncertainty_g(&p, w, 0.0, 10.0).unwrap();
            let pm = mechanical_power_pu(&p, w, 0.0, 10.0).unwrap().p_m;
            assert!((g + a_prime(&p) - pm / w).abs() < 1e-12);
        }
    }
}
