use crate::error::{Error, Result};

/// State feedback gain, one row per rotor voltage axis.
pub type FeedbackGain = [[f64; 4]; 2];

/// Gains K₁ (d-axis) and K₂ (q-axis) placing the closed-loop flux poles at
/// −10, −15 and −20 ± 5j for the default turbine.
pub const DEFAULT_K: FeedbackGain = [
    [12277.0, -4493.8, 32.7, -6.3],
    [-1615.4, 12117.0, -0.4, 32.2],
];

/// Tuning of the four subcontrollers.
#[derive(Debug, Clone, PartialEq)]
pub struct GainConfig {
    pub k: FeedbackGain,
    /// Speed tracking gain α.
    pub alpha: f64,
    /// Estimator gain h.
    pub h: f64,
    /// Performance weights of U.
    pub w_p: f64,
    pub w_q: f64,
    pub w_pq: f64,
    /// Maximum ω_rd step.
    pub eps1: f64,
    /// Gradient normalisation of the ω_rd step.
    pub eps2: f64,
    /// Pitch rate gain (deg/s per pu).
    pub eps3: f64,
    /// Averaging window at the end of each hold (s).
    pub t0: f64,
    /// Hold duration (s).
    pub t1: f64,
    /// Ramp duration (s).
    pub t2: f64,
    pub delta_omega_rd_init: f64,
    pub omega_rd_min: f64,
    pub omega_rd_max: f64,
    pub omega_rd_0: f64,
    /// Time over which the applied polar angle moves to a new optimum (s).
    pub theta_slew: f64,
}

impl Default for GainConfig {
    fn default() -> Self {
        let eps1 = 0.025;
        Self {
            k: DEFAULT_K,
            alpha: 5.0,
            h: 16.0,
            w_p: 10.0,
            w_q: 1.0,
            w_pq: 0.0,
            eps1,
            eps2: 2.0,
            eps3: 2.7,
            t0: 1.0,
            t1: 4.0,
            t2: 6.0,
            delta_omega_rd_init: eps1,
            omega_rd_min: 0.05,
            omega_rd_max: 1.4,
            omega_rd_0: 0.5,
            theta_slew: 2.0,
        }
    }
}

impl GainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Validation(msg.to_string()));
        if self.k.iter().flatten().any(|x| !x.is_finite()) {
            return fail("feedback gain K must be finite");
        }
        if !(self.alpha > 0.0) {
            return fail("alpha must be positive");
        }
        if !(self.h > 0.0) {
            return fail("h must be positive");
        }
        if !(self.w_p > 0.0 && self.w_p * self.w_q > self.w_pq * self.w_pq) {
            return fail("weights must satisfy w_p > 0 and w_p*w_q > w_pq^2");
        }
        if !(self.eps1 > 0.0 && self.eps2 > 0.0 && self.eps3 > 0.0) {
            return fail("eps1, eps2 and eps3 must be positive");
        }
        if !(self.t0 > 0.0 && self.t0 < self.t1) {
            return fail("averaging window must satisfy 0 < T0 < T1");
        }
        if !(self.t2 > 0.0) {
            return fail("ramp duration T2 must be positive");
        }
        if !(self.theta_slew >= 0.0 && self.theta_slew.is_finite()) {
            return fail("theta_slew must be finite and nonnegative");
        }
        if !self.delta_omega_rd_init.is_finite() {
            return fail("initial omega_rd step must be finite");
        }
        if !(self.omega_rd_min > 0.0
            && self.omega_rd_min <= self.omega_rd_0
            && self.omega_rd_0 <= self.omega_rd_max)
        {
            return fail("need 0 < omega_rd_min <= omega_rd_0 <= omega_rd_max");
        }
        Ok(())
    }
}
