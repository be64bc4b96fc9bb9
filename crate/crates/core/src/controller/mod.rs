//! Rotor-voltage feedback, torque command with uncertainty estimation, the
//! speed-reference scheduler and the pitch law.

mod estimator;
mod gains;
mod pitch;
mod quadratic;
mod scheduler;
mod theta;

pub use estimator::{
    equivalent_torque, estimator_rate, lumped_uncertainty_g, torque_estimator_step, EstimatorState,
};
pub use gains::{FeedbackGain, GainConfig, DEFAULT_K};
pub use pitch::{pitch_step, PitchState};
pub use quadratic::{
    a_prime, closed_loop_matrix, derive_torque_quadratic, rotor_voltages, wrap_angle, SteadyFluxMap,
    TorqueQuadratic,
};
pub use scheduler::{
    scheduler_step, smoothstep, AngleSlew, Phase, SchedulerEvent, SchedulerState,
};
pub use theta::{
    golden_section, minimize_periodic, performance_u, predict_pq, theta_minimize, PowerPredictor,
    THETA_GRID,
};
