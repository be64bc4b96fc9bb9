use super::gains::GainConfig;
use super::quadratic::wrap_angle;

const DEGENERATE_STEP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Hold,
    Ramp,
}

/// Hold/ramp cycle that moves the speed reference along the estimated
/// gradient of the averaged performance measure.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    pub phase: Phase,
    pub phase_clock: f64,
    pub omega_rd: f64,
    /// Reference at the start of the current ramp.
    pub omega_rd_prev: f64,
    /// Last commanded step (before clamping to the reference bounds).
    pub delta_omega_rd: f64,
    pub avg_accumulator: f64,
    pub first_avg: Option<f64>,
    /// Polar angle currently applied (rad).
    pub theta: f64,
}

impl SchedulerState {
    pub fn new(gc: &GainConfig) -> Self {
        Self {
            phase: Phase::Hold,
            phase_clock: 0.0,
            omega_rd: gc.omega_rd_0,
            omega_rd_prev: gc.omega_rd_0,
            delta_omega_rd: gc.delta_omega_rd_init,
            avg_accumulator: 0.0,
            first_avg: None,
            theta: -std::f64::consts::PI,
        }
    }

    fn target(&self, gc: &GainConfig) -> f64 {
        (self.omega_rd_prev + self.delta_omega_rd).clamp(gc.omega_rd_min, gc.omega_rd_max)
    }
}

/// Smooth transition of the applied polar angle towards a new optimum.
/// A step in the angle would move the equilibrium rotor flux
/// discontinuously and put a voltage impulse on the rotor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSlew {
    from: f64,
    to: f64,
    clock: f64,
}

impl AngleSlew {
    pub fn at(theta: f64) -> Self {
        Self {
            from: theta,
            to: theta,
            clock: f64::INFINITY,
        }
    }

    /// Start moving from the current angle to `target` along the shorter arc.
    pub fn retarget(&mut self, target: f64, duration: f64) {
        let now = self.angle(duration);
        self.from = now;
        self.to = now + wrap_angle(target - now);
        self.clock = 0.0;
    }

    pub fn advance(&mut self, dt: f64) {
        self.clock += dt;
    }

    /// Applied angle, wrapped to [−π, π).
    pub fn angle(&self, duration: f64) -> f64 {
        let s = if duration > 0.0 {
            smoothstep(self.clock / duration)
        } else {
            1.0
        };
        wrap_angle(self.from + (self.to - self.from) * s)
    }

    pub fn target(&self) -> f64 {
        wrap_angle(self.to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchedulerEvent {
    /// A hold finished with the given window average and a ramp began.
    HoldEnded { average: f64, step: f64 },
    /// As `HoldEnded`, but the previous step was too small to form a
    /// gradient quotient, so the exploration step `+ε1` was used.
    DegenerateStep { average: f64 },
    RampEnded,
}

pub fn smoothstep(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Advance the scheduler by `dt`, with `u_now` the performance measure over
/// the step.
pub fn scheduler_step(
    gc: &GainConfig,
    sch: &SchedulerState,
    u_now: f64,
    dt: f64,
) -> (SchedulerState, Option<SchedulerEvent>) {
    let mut s = sch.clone();
    let start = s.phase_clock;
    s.phase_clock += dt;
    let eps = 1e-9 * dt;
    match s.phase {
        Phase::Hold => {
            let window_lo = gc.t1 - gc.t0;
            let overlap = (s.phase_clock.min(gc.t1) - start.max(window_lo)).max(0.0);
            s.avg_accumulator += u_now * overlap;
            if s.phase_clock < gc.t1 - eps {
                return (s, None);
            }
            let average = s.avg_accumulator / gc.t0;
            let (step, event) = match s.first_avg {
                None => (
                    gc.delta_omega_rd_init,
                    SchedulerEvent::HoldEnded {
                        average,
                        step: gc.delta_omega_rd_init,
                    },
                ),
                Some(first) => {
                    let prev = s.delta_omega_rd;
                    if prev.abs() < DEGENERATE_STEP {
                        log::debug!("omega_rd step degenerate, exploring with +eps1");
                        (gc.eps1, SchedulerEvent::DegenerateStep { average })
                    } else {
                        let q = (average - first) / (gc.eps2 * prev);
                        let step = -gc.eps1 * q.clamp(-1.0, 1.0);
                        (step, SchedulerEvent::HoldEnded { average, step })
                    }
                }
            };
            s.first_avg = Some(average);
            s.avg_accumulator = 0.0;
            s.delta_omega_rd = step;
            s.omega_rd_prev = s.omega_rd;
            s.phase = Phase::Ramp;
            s.phase_clock = (s.phase_clock - gc.t1).max(0.0);
            s.omega_rd = s.omega_rd_prev + (s.target(gc) - s.omega_rd_prev) * smoothstep(s.phase_clock / gc.t2);
            (s, Some(event))
        }
        Phase::Ramp => {
            let target = s.target(gc);
            if s.phase_clock < gc.t2 - eps {
                s.omega_rd = s.omega_rd_prev + (target - s.omega_rd_prev) * smoothstep(s.phase_clock / gc.t2);
                return (s, None);
            }
            s.omega_rd = target;
            s.phase = Phase::Hold;
            s.phase_clock = (s.phase_clock - gc.t2).max(0.0);
            (s, Some(SchedulerEvent::RampEnded))
        }
    }
}
