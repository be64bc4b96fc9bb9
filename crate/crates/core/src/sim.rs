//! Fixed-step closed-loop simulation of the turbine and its controller.

use crate::controller::{
    closed_loop_matrix, equivalent_torque, performance_u, pitch_step, rotor_voltages,
    scheduler_step, AngleSlew, EstimatorState, GainConfig, PitchState, PowerPredictor, SchedulerEvent,
    SchedulerState,
};
use crate::error::{Error, Result};
use crate::linalg::{self, Vec4};
use crate::plant::{Plant, TurbineParams, TORQUE_SPEED_FLOOR};

/// Rotor speed floor used inside the speed-tracking logarithm.
pub const SPEED_FLOOR: f64 = 1e-6;

/// Classical fourth-order Runge–Kutta step.
pub fn rk4_step<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    x: &[f64; N],
    t: f64,
    dt: f64,
) -> Result<[f64; N]> {
    let check = |v: [f64; N]| -> Result<[f64; N]> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(v)
        } else {
            Err(Error::NonFinite { t })
        }
    };
    let axpy = |a: f64, k: &[f64; N]| -> [f64; N] { std::array::from_fn(|i| x[i] + a * k[i]) };
    let k1 = check(f(t, x))?;
    let k2 = check(f(t + 0.5 * dt, &axpy(0.5 * dt, &k1)))?;
    let k3 = check(f(t + 0.5 * dt, &axpy(0.5 * dt, &k2)))?;
    let k4 = check(f(t + dt, &axpy(dt, &k3)))?;
    check(std::array::from_fn(|i| {
        x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

/// Time-varying inputs of a run.
pub trait Inputs {
    /// Wind speed (m/s).
    fn wind(&self, t: f64) -> f64;
    /// Active and reactive power demand (pu).
    fn setpoints(&self, t: f64) -> (f64, f64);
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub omega_r: f64,
    /// Fluxes; `None` selects the equilibrium of the initial control.
    pub phi: Option<Vec4>,
    pub beta: f64,
    /// Initial uncertainty estimate; `None` selects `−a′`.
    pub g_hat: Option<f64>,
}

impl Default for InitialState {
    fn default() -> Self {
        Self {
            omega_r: 0.05,
            phi: None,
            beta: 0.0,
            g_hat: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub log_stride: usize,
    pub initial: InitialState,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 5e-4,
            duration: 3600.0,
            log_stride: 200,
            initial: InitialState::default(),
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be nonnegative, got {}", self.duration)));
        }
        if self.log_stride == 0 {
            return Err(Error::Config("log_stride must be at least 1".into()));
        }
        if !(self.initial.omega_r > 0.0) {
            return Err(Error::Config("initial rotor speed must be positive".into()));
        }
        Ok(())
    }
}

/// Largest step for which RK4 stays stable on the fastest closed-loop
/// electrical mode.
pub fn max_stable_dt(plant: &Plant, gc: &GainConfig) -> Result<f64> {
    let ev = linalg::eig4_real(&closed_loop_matrix(plant, &gc.k))?;
    let fastest = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(if fastest > 0.0 { 2.0 / fastest } else { f64::INFINITY })
}

/// One logged sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogRow {
    pub t: f64,
    pub v_w: f64,
    pub phi: Vec4,
    pub currents: Vec4,
    pub omega_r: f64,
    pub omega_rd: f64,
    pub g_hat: f64,
    pub r2: f64,
    pub theta: f64,
    pub beta: f64,
    pub v_dr: f64,
    pub v_qr: f64,
    pub p: f64,
    pub q: f64,
    pub pf: f64,
    pub cp: f64,
    pub lambda: f64,
    pub u: f64,
    pub p_d: f64,
    pub q_d: f64,
}

pub const LOG_COLUMNS: [&str; 28] = [
    "t", "v_w", "phi_ds", "phi_qs", "phi_dr", "phi_qr", "i_ds", "i_qs", "i_dr", "i_qr", "omega_r",
    "omega_rd", "g_hat", "r2", "theta", "beta", "v_dr", "v_qr", "p", "q", "pf", "cp", "lambda", "u",
    "p_d", "q_d", "pf_d", "e_p",
];

impl LogRow {
    pub fn to_values(&self) -> [f64; 28] {
        let pf_d = crate::plant::power_factor(self.p_d, self.q_d);
        [
            self.t,
            self.v_w,
            self.phi[0],
            self.phi[1],
            self.phi[2],
            self.phi[3],
            self.currents[0],
            self.currents[1],
            self.currents[2],
            self.currents[3],
            self.omega_r,
            self.omega_rd,
            self.g_hat,
            self.r2,
            self.theta,
            self.beta,
            self.v_dr,
            self.v_qr,
            self.p,
            self.q,
            self.pf,
            self.cp,
            self.lambda,
            self.u,
            self.p_d,
            self.q_d,
            pf_d,
            self.p - self.p_d,
        ]
    }

    pub fn from_values(v: &[f64; 28]) -> Self {
        Self {
            t: v[0],
            v_w: v[1],
            phi: [v[2], v[3], v[4], v[5]],
            currents: [v[6], v[7], v[8], v[9]],
            omega_r: v[10],
            omega_rd: v[11],
            g_hat: v[12],
            r2: v[13],
            theta: v[14],
            beta: v[15],
            v_dr: v[16],
            v_qr: v[17],
            p: v[18],
            q: v[19],
            pf: v[20],
            cp: v[21],
            lambda: v[22],
            u: v[23],
            p_d: v[24],
            q_d: v[25],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub rows: Vec<LogRow>,
}

impl SimLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, f: impl Fn(&LogRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    /// Rows with `t` in `[from, to)`.
    pub fn window(&self, from: f64, to: f64) -> impl Iterator<Item = &LogRow> {
        self.rows.iter().filter(move |r| r.t >= from && r.t < to)
    }
}

/// Everything the loop needs besides the integrated states.
struct Loop<'a> {
    plant: &'a Plant,
    gc: &'a GainConfig,
    pred: &'a PowerPredictor,
}

impl Loop<'_> {
    fn commanded_r2(&self, z: f64, omega_r: f64, omega_rd: f64) -> (f64, f64) {
        let g_hat = z + self.gc.h * omega_r;
        let r2 = equivalent_torque(self.gc.alpha, g_hat, omega_r.max(SPEED_FLOOR), omega_rd);
        (g_hat, r2)
    }

    fn rotor_inputs(&self, phi: &Vec4, omega_r: f64, r2: f64, theta: f64) -> (f64, f64) {
        let (u1, u2) = self.pred.tq.polar_to_control(r2.sqrt(), theta);
        rotor_voltages(&self.gc.k, phi, omega_r, u1, u2)
    }

    /// Derivative of (φ, ω_r, z) with reference, angle, pitch and wind fixed.
    fn derivative(&self, x: &[f64; 6], omega_rd: f64, theta: f64, beta: f64, v_w: f64) -> [f64; 6] {
        let phi = [x[0], x[1], x[2], x[3]];
        let (omega_r, z) = (x[4], x[5]);
        let (g_hat, r2) = self.commanded_r2(z, omega_r, omega_rd);
        let (vdr, vqr) = self.rotor_inputs(&phi, omega_r, r2, theta);
        let dphi = self.plant.flux_derivative(&phi, omega_r, vdr, vqr);
        let t_e = self.plant.electromagnetic_torque(&phi);
        let (t_m, _) = self.plant.mechanical_torque(omega_r, beta, v_w);
        let p = &self.plant.params;
        let domega = (t_m - t_e - p.friction * omega_r) / p.inertia;
        let dz = -(self.gc.h / p.inertia) * (g_hat - r2);
        [dphi[0], dphi[1], dphi[2], dphi[3], domega, dz]
    }
}

/// Run the closed loop over `sim.duration` and return the logged signals.
pub fn run_scenario(
    p: &TurbineParams,
    gc: &GainConfig,
    sim: &SimConfig,
    inputs: &impl Inputs,
) -> Result<SimLog> {
    sim.validate()?;
    gc.validate()?;
    let plant = Plant::new(p.clone())?;
    let dt_max = max_stable_dt(&plant, gc)?;
    if sim.dt > dt_max {
        return Err(Error::Config(format!(
            "dt = {} exceeds the stability limit {dt_max:.4} s of the closed-loop flux dynamics",
            sim.dt
        )));
    }
    let pred = PowerPredictor::new(plant.clone(), gc.k)?;
    let lp = Loop {
        plant: &plant,
        gc,
        pred: &pred,
    };
    let params = &plant.params;
    let beta_limits = (params.beta_min, params.beta_max);

    let init = &sim.initial;
    let mut sch = SchedulerState::new(gc);
    let mut pitch = PitchState {
        beta: init.beta.clamp(params.beta_min, params.beta_max),
    };
    let g0 = init.g_hat.unwrap_or(-pred.tq.a_prime);
    let est = EstimatorState::from_estimate(g0, gc.h, init.omega_r);
    let (mut p_d, mut q_d) = inputs.setpoints(0.0);
    let (_, r2_0) = lp.commanded_r2(est.z, init.omega_r, sch.omega_rd);
    sch.theta = pred.theta_minimize(gc, r2_0, sch.omega_rd, p_d, q_d);
    let mut slew = AngleSlew::at(sch.theta);
    let phi0 = init.phi.unwrap_or_else(|| {
        let (u1, u2) = pred.tq.polar_to_control(r2_0.sqrt(), sch.theta);
        pred.map.flux(u1, u2)
    });
    let mut x = [phi0[0], phi0[1], phi0[2], phi0[3], init.omega_r, est.z];

    let n_steps = sim.n_steps();
    let mut log = SimLog {
        rows: Vec::with_capacity(n_steps / sim.log_stride + 1),
    };
    let mut warned_floor = false;

    for n in 0..=n_steps {
        let t = n as f64 * sim.dt;
        let v_w = inputs.wind(t);
        let (pd, qd) = inputs.setpoints(t);
        let phi = [x[0], x[1], x[2], x[3]];
        let omega_r = x[4];
        let (g_hat, r2) = lp.commanded_r2(x[5], omega_r, sch.omega_rd);
        if (pd, qd) != (p_d, q_d) {
            p_d = pd;
            q_d = qd;
            slew.retarget(pred.theta_minimize(gc, r2, sch.omega_rd, p_d, q_d), gc.theta_slew);
            sch.theta = slew.angle(gc.theta_slew);
        }
        let (vdr, vqr) = lp.rotor_inputs(&phi, omega_r, r2, sch.theta);
        let out = plant.outputs(&phi, vdr, vqr);
        let u_now = performance_u(gc, out.p, out.q, p_d, q_d);

        if n % sim.log_stride == 0 {
            let (_, aero) = plant.mechanical_torque(omega_r, pitch.beta, v_w);
            log.rows.push(LogRow {
                t,
                v_w,
                phi,
                currents: out.currents,
                omega_r,
                omega_rd: sch.omega_rd,
                g_hat,
                r2,
                theta: sch.theta,
                beta: pitch.beta,
                v_dr: vdr,
                v_qr: vqr,
                p: out.p,
                q: out.q,
                pf: out.pf,
                cp: aero.cp,
                lambda: aero.lambda,
                u: u_now,
                p_d,
                q_d,
            });
        }
        if n == n_steps {
            break;
        }

        let (omega_rd, theta, beta) = (sch.omega_rd, sch.theta, pitch.beta);
        x = rk4_step(
            |_, s| lp.derivative(s, omega_rd, theta, beta, v_w),
            &x,
            t,
            sim.dt,
        )?;
        if x[4] < TORQUE_SPEED_FLOOR && !warned_floor {
            log::warn!("rotor speed {:.3e} pu below the torque floor at t = {t:.3} s", x[4]);
            warned_floor = true;
        }
        if x[4] < SPEED_FLOOR {
            x[4] = SPEED_FLOOR;
        }

        pitch = pitch_step(gc, pitch, beta_limits, out.p, params.p_rated, sim.dt);
        let (next, event) = scheduler_step(gc, &sch, u_now, sim.dt);
        sch = next;
        slew.advance(sim.dt);
        if let Some(ev) = event {
            if let SchedulerEvent::DegenerateStep { .. } = ev {
                log::info!("degenerate reference step at t = {t:.3} s");
            }
            let (_, r2_now) = lp.commanded_r2(x[5], x[4], sch.omega_rd);
            slew.retarget(pred.theta_minimize(gc, r2_now, sch.omega_rd, p_d, q_d), gc.theta_slew);
        }
        sch.theta = slew.angle(gc.theta_slew);
    }
    Ok(log)
}
