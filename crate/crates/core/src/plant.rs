//! Per-unit DFIG wind turbine: flux dynamics in the synchronous dq frame,
//! rotor mechanics, Heier aerodynamics and the stator/rotor power outputs.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat4, Vec4};

/// Rotor speed used in place of ω_r when forming T_m = P_m / ω_r.
pub const TORQUE_SPEED_FLOOR: f64 = 1e-3;

/// Electrical, mechanical and aerodynamic constants of one turbine.
///
/// Defaults describe the 1.5 MW, 575 V, 60 Hz machine of the Simulink
/// distributed resources library.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbineParams {
    /// Synchronous frame speed (pu).
    pub omega_s: f64,
    pub r_s: f64,
    pub r_r: f64,
    pub l_s: f64,
    pub l_r: f64,
    pub l_m: f64,
    pub v_ds: f64,
    pub v_qs: f64,
    /// Rotor inertia J (pu).
    pub inertia: f64,
    /// Viscous friction C_f (pu).
    pub friction: f64,
    /// Swept area (m²), informational.
    pub swept_area: f64,
    /// Blade radius (m), informational.
    pub blade_radius: f64,
    /// Pitch limits (deg).
    pub beta_min: f64,
    pub beta_max: f64,
    /// Nominal mechanical power (W).
    pub p_nom: f64,
    /// Maximum power at base wind speed (pu of `p_nom`).
    pub p_wind_base: f64,
    /// Generator base power (VA).
    pub p_elec_base: f64,
    /// Peak of the C_p surface.
    pub cp_nom: f64,
    /// Tip speed ratio at the C_p peak.
    pub lambda_nom: f64,
    /// Base rotational speed (pu).
    pub omega_r_base: f64,
    /// Nominal rotor speed (rad/s) corresponding to 1 pu.
    pub omega_r_nom: f64,
    /// Base wind speed (m/s).
    pub v_w_base: f64,
    /// Rated electrical output (pu).
    pub p_rated: f64,
    /// Heier surface coefficients c1..c6.
    pub cp_coeffs: [f64; 6],
}

impl Default for TurbineParams {
    fn default() -> Self {
        Self {
            omega_s: 1.0,
            r_s: 0.00706,
            r_r: 0.005,
            l_s: 3.071,
            l_r: 3.056,
            l_m: 2.9,
            v_ds: 1.0,
            v_qs: 0.0,
            inertia: 10.08,
            friction: 0.01,
            swept_area: 4656.6,
            blade_radius: 38.5,
            beta_min: 0.0,
            beta_max: 30.0,
            p_nom: 1.5e6,
            p_wind_base: 0.73,
            p_elec_base: 1.5e6 / 0.9,
            cp_nom: 0.48,
            lambda_nom: 8.1,
            omega_r_base: 1.2,
            omega_r_nom: 2.1039,
            v_w_base: 12.0,
            p_rated: 1.0,
            cp_coeffs: [0.5176, 116.0, 0.4, 5.0, 21.0, 0.0068],
        }
    }
}

impl TurbineParams {
    /// Leakage coefficient σ = 1 − L_m²/(L_s L_r).
    pub fn sigma(&self) -> f64 {
        1.0 - self.l_m * self.l_m / (self.l_s * self.l_r)
    }

    /// P_nom · P_wind_base / P_elec_base, the mechanical power (pu) at the
    /// C_p peak and base wind speed.
    pub fn power_scale(&self) -> f64 {
        self.p_nom * self.p_wind_base / self.p_elec_base
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Validation(msg.to_string()));
        let all = [
            self.omega_s,
            self.r_s,
            self.r_r,
            self.l_s,
            self.l_r,
            self.l_m,
            self.v_ds,
            self.v_qs,
            self.inertia,
            self.friction,
            self.beta_min,
            self.beta_max,
            self.p_nom,
            self.p_wind_base,
            self.p_elec_base,
            self.cp_nom,
            self.lambda_nom,
            self.omega_r_base,
            self.omega_r_nom,
            self.v_w_base,
            self.p_rated,
        ];
        if all.iter().chain(&self.cp_coeffs).any(|x| !x.is_finite()) {
            return fail("turbine parameters must be finite");
        }
        if !(self.l_m > 0.0 && self.l_s > self.l_m && self.l_r > self.l_m) {
            return fail("inductances must satisfy L_s > L_m > 0 and L_r > L_m");
        }
        let sigma = self.sigma();
        if !(sigma > 0.0 && sigma < 1.0) {
            return fail("leakage coefficient sigma must lie in (0, 1)");
        }
        if self.v_ds == 0.0 && self.v_qs == 0.0 {
            return fail("stator voltages v_ds, v_qs must not both be zero");
        }
        if !(self.omega_s > 0.0) {
            return fail("omega_s must be positive");
        }
        if !(self.r_s > 0.0 && self.r_r > 0.0) {
            return fail("resistances must be positive");
        }
        if !(self.inertia > 0.0) {
            return fail("inertia J must be positive");
        }
        if self.friction < 0.0 {
            return fail("friction C_f must be nonnegative");
        }
        if !(self.beta_min < self.beta_max) {
            return fail("beta_min must be below beta_max");
        }
        let positive = [
            self.p_nom,
            self.p_wind_base,
            self.p_elec_base,
            self.cp_nom,
            self.lambda_nom,
            self.omega_r_base,
            self.omega_r_nom,
            self.v_w_base,
            self.p_rated,
        ];
        if positive.iter().any(|&x| x <= 0.0) {
            return fail("per-unit bases and ratings must be positive");
        }
        Ok(())
    }

    pub fn power_pu_to_watts(&self, p_pu: f64) -> f64 {
        p_pu * self.p_elec_base
    }

    pub fn power_watts_to_pu(&self, p_w: f64) -> f64 {
        p_w / self.p_elec_base
    }

    pub fn rotor_speed_pu_to_rad_s(&self, omega_pu: f64) -> f64 {
        omega_pu * self.omega_r_nom
    }

    pub fn rotor_speed_rad_s_to_pu(&self, omega: f64) -> f64 {
        omega / self.omega_r_nom
    }

    pub fn wind_mps_to_pu(&self, v_w: f64) -> f64 {
        v_w / self.v_w_base
    }

    pub fn wind_pu_to_mps(&self, v_pu: f64) -> f64 {
        v_pu * self.v_w_base
    }
}

/// The five plant states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    /// (φ_ds, φ_qs, φ_dr, φ_qr), pu.
    pub phi: Vec4,
    pub omega_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantOutputs {
    /// (i_ds, i_qs, i_dr, i_qr), pu.
    pub currents: Vec4,
    pub p_s: f64,
    pub q_s: f64,
    pub p_r: f64,
    pub q_r: f64,
    pub p: f64,
    pub q: f64,
    pub t_e: f64,
    pub pf: f64,
}

/// Aerodynamic operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroPoint {
    /// Mechanical power (pu).
    pub p_m: f64,
    pub lambda: f64,
    pub cp: f64,
}

/// Input matrix of the flux model: rotor voltages drive the rotor fluxes.
pub type InputMatrix = [[f64; 2]; 4];

pub fn build_a_b(p: &TurbineParams) -> (Mat4, InputMatrix) {
    let sigma = p.sigma();
    let ss = -p.r_s / (sigma * p.l_s);
    let sr = p.r_s * p.l_m / (sigma * p.l_s * p.l_r);
    let rs = p.r_r * p.l_m / (sigma * p.l_s * p.l_r);
    let rr = -p.r_r / (sigma * p.l_r);
    let w = p.omega_s;
    let a = [
        [ss, w, sr, 0.0],
        [-w, ss, 0.0, sr],
        [rs, 0.0, rr, w],
        [0.0, rs, -w, rr],
    ];
    let b = [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    (a, b)
}

/// Inductance matrix `L` with φ = L·i, and its inverse.
pub fn flux_current_maps(p: &TurbineParams) -> Result<(Mat4, Mat4)> {
    if !(p.sigma() > 0.0) {
        return Err(Error::SingularMatrix { pivot: 0.0 });
    }
    let (ls, lr, lm) = (p.l_s, p.l_r, p.l_m);
    let l = [
        [ls, 0.0, lm, 0.0],
        [0.0, ls, 0.0, lm],
        [lm, 0.0, lr, 0.0],
        [0.0, lm, 0.0, lr],
    ];
    let l_inv = linalg::inverse4(&l)?;
    Ok((l, l_inv))
}

/// Flux derivative with the rotor-speed coupling terms of the dq model.
pub fn electrical_derivative(
    p: &TurbineParams,
    a: &Mat4,
    phi: &Vec4,
    omega_r: f64,
    v_dr: f64,
    v_qr: f64,
) -> Vec4 {
    let mut d = linalg::mat_vec(a, phi);
    d[0] += p.v_ds;
    d[1] += p.v_qs;
    d[2] += v_dr - omega_r * phi[3];
    d[3] += v_qr + omega_r * phi[2];
    d
}

/// Heier C_p surface without domain checks, clamped at zero.
pub(crate) fn heier_cp(c: &[f64; 6], lambda: f64, beta: f64) -> f64 {
    let inv_li = 1.0 / (lambda + 0.08 * beta) - 0.035 / (beta * beta * beta + 1.0);
    let cp = c[0] * (c[1] * inv_li - c[2] * beta - c[3]) * (-c[4] * inv_li).exp() + c[5] * lambda;
    cp.max(0.0)
}

pub fn cp_value(p: &TurbineParams, lambda: f64, beta: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "tip speed ratio must be positive, got {lambda}"
        )));
    }
    Ok(heier_cp(&p.cp_coeffs, lambda, beta))
}

/// Mechanical power in pu together with the tip speed ratio and C_p.
pub fn mechanical_power_pu(
    p: &TurbineParams,
    omega_r: f64,
    beta: f64,
    v_w: f64,
) -> Result<AeroPoint> {
    if !(v_w > 0.0) {
        return Err(Error::Domain(format!("wind speed must be positive, got {v_w}")));
    }
    if !(omega_r > 0.0) {
        return Err(Error::Domain(format!(
            "rotor speed must be positive, got {omega_r}"
        )));
    }
    Ok(aero_unchecked(p, omega_r, beta, v_w))
}

pub(crate) fn aero_unchecked(p: &TurbineParams, omega_r: f64, beta: f64, v_w: f64) -> AeroPoint {
    let v_pu = v_w / p.v_w_base;
    let lambda = p.lambda_nom * (omega_r / p.omega_r_base) / v_pu;
    let cp = heier_cp(&p.cp_coeffs, lambda, beta);
    let p_m = p.power_scale() * (cp / p.cp_nom) * v_pu * v_pu * v_pu;
    AeroPoint { p_m, lambda, cp }
}

pub fn mechanical_derivative(p: &TurbineParams, omega_r: f64, t_m: f64, t_e: f64) -> f64 {
    (t_m - t_e - p.friction * omega_r) / p.inertia
}

/// `P / sqrt(P² + Q²)`, zero when no power flows.
pub fn power_factor(p: f64, q: f64) -> f64 {
    let s = p.hypot(q);
    if s > 0.0 {
        p / s
    } else {
        0.0
    }
}

/// Currents, stator and rotor powers, and torque for a flux state.
pub fn outputs_with(p: &TurbineParams, l_inv: &Mat4, phi: &Vec4, v_dr: f64, v_qr: f64) -> PlantOutputs {
    let i = linalg::mat_vec(l_inv, phi);
    let p_s = -p.v_ds * i[0] - p.v_qs * i[1];
    let q_s = -p.v_qs * i[0] + p.v_ds * i[1];
    let p_r = -v_dr * i[2] - v_qr * i[3];
    let q_r = -v_qr * i[2] + v_dr * i[3];
    let t_e = phi[1] * i[0] - phi[0] * i[1];
    let (pt, qt) = (p_s + p_r, q_s + q_r);
    PlantOutputs {
        currents: i,
        p_s,
        q_s,
        p_r,
        q_r,
        p: pt,
        q: qt,
        t_e,
        pf: power_factor(pt, qt),
    }
}

pub fn torque_and_powers(p: &TurbineParams, phi: &Vec4, v_dr: f64, v_qr: f64) -> Result<PlantOutputs> {
    let (_, l_inv) = flux_current_maps(p)?;
    Ok(outputs_with(p, &l_inv, phi, v_dr, v_qr))
}

/// Parameters plus the matrices derived from them, built once per run.
#[derive(Debug, Clone)]
pub struct Plant {
    pub params: TurbineParams,
    pub a: Mat4,
    pub b: InputMatrix,
    pub l: Mat4,
    pub l_inv: Mat4,
}

impl Plant {
    pub fn new(params: TurbineParams) -> Result<Self> {
        params.validate()?;
        let (a, b) = build_a_b(&params);
        let (l, l_inv) = flux_current_maps(&params)?;
        Ok(Self {
            params,
            a,
            b,
            l,
            l_inv,
        })
    }

    pub fn outputs(&self, phi: &Vec4, v_dr: f64, v_qr: f64) -> PlantOutputs {
        outputs_with(&self.params, &self.l_inv, phi, v_dr, v_qr)
    }

    pub fn electromagnetic_torque(&self, phi: &Vec4) -> f64 {
        let i = linalg::mat_vec(&self.l_inv, phi);
        phi[1] * i[0] - phi[0] * i[1]
    }

    pub fn flux_derivative(&self, phi: &Vec4, omega_r: f64, v_dr: f64, v_qr: f64) -> Vec4 {
        electrical_derivative(&self.params, &self.a, phi, omega_r, v_dr, v_qr)
    }

    /// Aerodynamic torque with the startup speed floor applied.
    pub fn mechanical_torque(&self, omega_r: f64, beta: f64, v_w: f64) -> (f64, AeroPoint) {
        let w = omega_r.max(TORQUE_SPEED_FLOOR);
        let aero = aero_unchecked(&self.params, w, beta, v_w);
        (aero.p_m / w, aero)
    }
}
