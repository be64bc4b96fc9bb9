use std::f64::consts::PI;

use super::gains::FeedbackGain;
use crate::error::{Error, Result};
use crate::linalg::{self, Lu, Mat4, Sym2, Vec4};
use crate::plant::{Plant, TurbineParams};

/// Feedback-linearising rotor voltages: cancel the speed coupling, apply
/// state feedback and add the new inputs.
pub fn rotor_voltages(k: &FeedbackGain, phi: &Vec4, omega_r: f64, u1: f64, u2: f64) -> (f64, f64) {
    let k1phi: f64 = k[0].iter().zip(phi).map(|(a, b)| a * b).sum();
    let k2phi: f64 = k[1].iter().zip(phi).map(|(a, b)| a * b).sum();
    (
        omega_r * phi[3] - k1phi + u1,
        -omega_r * phi[2] - k2phi + u2,
    )
}

/// `A − B·K`.
pub fn closed_loop_matrix(plant: &Plant, k: &FeedbackGain) -> Mat4 {
    let mut m = plant.a;
    for (i, row) in m.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x -= plant.b[i][0] * k[0][j] + plant.b[i][1] * k[1][j];
        }
    }
    m
}

/// Equilibrium flux of the linearised loop as an affine map of (u1, u2).
#[derive(Debug, Clone)]
pub struct SteadyFluxMap {
    pub a_cl: Mat4,
    phi0: Vec4,
    cols: [Vec4; 2],
}

impl SteadyFluxMap {
    pub fn new(plant: &Plant, k: &FeedbackGain) -> Result<Self> {
        let a_cl = closed_loop_matrix(plant, k);
        let lu = Lu::new(&a_cl)?;
        let p = &plant.params;
        let neg = |v: Vec4| v.map(|x| -x);
        let phi0 = neg(lu.solve(&[p.v_ds, p.v_qs, 0.0, 0.0]));
        let cols = [
            neg(lu.solve(&[0.0, 0.0, 1.0, 0.0])),
            neg(lu.solve(&[0.0, 0.0, 0.0, 1.0])),
        ];
        Ok(Self { a_cl, phi0, cols })
    }

    pub fn flux(&self, u1: f64, u2: f64) -> Vec4 {
        std::array::from_fn(|i| self.phi0[i] + self.cols[0][i] * u1 + self.cols[1][i] * u2)
    }
}

/// Steady-state torque as a quadratic in the new inputs:
/// `T_e = uᵀHu + bᵀu + a` with `H = [[q1, q2], [q2, q3]] = M·D·Mᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueQuadratic {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub b1: f64,
    pub b2: f64,
    pub a: f64,
    /// Orthonormal eigenvectors of H as columns.
    pub m: [[f64; 2]; 2],
    /// Eigenvalues of H, ascending.
    pub d: [f64; 2],
    /// Minimum torque over all inputs.
    pub a_prime: f64,
}

/// Closed-form minimum torque `−(v_ds² + v_qs²)/(4 ω_s R_s)`.
pub fn a_prime(p: &TurbineParams) -> f64 {
    -(p.v_ds * p.v_ds + p.v_qs * p.v_qs) / (4.0 * p.omega_s * p.r_s)
}

const PROBES: [[f64; 2]; 6] = [
    [0.0, 0.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [1.0, 1.0],
    [2.0, 0.0],
    [0.0, 2.0],
];

fn fit_at_scale(torque: &dyn Fn(f64, f64) -> f64, scale: f64) -> Result<[f64; 6]> {
    let mut rows = [[0.0; 6]; 6];
    let mut rhs = [0.0; 6];
    for (k, pr) in PROBES.iter().enumerate() {
        let (u1, u2) = (pr[0] * scale, pr[1] * scale);
        rows[k] = [u1 * u1, 2.0 * u1 * u2, u2 * u2, u1, u2, 1.0];
        rhs[k] = torque(u1, u2);
    }
    Ok(Lu::new(&rows)?.solve(&rhs))
}

pub fn derive_torque_quadratic(p: &TurbineParams, k: &FeedbackGain) -> Result<TorqueQuadratic> {
    let plant = Plant::new(p.clone())?;
    let map = SteadyFluxMap::new(&plant, k)?;
    derive_with(&plant, &map)
}

pub(crate) fn derive_with(plant: &Plant, map: &SteadyFluxMap) -> Result<TorqueQuadratic> {
    let torque = |u1: f64, u2: f64| plant.electromagnetic_torque(&map.flux(u1, u2));

    // The Hessian is tiny next to the input magnitudes, so unit probes lose
    // most of the curvature to rounding; refit at the curvature's own scale.
    let rough = fit_at_scale(&torque, 1.0)?;
    let rough_eig = linalg::eig2_sym(Sym2::new(rough[0], rough[1], rough[2]));
    let scale = if rough_eig.values[1] > 0.0 {
        1.0 / rough_eig.values[1].sqrt()
    } else {
        1.0
    };
    let c = fit_at_scale(&torque, scale)?;

    let eig = linalg::eig2_sym(Sym2::new(c[0], c[1], c[2]));
    if !(eig.values[0] > 0.0) {
        return Err(Error::NotPositiveDefinite(eig.values));
    }
    Ok(TorqueQuadratic {
        q1: c[0],
        q2: c[1],
        q3: c[2],
        b1: c[3],
        b2: c[4],
        a: c[5],
        m: eig.vectors,
        d: eig.values,
        a_prime: a_prime(&plant.params),
    })
}

impl TorqueQuadratic {
    pub fn torque(&self, u1: f64, u2: f64) -> f64 {
        self.q1 * u1 * u1 + 2.0 * self.q2 * u1 * u2 + self.q3 * u2 * u2 + self.b1 * u1 + self.b2 * u2 + self.a
    }

    /// Mᵀ·x.
    fn mt(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * x[0] + self.m[1][0] * x[1],
            self.m[0][1] * x[0] + self.m[1][1] * x[1],
        ]
    }

    fn mv(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * x[0] + self.m[0][1] * x[1],
            self.m[1][0] * x[0] + self.m[1][1] * x[1],
        ]
    }

    /// Input minimising the torque, `−½ H⁻¹ b`.
    pub fn center(&self) -> [f64; 2] {
        let mb = self.mt([self.b1, self.b2]);
        self.mv([-0.5 * mb[0] / self.d[0], -0.5 * mb[1] / self.d[1]])
    }

    /// Minimum implied by the fitted coefficients, `a − ¼ bᵀH⁻¹b`.
    pub fn fitted_minimum(&self) -> f64 {
        let mb = self.mt([self.b1, self.b2]);
        self.a - 0.25 * (mb[0] * mb[0] / self.d[0] + mb[1] * mb[1] / self.d[1])
    }

    /// Polar coordinates (r, θ) of an input pair, θ in [−π, π).
    pub fn control_to_polar(&self, u1: f64, u2: f64) -> (f64, f64) {
        let mu = self.mt([u1, u2]);
        let mb = self.mt([self.b1, self.b2]);
        let z: [f64; 2] =
            std::array::from_fn(|i| self.d[i].sqrt() * mu[i] + 0.5 * mb[i] / self.d[i].sqrt());
        (z[0].hypot(z[1]), wrap_angle(z[1].atan2(z[0])))
    }

    /// Inverse of [`Self::control_to_polar`].
    pub fn polar_to_control(&self, r: f64, theta: f64) -> (f64, f64) {
        let z = [r * theta.cos(), r * theta.sin()];
        let w = self.mv([z[0] / self.d[0].sqrt(), z[1] / self.d[1].sqrt()]);
        let c = self.center();
        (w[0] + c[0], w[1] + c[1])
    }
}

/// Map an angle into [−π, π).
pub fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}
