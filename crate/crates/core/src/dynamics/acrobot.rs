use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Joint angles measured from the downward vertical; `theta2` is relative
/// to link 1.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AcrobotState {
    pub theta1: f64,
    pub theta2: f64,
    pub theta1_dot: f64,
    pub theta2_dot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcrobotParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub lc1: f64,
    pub lc2: f64,
    pub i1: f64,
    pub i2: f64,
    pub gravity: f64,
    pub sim_dt: f64,
    pub control_dt: f64,
    pub torque_bound: f64,
    pub max_theta1_dot: f64,
    pub max_theta2_dot: f64,
    /// Include `−m2 l1 lc2 θ̇1² sin θ2` in the second joint equation. Without
    /// it the unforced system does not conserve energy.
    pub centrifugal_term: bool,
}

impl Default for AcrobotParams {
    fn default() -> Self {
        AcrobotParams {
            m1: 1.0,
            m2: 1.0,
            l1: 1.0,
            l2: 1.0,
            lc1: 0.5,
            lc2: 0.5,
            i1: 1.0,
            i2: 1.0,
            gravity: 9.8,
            sim_dt: 0.05,
            control_dt: 0.2,
            torque_bound: 3.0,
            max_theta1_dot: 4.0 * PI,
            max_theta2_dot: 9.0 * PI,
            centrifugal_term: true,
        }
    }
}

impl AcrobotParams {
    pub fn substeps(&self) -> usize {
        (self.control_dt / self.sim_dt).round() as usize
    }
}

/// Maps an angle into `[−π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Returns `(θ̈1, θ̈2)`; `tau` is clamped to the torque bound.
pub fn acrobot_derivatives(s: &AcrobotState, tau: f64, p: &AcrobotParams) -> (f64, f64) {
    let tau = tau.clamp(-p.torque_bound, p.torque_bound);
    let (sin2, cos2) = s.theta2.sin_cos();
    let d1 = p.m1 * p.lc1 * p.lc1
        + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2 + 2.0 * p.l1 * p.lc2 * cos2)
        + p.i1
        + p.i2;
    let d2 = p.m2 * (p.lc2 * p.lc2 + p.l1 * p.lc2 * cos2) + p.i2;
    // cos(a − π/2) written as sin(a) so the hanging rest state is exact
    let phi2 = p.m2 * p.lc2 * p.gravity * (s.theta1 + s.theta2).sin();
    let coupling = p.m2 * p.l1 * p.lc2;
    let phi1 = -coupling * s.theta2_dot * s.theta2_dot * sin2
        - 2.0 * coupling * s.theta1_dot * s.theta2_dot * sin2
        + (p.m1 * p.lc1 + p.m2 * p.l1) * p.gravity * s.theta1.sin()
        + phi2;
    let centrifugal = if p.centrifugal_term {
        coupling * s.theta1_dot * s.theta1_dot * sin2
    } else {
        0.0
    };
    let theta2_ddot = (tau + d2 / d1 * phi1 - centrifugal - phi2)
        / (p.m2 * p.lc2 * p.lc2 + p.i2 - d2 * d2 / d1);
    let theta1_ddot = -(d2 * theta2_ddot + phi1) / d1;
    (theta1_ddot, theta2_ddot)
}

/// Holds `tau` for one control interval of Euler substeps, wrapping angles
/// and clamping velocities after each substep.
pub fn acrobot_control_step(s: &AcrobotState, tau: f64, p: &AcrobotParams) -> AcrobotState {
    let mut s = *s;
    let dt = p.sim_dt;
    for _ in 0..p.substeps() {
        let (a1, a2) = acrobot_derivatives(&s, tau, p);
        s = AcrobotState {
            theta1: wrap_angle(s.theta1 + dt * s.theta1_dot),
            theta2: wrap_angle(s.theta2 + dt * s.theta2_dot),
            theta1_dot: (s.theta1_dot + dt * a1).clamp(-p.max_theta1_dot, p.max_theta1_dot),
            theta2_dot: (s.theta2_dot + dt * a2).clamp(-p.max_theta2_dot, p.max_theta2_dot),
        };
    }
    s
}

/// Height of the tip above the pivot.
pub fn acrobot_tip_height(s: &AcrobotState, p: &AcrobotParams) -> f64 {
    -p.l1 * s.theta1.cos() - p.l2 * (s.theta1 + s.theta2).cos()
}

/// Tip strictly more than one link length above the pivot.
pub fn acrobot_goal_reached(s: &AcrobotState, p: &AcrobotParams) -> bool {
    acrobot_tip_height(s, p) > p.l1
}

/// Total mechanical energy, zero potential at the pivot height.
pub fn acrobot_energy(s: &AcrobotState, p: &AcrobotParams) -> f64 {
    let cos2 = s.theta2.cos();
    let m11 = p.m1 * p.lc1 * p.lc1
        + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2 + 2.0 * p.l1 * p.lc2 * cos2)
        + p.i1
        + p.i2;
    let m12 = p.m2 * (p.lc2 * p.lc2 + p.l1 * p.lc2 * cos2) + p.i2;
    let m22 = p.m2 * p.lc2 * p.lc2 + p.i2;
    let (w1, w2) = (s.theta1_dot, s.theta2_dot);
    let kinetic = 0.5 * (m11 * w1 * w1 + 2.0 * m12 * w1 * w2 + m22 * w2 * w2);
    let potential = -p.m1 * p.gravity * p.lc1 * s.theta1.cos()
        - p.m2 * p.gravity * (p.l1 * s.theta1.cos() + p.lc2 * (s.theta1 + s.theta2).cos());
    kinetic + potential
}
