use serde::{Deserialize, Serialize};

use super::sgn;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartPoleState {
    /// Cart position, m.
    pub x: f64,
    pub x_dot: f64,
    /// Pole angle from upright, rad.
    pub theta: f64,
    pub theta_dot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Half the pole length, m.
    pub half_length: f64,
    pub cart_friction: f64,
    pub pole_friction: f64,
    /// Gravity magnitude, m/s².
    pub gravity: f64,
    pub dt: f64,
    /// Failure once |θ| exceeds this, degrees.
    pub theta_limit_deg: f64,
    pub x_limit: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        CartPoleParams {
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            cart_friction: 0.0005,
            pole_friction: 0.000002,
            gravity: 9.8,
            dt: 0.02,
            theta_limit_deg: 12.0,
            x_limit: 2.4,
        }
    }
}

/// Returns `(θ̈, ẍ)` for force `force` (N) on the cart.
pub fn cartpole_derivatives(s: &CartPoleState, force: f64, p: &CartPoleParams) -> (f64, f64) {
    let (m, big_m, l) = (p.pole_mass, p.cart_mass, p.half_length);
    let total = m + big_m;
    let (sin, cos) = s.theta.sin_cos();
    let friction = p.cart_friction * sgn(s.x_dot);
    let numerator = total * p.gravity * sin
        - cos * (force + m * l * s.theta_dot * s.theta_dot * sin - friction)
        - p.pole_friction * total * s.theta_dot / (m * l);
    let denominator = 4.0 / 3.0 * total * l - m * l * cos * cos;
    let theta_ddot = numerator / denominator;
    let x_ddot = (force + m * l * (s.theta_dot * s.theta_dot * sin - theta_ddot * cos) - friction) / total;
    (theta_ddot, x_ddot)
}

pub fn cartpole_failed(s: &CartPoleState, p: &CartPoleParams) -> bool {
    s.theta.abs() > p.theta_limit_deg.to_radians() || s.x.abs() > p.x_limit
}

/// One Euler step of length `dt`; the flag reports failure of the new state.
pub fn cartpole_step(s: &CartPoleState, force: f64, p: &CartPoleParams) -> (CartPoleState, bool) {
    let (theta_ddot, x_ddot) = cartpole_derivatives(s, force, p);
    let next = CartPoleState {
        x: s.x + p.dt * s.x_dot,
        x_dot: s.x_dot + p.dt * x_ddot,
        theta: s.theta + p.dt * s.theta_dot,
        theta_dot: s.theta_dot + p.dt * theta_ddot,
    };
    (next, cartpole_failed(&next, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn upright_rest_is_equilibrium() {
        let p = CartPoleParams::default();
        let s = CartPoleState::default();
        assert_eq!(cartpole_derivatives(&s, 0.0, &p), (0.0, 0.0));
        assert_eq!(cartpole_step(&s, 0.0, &p), (s, false));
    }

    #[test]
    fn tilted_pole_falls_further() {
        let p = CartPoleParams::default();
        let s = CartPoleState { theta: 0.01, ..Default::default() };
        assert!(cartpole_derivatives(&s, 0.0, &p).0 > 0.0);
    }

    #[test]
    fn pushing_the_cart_at_rest() {
        let p = CartPoleParams::default();
        let (theta_ddot, x_ddot) = cartpole_derivatives(&CartPoleState::default(), 10.0, &p);
        let denominator = 4.0 / 3.0 * 1.1 * 0.5 - 0.05;
        assert_abs_diff_eq!(theta_ddot, -10.0 / denominator, epsilon = 1e-12);
        // ẍ carries the reaction of the pole: (F − m l θ̈) / (M + m)
        assert_abs_diff_eq!(x_ddot, (10.0 + 0.05 * 10.0 / denominator) / 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(x_ddot, 9.7561, epsilon = 1e-4);
    }

    #[test]
    fn failure_boundaries() {
        let p = CartPoleParams::default();
        let lim = 12f64.to_radians();
        // just below the limit, moving outward fast enough to cross in one step
        let s = CartPoleState { theta: lim - 1e-4, theta_dot: 0.1, ..Default::default() };
        assert!(cartpole_step(&s, 0.0, &p).1);
        let grid = [-2.5, -2.4, -2.39, 0.0, 2.39, 2.4, 2.5];
        for &x in &grid {
            for &deg in &[-12.5, -12.0, -11.9, 0.0, 11.9, 12.0, 12.5] {
                let s = CartPoleState { x, theta: f64::to_radians(deg), ..Default::default() };
                let expected = x.abs() > 2.4 || f64::abs(deg) > 12.0;
                assert_eq!(cartpole_failed(&s, &p), expected, "x={x} deg={deg}");
            }
        }
    }

    #[test]
    fn euler_half_steps_differ_from_full_step() {
        let p = CartPoleParams::default();
        let half = CartPoleParams { dt: p.dt / 2.0, ..p };
        let s = CartPoleState { theta: 0.05, theta_dot: -0.2, x_dot: 0.3, x: 0.1 };
        let full = cartpole_step(&s, 3.0, &p).0;
        let two = cartpole_step(&cartpole_step(&s, 3.0, &half).0, 3.0, &half).0;
        assert_ne!(full, two);
        assert!((full.theta_dot - two.theta_dot).abs() < 1e-2);
    }

    #[test]
    fn friction_at_rest_is_finite() {
        let p = CartPoleParams::default();
        let s = CartPoleState { theta: 0.1, ..Default::default() };
        let (a, b) = cartpole_derivatives(&s, 0.0, &p);
        assert!(a.is_finite() && b.is_finite());
    }
}
