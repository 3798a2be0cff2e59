//! Explicit-Euler simulators for the two control tasks.

mod acrobot;
mod cartpole;

pub use acrobot::{
    acrobot_control_step, acrobot_derivatives, acrobot_energy, acrobot_goal_reached,
    acrobot_tip_height, wrap_angle, AcrobotParams, AcrobotState,
};
pub use cartpole::{cartpole_derivatives, cartpole_failed, cartpole_step, CartPoleParams, CartPoleState};

/// Sign with `sgn(0) = 0`.
pub(crate) fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
