//! Proprioceptive entanglement detection and swing-leg disentanglement for
//! quadrupeds, with a fixed-step desk-scale simulator to exercise them.
//!
//! * [`leg_dynamics`]: kinematics and Lagrangian dynamics of a 3-DOF leg.
//! * [`momentum_observer`]: external-torque residual with swing-start re-zeroing.
//! * [`contact_world`]: cords, ropes, bars, wires and nets touching leg links.
//! * [`gait_controller`]: trot clock, nominal swing/stance control, the
//!   retract / extend reaction and the baseline strategies.
//! * [`simulator`]: the tick loop, logs and run metrics.
//! * [`scenario`] and [`cli`]: scenario files and the command-line front end.
//! * [`batch`]: many independent runs, in parallel when the `parallel` feature is on.

// NaN must fail the parameter checks, so they are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod cli;
pub mod contact_world;
pub mod error;
pub mod gait_controller;
pub mod leg_dynamics;
pub mod momentum_observer;
pub mod scenario;
pub mod simulator;

pub use error::{Error, Result};
