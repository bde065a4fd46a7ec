//! Generalized-momentum disturbance observer for one leg.
//!
//! The observer integrates
//!
//! ```text
//! beta   = G(q) - C(q, q')^T q'
//! p_hat' = tau_m + tau_p - beta + r
//! r      = K_O (M(q) q' - p_hat)
//! ```
//!
//! so `r` is a first-order low-pass estimate of the external joint torque. The
//! known passive torques `tau_p` (friction, joint stops) are compensated so they
//! do not show up in `r`.
//!
//! At every stance-to-swing transition the estimate is re-latched to the
//! measured momentum and held there for a short window; this keeps the large
//! stance loads from leaking into the early-swing residual.

use crate::error::{Error, Result};
use crate::leg_dynamics::{
    christoffel_matrix, friction_torque, gravity_vector, limit_torque, mass_matrix, JointState, LegModel, Vec3, HIP,
    KNEE,
};

/// Default diagonal observer gain (1/s).
pub const DEFAULT_GAIN: f64 = 25.0;
/// Length of the re-zeroing window after a stance-to-swing transition (s).
pub const RESET_WINDOW: f64 = 0.030;
/// Default stuck threshold on the hip and knee residuals (N m).
pub const DEFAULT_THRESHOLD: f64 = 2.0;

const WINDOW_EPS: f64 = 1e-12;

/// Observer tuning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObserverConfig {
    pub gain: Vec3,
    pub reset_window: f64,
    /// Scale applied to the model friction when compensating; 1.0 means the
    /// observer knows the plant friction exactly.
    pub friction_scale: f64,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            gain: Vec3::repeat(DEFAULT_GAIN),
            reset_window: RESET_WINDOW,
            friction_scale: 1.0,
        }
    }
}

impl ObserverConfig {
    pub fn with_gain(gain: f64) -> Self {
        Self {
            gain: Vec3::repeat(gain),
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObserverState {
    pub p_hat: Vec3,
    /// Residual: estimated external joint torque (N m).
    pub r: Vec3,
    pub gain: Vec3,
    pub reset_window_remaining: f64,
}

impl ObserverState {
    /// Observer initialised on the measured momentum with no reset window pending.
    pub fn latched(cfg: &ObserverConfig, model: &LegModel, state: &JointState) -> Self {
        Self {
            p_hat: mass_matrix(model, &state.q) * state.qdot,
            r: Vec3::zeros(),
            gain: cfg.gain,
            reset_window_remaining: 0.0,
        }
    }

    pub fn in_reset_window(&self) -> bool {
        self.reset_window_remaining > WINDOW_EPS
    }
}

/// Re-zeroes the observer at a stance-to-swing transition.
pub fn observer_reset(cfg: &ObserverConfig, model: &LegModel, state: &JointState) -> ObserverState {
    ObserverState {
        reset_window_remaining: cfg.reset_window,
        ..ObserverState::latched(cfg, model, state)
    }
}

/// Torques the observer treats as known besides the motor command.
fn known_passive_torque(cfg: &ObserverConfig, model: &LegModel, state: &JointState) -> Vec3 {
    cfg.friction_scale * friction_torque(model, &state.qdot) + limit_torque(model, state)
}

/// One explicit-Euler observer update. `leg` only labels a fault.
pub fn observer_step(
    obs: &ObserverState,
    cfg: &ObserverConfig,
    model: &LegModel,
    state: &JointState,
    tau_m: &Vec3,
    dt: f64,
    leg: usize,
) -> Result<ObserverState> {
    if !state.is_finite() || !tau_m.iter().all(|v| v.is_finite()) {
        return Err(Error::ObserverFault {
            leg,
            message: "non-finite joint state or torque".into(),
        });
    }
    if !(dt > 0.0 && dt <= 0.005) {
        return Err(Error::InvalidArgument(format!(
            "observer step dt = {dt} must lie in (0, 0.005] s"
        )));
    }
    let m = mass_matrix(model, &state.q);
    let p = m * state.qdot;
    if obs.in_reset_window() {
        return Ok(ObserverState {
            p_hat: p,
            r: Vec3::zeros(),
            gain: obs.gain,
            reset_window_remaining: (obs.reset_window_remaining - dt).max(0.0),
        });
    }
    let c = christoffel_matrix(model, &state.q, &state.qdot);
    let beta = gravity_vector(model, &state.q) - c.transpose() * state.qdot;
    let p_hat_rate = tau_m + known_passive_torque(cfg, model, state) - beta + obs.r;
    let p_hat = obs.p_hat + dt * p_hat_rate;
    let r = obs.gain.component_mul(&(p - p_hat));
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::ObserverFault {
            leg,
            message: "residual diverged".into(),
        });
    }
    Ok(ObserverState {
        p_hat,
        r,
        gain: obs.gain,
        reset_window_remaining: 0.0,
    })
}

/// Which thresholded joints fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct TriggeringJoints {
    pub hip: bool,
    pub knee: bool,
}

impl TriggeringJoints {
    pub fn is_empty(&self) -> bool {
        !self.hip && !self.knee
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StuckVerdict {
    pub stuck: bool,
    pub triggering_joints: TriggeringJoints,
    pub threshold: f64,
}

impl StuckVerdict {
    pub fn free(threshold: f64) -> Self {
        Self {
            stuck: false,
            triggering_joints: TriggeringJoints::default(),
            threshold,
        }
    }
}

/// Stuck iff the hip or knee residual exceeds `threshold` in the positive direction.
///
/// Obstacles ahead of the leg can only produce positive hip and knee torques,
/// so negative residuals (rear-surface contact) and the ab/ad residual are
/// never used.
pub fn classify_stuck(obs: &ObserverState, threshold: f64) -> StuckVerdict {
    let joints = TriggeringJoints {
        hip: obs.r[HIP] > threshold,
        knee: obs.r[KNEE] > threshold,
    };
    StuckVerdict {
        stuck: !joints.is_empty(),
        triggering_joints: joints,
        threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leg_dynamics::Side;
    use approx::assert_abs_diff_eq;

    fn model() -> LegModel {
        LegModel::small_quadruped(Side::Right, Vec3::new(0.2263, -0.07, 0.0))
    }

    fn with_r(r: Vec3) -> ObserverState {
        ObserverState {
            p_hat: Vec3::zeros(),
            r,
            gain: Vec3::repeat(25.0),
            reset_window_remaining: 0.0,
        }
    }

    #[test]
    fn reset_zeroes_residual_and_latches_momentum() {
        let m = model();
        let s = JointState::new(Vec3::new(0.1, 0.9, -1.7), Vec3::new(0.5, -3.0, 6.0));
        let obs = observer_reset(&ObserverConfig::default(), &m, &s);
        assert_eq!(obs.r, Vec3::zeros());
        assert_abs_diff_eq!(obs.p_hat, mass_matrix(&m, &s.q) * s.qdot, epsilon = 1e-12);
        assert_eq!(obs.reset_window_remaining, RESET_WINDOW);
        let rest = observer_reset(&ObserverConfig::default(), &m, &JointState::at_rest(s.q));
        assert_eq!(rest.p_hat, Vec3::zeros());
    }

    #[test]
    fn reset_window_holds_residual_at_zero_for_thirty_ticks() {
        let m = model();
        let cfg = ObserverConfig::default();
        let s = JointState::new(Vec3::new(0.0, 0.9, -1.7), Vec3::new(0.0, 2.0, -1.0));
        let mut obs = observer_reset(&cfg, &m, &s);
        // a large unexplained torque would normally drive r away from zero
        let tau = Vec3::new(0.0, 30.0, 30.0);
        let mut ticks = 0;
        while obs.in_reset_window() {
            obs = observer_step(&obs, &cfg, &m, &s, &tau, 0.001, 0).unwrap();
            assert_eq!(obs.r, Vec3::zeros());
            assert_abs_diff_eq!(obs.p_hat, mass_matrix(&m, &s.q) * s.qdot, epsilon = 1e-15);
            assert!((0.0..=RESET_WINDOW).contains(&obs.reset_window_remaining));
            ticks += 1;
        }
        assert_eq!(ticks, 30);
        obs = observer_step(&obs, &cfg, &m, &s, &tau, 0.001, 0).unwrap();
        assert!(obs.r.norm() > 0.0);
    }

    #[test]
    fn held_leg_without_disturbance_stays_at_zero() {
        let m = model();
        let cfg = ObserverConfig::default();
        let s = JointState::at_rest(Vec3::new(0.0, 0.8, -1.6));
        let tau = gravity_vector(&m, &s.q);
        let mut obs = ObserverState::latched(&cfg, &m, &s);
        for _ in 0..1000 {
            obs = observer_step(&obs, &cfg, &m, &s, &tau, 0.001, 0).unwrap();
        }
        assert_abs_diff_eq!(obs.r, Vec3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn non_finite_input_is_a_fault() {
        let m = model();
        let cfg = ObserverConfig::default();
        let s = JointState::at_rest(Vec3::new(0.0, 0.8, -1.6));
        let obs = ObserverState::latched(&cfg, &m, &s);
        let bad = JointState::at_rest(Vec3::new(f64::NAN, 0.0, 0.0));
        assert!(matches!(
            observer_step(&obs, &cfg, &m, &bad, &Vec3::zeros(), 0.001, 3),
            Err(Error::ObserverFault { leg: 3, .. })
        ));
        assert!(observer_step(&obs, &cfg, &m, &s, &Vec3::zeros(), 0.01, 0).is_err());
    }

    #[test]
    fn classification_examples() {
        let v = classify_stuck(&with_r(Vec3::new(0.0, 2.5, 0.0)), 2.0);
        assert!(v.stuck);
        assert!(v.triggering_joints.hip && !v.triggering_joints.knee);
        assert!(!classify_stuck(&with_r(Vec3::new(0.0, -5.0, -5.0)), 2.0).stuck);
        assert!(!classify_stuck(&with_r(Vec3::new(3.0, 1.9, 1.9)), 2.0).stuck);
        let exact = classify_stuck(&with_r(Vec3::new(0.0, 2.0, 2.0)), 2.0);
        assert!(!exact.stuck);
    }
}
