//! Measurements behind the observer acceptance checks, shared with the
//! ordinary integration tests.

use disentangle::contact_world::ObstacleCourse;
use disentangle::gait_controller::{nominal_swing_target, Phase, Strategy};
use disentangle::leg_dynamics::*;
use disentangle::momentum_observer::*;
use disentangle::simulator::{run_scenario, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::right_leg;

/// Worst deviation of the residual from `tau (1 - e^{-K t})` over
/// `t` in [0, 0.4] s, for a clamped leg under a step disturbance, divided by
/// the step size. Also returns the largest acceleration the plant would have
/// without the clamp.
pub fn step_response(tau_ext: Vec3) -> (f64, f64) {
    let model = right_leg();
    let cfg = ObserverConfig::default();
    let dt = 0.001;
    let s = JointState::at_rest(Vec3::new(0.0, 0.8, -1.5));
    let mut obs = ObserverState::latched(&cfg, &model, &s);
    let step = tau_ext.amax();
    let mut worst: f64 = 0.0;
    let mut accel: f64 = 0.0;
    for n in 1..=400 {
        // the motor holds the leg against gravity and the disturbance
        let tau_m = gravity_vector(&model, &s.q) - tau_ext;
        accel = accel.max(forward_dynamics(&model, &s, &tau_m, &tau_ext).amax());
        obs = observer_step(&obs, &cfg, &model, &s, &tau_m, dt, 0).unwrap();
        let t = n as f64 * dt;
        let expected = tau_ext * (1.0 - (-DEFAULT_GAIN * t).exp());
        worst = worst.max((obs.r - expected).amax() / step);
    }
    (worst, accel)
}

/// Leg tracking a gait-like foot loop in the air with a constant backward
/// force on the foot. Returns the worst `|r - J^T F|` after 0.2 s, absolute
/// and relative to `|J^T F|`.
pub fn moving_leg_tracking(force: Vec3, duration: f64) -> (f64, f64) {
    let model = right_leg();
    let cfg = ObserverConfig::default();
    let dt = 0.001;
    let period = 0.54;
    let base = model.hip_position + model.link_vector(0);
    let liftoff = base + Vec3::new(-0.07, 0.0, -0.28);
    let touchdown = base + Vec3::new(0.07, 0.0, -0.28);
    let target = |t: f64| {
        let phase = (t / period).fract() * 2.0;
        if phase < 1.0 {
            nominal_swing_target(phase, 0.07, &liftoff, &touchdown)
        } else {
            touchdown + (liftoff - touchdown) * (phase - 1.0)
        }
    };
    let joint_target = |t: f64| inverse_kinematics(&model, &target(t), KneeDirection::Back).q;
    let (kp, kd) = (Vec3::new(80.0, 80.0, 60.0), Vec3::new(2.0, 2.0, 1.5));
    let mut s = JointState::at_rest(joint_target(0.0));
    let mut obs = ObserverState::latched(&cfg, &model, &s);
    let (mut worst_abs, mut worst_rel) = (0.0f64, 0.0f64);
    let steps = (duration / dt).round() as usize;
    for n in 0..steps {
        let t = n as f64 * dt;
        let q_ref = joint_target(t);
        let qd_ref = (joint_target(t + dt) - q_ref) / dt;
        let tau_m =
            kp.component_mul(&(q_ref - s.q)) + kd.component_mul(&(qd_ref - s.qdot)) + gravity_vector(&model, &s.q);
        let tau_ext = foot_jacobian(&model, &s.q).transpose() * force;
        let qdd = forward_dynamics(&model, &s, &tau_m, &tau_ext);
        let qdot = s.qdot + qdd * dt;
        s = JointState::new(s.q + qdot * dt, qdot);
        obs = observer_step(&obs, &cfg, &model, &s, &tau_m, dt, 0).unwrap();
        if t + dt >= 0.2 {
            let oracle = foot_jacobian(&model, &s.q).transpose() * force;
            let err = (obs.r - oracle).norm();
            worst_abs = worst_abs.max(err);
            worst_rel = worst_rel.max(err / oracle.norm());
        }
    }
    (worst_abs, worst_rel)
}

/// Residuals in the first 100 ms of one swing that follows a loaded stance.
#[derive(Clone, Copy, Debug)]
pub struct ResetBenefit {
    /// Mean ground reaction on the foot during the preceding stance (N).
    pub stance_load: f64,
    /// Largest `|r|` of the observer that is never reset.
    pub no_reset_peak: f64,
    /// Time into swing at which that residual first exceeds the threshold.
    pub no_reset_crossing: Option<f64>,
    /// Largest `|r|` of the resetting observer.
    pub reset_peak: f64,
}

/// Walks the empty course and inspects the front-left leg's second swing.
pub fn reset_benefit(seed: u64) -> ResetBenefit {
    let mut cfg = SimConfig::new(Strategy::Reactive, ObstacleCourse::empty(1.5));
    cfg.seed = seed;
    let (log, _) = run_scenario(&cfg).unwrap();
    let ground = cfg.ground;
    let leg = 0;
    let swing_starts: Vec<usize> = (1..log.rows.len())
        .filter(|&i| log.rows[i].legs[leg].phase == Phase::Swing && log.rows[i - 1].legs[leg].phase == Phase::Stance)
        .collect();
    let start = swing_starts[1];
    let stance_from = swing_starts[0] + (0.27 / cfg.dt) as usize;
    // mean ground reaction over the loaded ticks of the preceding stance
    let (mut total, mut loaded) = (0.0, 0);
    for i in stance_from.max(1)..start {
        let z = log.rows[i].legs[leg].foot.z;
        let vz = (z - log.rows[i - 1].legs[leg].foot.z) / cfg.dt;
        if z < 0.0 {
            total += (-ground.stiffness * z - ground.damping * vz).max(0.0);
            loaded += 1;
        }
    }
    let stance_load = total / loaded.max(1) as f64;
    let mut out = ResetBenefit {
        stance_load,
        no_reset_peak: f64::NEG_INFINITY,
        no_reset_crossing: None,
        reset_peak: 0.0,
    };
    let window = (0.1 / cfg.dt).round() as usize;
    for (k, row) in log.rows[start..start + window].iter().enumerate() {
        let l = &row.legs[leg];
        let nr = l.r_noreset.norm();
        out.no_reset_peak = out.no_reset_peak.max(nr);
        if nr > DEFAULT_THRESHOLD && out.no_reset_crossing.is_none() {
            out.no_reset_crossing = Some(k as f64 * cfg.dt);
        }
        out.reset_peak = out.reset_peak.max(l.r.norm());
    }
    out
}

/// Smallest hip or knee torque from front-surface pushes on random knee-back
/// postures. Returns the minimum and how many of the forces had `F_x < 0`.
pub fn sign_property(samples: usize, seed: u64) -> (f64, usize) {
    let model = right_leg();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lowest = f64::INFINITY;
    let mut backward = 0;
    for _ in 0..samples {
        let q = Vec3::new(
            rng.gen_range(-0.4..0.4),
            rng.gen_range(0.0..1.3),
            rng.gen_range(-1.5..0.0),
        );
        let link = rng.gen_range(1..=2);
        let frac = rng.gen_range(0.0..=1.0);
        let kin = forward_kinematics(&model, &q);
        let d = kin.origins[link + 1] - kin.origins[link];
        let push = -Vec3::new(-d.z, 0.0, d.x).normalize() * rng.gen_range(0.1..50.0);
        if push.x < 0.0 {
            backward += 1;
        }
        let tau = external_torque_from_contacts(&model, &q, &[ContactForce::new(link, frac, push).unwrap()]).unwrap();
        lowest = lowest.min(tau[HIP]).min(tau[KNEE]);
    }
    (lowest, backward)
}

/// Implicit midpoint on the canonical pair `(q, p = M q')`, where
/// `p' = C^T q' - G`. Symplectic for the full, non-separable Hamiltonian.
pub fn implicit_midpoint(model: &LegModel, s: &JointState, dt: f64) -> JointState {
    let p0 = mass_matrix(model, &s.q) * s.qdot;
    let rates = |q: &Vec3, p: &Vec3| {
        let qdot = mass_matrix(model, q).cholesky().unwrap().solve(p);
        let pdot = christoffel_matrix(model, q, &qdot).transpose() * qdot - gravity_vector(model, q);
        (qdot, pdot)
    };
    let (mut q1, mut p1) = (s.q, p0);
    for _ in 0..50 {
        let (qd, pd) = rates(&((s.q + q1) / 2.0), &((p0 + p1) / 2.0));
        let (qn, pn) = (s.q + qd * dt, p0 + pd * dt);
        let done = (qn - q1).amax() < 1e-15 && (pn - p1).amax() < 1e-15;
        (q1, p1) = (qn, pn);
        if done {
            break;
        }
    }
    let qdot = mass_matrix(model, &q1).cholesky().unwrap().solve(&p1);
    JointState::new(q1, qdot)
}

fn energy(model: &LegModel, s: &JointState) -> f64 {
    kinetic_energy(model, s) + potential_energy(model, &s.q)
}

/// Largest deviation of the mechanical energy of a frictionless free leg
/// released from a bent posture, relative to its energy above the hanging
/// rest position.
pub fn max_energy_drift(step: fn(&LegModel, &JointState, f64) -> JointState, duration: f64) -> f64 {
    let mut model = super::left_leg();
    model.friction_dry = [0.0; 3];
    model.friction_viscous = [0.0; 3];
    // a free chain: the knee may spin through its stop
    model.joint_limits = [[-1e3, 1e3]; 3];
    let mut s = JointState::new(Vec3::new(0.1, 0.5, -0.3), Vec3::zeros());
    let floor = potential_energy(&model, &Vec3::zeros());
    let e0 = energy(&model, &s) - floor;
    let mut worst: f64 = 0.0;
    for _ in 0..(duration / 0.001).round() as usize {
        s = step(&model, &s, 0.001);
        worst = worst.max((energy(&model, &s) - floor - e0).abs());
    }
    worst / e0
}
