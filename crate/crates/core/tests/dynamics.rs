mod common;

use approx::assert_abs_diff_eq;
use common::checks::{implicit_midpoint, max_energy_drift};
use common::*;
use disentangle::leg_dynamics::*;
use proptest::prelude::*;

fn front_normal_push(kin: &LegKinematics, link: usize, magnitude: f64) -> Vec3 {
    let d = kin.origins[link + 1] - kin.origins[link];
    // inward normal of the front surface in the sagittal plane
    Vec3::new(-d.z, 0.0, d.x).normalize() * -magnitude
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn forward_kinematics_matches_transform_chain(q in any_q()) {
        for model in [left_leg(), right_leg()] {
            let kin = forward_kinematics(&model, &q);
            let chain = transform_chain(&model, &q);
            for i in 0..=JOINTS {
                prop_assert!((kin.origins[i] - chain.points[i]).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn foot_jacobian_matches_finite_differences(q in any_q()) {
        let model = left_leg();
        let j = foot_jacobian(&model, &q);
        for k in 0..JOINTS {
            let fd = fd_column(|q| forward_kinematics(&model, q).foot(), &q, k, 1e-6);
            prop_assert!((j.column(k) - fd).amax() < 1e-6);
        }
    }

    #[test]
    fn point_jacobian_matches_finite_differences(q in any_q(), link in 0usize..3, frac in 0.0..=1.0f64) {
        let model = right_leg();
        let j = point_jacobian(&model, &q, link, frac).unwrap();
        for k in 0..JOINTS {
            let fd = fd_column(|q| forward_kinematics(&model, q).link_point(link, frac), &q, k, 1e-6);
            prop_assert!((j.column(k) - fd).amax() < 1e-6);
        }
    }

    #[test]
    fn mass_matrix_is_symmetric_positive_definite(q in any_q()) {
        let m = mass_matrix(&left_leg(), &q);
        prop_assert!((m - m.transpose()).amax() < 1e-12);
        let eig = m.symmetric_eigenvalues();
        prop_assert!(eig.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn mass_matrix_matches_kinetic_energy_oracle(q in any_q(), qdot in any_qdot()) {
        for model in [left_leg(), right_leg()] {
            let m = mass_matrix(&model, &q);
            prop_assert!((m - mass_matrix_oracle(&model, &q)).amax() < 1e-10);
            let e = kinetic_energy(&model, &JointState::new(q, qdot));
            prop_assert!((e - kinetic_energy_oracle(&model, &q, &qdot)).abs() < 1e-10 * (1.0 + e));
        }
    }

    #[test]
    fn mass_matrix_rate_is_c_plus_c_transpose(q in any_q(), qdot in any_qdot()) {
        let model = left_leg();
        let c = christoffel_matrix(&model, &q, &qdot);
        let h = 1e-6;
        let fd = (mass_matrix(&model, &(q + qdot * h)) - mass_matrix(&model, &(q - qdot * h))) / (2.0 * h);
        prop_assert!((fd - (c + c.transpose())).amax() < 1e-6);
        prop_assert!((mass_matrix_rate(&model, &q, &qdot) - fd).amax() < 1e-6);
    }

    #[test]
    fn christoffel_skew_symmetry(q in any_q(), qdot in any_qdot()) {
        let model = right_leg();
        let n = mass_matrix_rate(&model, &q, &qdot) - 2.0 * christoffel_matrix(&model, &q, &qdot);
        prop_assert!(qdot.dot(&(n * qdot)).abs() < 1e-9);
    }

    #[test]
    fn gravity_is_the_potential_gradient(q in any_q()) {
        let model = left_leg();
        let g = gravity_vector(&model, &q);
        let h = 1e-6;
        for k in 0..JOINTS {
            let (mut lo, mut hi) = (q, q);
            lo[k] -= h;
            hi[k] += h;
            let fd = (potential_energy_oracle(&model, &hi) - potential_energy_oracle(&model, &lo)) / (2.0 * h);
            prop_assert!((g[k] - fd).abs() < 1e-6);
        }
        prop_assert!((potential_energy(&model, &q) - potential_energy_oracle(&model, &q)).abs() < 1e-12);
    }

    #[test]
    fn friction_is_odd(qdot in any_qdot()) {
        let model = left_leg();
        let a = friction_torque(&model, &qdot);
        let b = friction_torque(&model, &-qdot);
        prop_assert!((a + b).amax() < 1e-12);
    }

    #[test]
    fn forward_dynamics_plugs_back(q in any_q(), qdot in any_qdot(),
                                   tau in any_qdot(), ext in any_qdot()) {
        let model = right_leg();
        let s = JointState::new(q, qdot);
        let qdd = forward_dynamics(&model, &s, &tau, &ext);
        let residual = mass_matrix(&model, &q) * qdd
            + christoffel_matrix(&model, &q, &qdot) * qdot
            + gravity_vector(&model, &q)
            - tau
            - passive_torque(&model, &s);
        prop_assert!((residual - ext).amax() < 1e-9);
    }

    #[test]
    fn contact_torques_are_linear(q in any_q(), f1 in any_qdot(), f2 in any_qdot(),
                                  a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let model = left_leg();
        let c1 = ContactForce::new(1, a, f1).unwrap();
        let c2 = ContactForce::new(2, b, f2).unwrap();
        let both = external_torque_from_contacts(&model, &q, &[c1, c2]).unwrap();
        let sum = external_torque_from_contacts(&model, &q, &[c1]).unwrap()
            + external_torque_from_contacts(&model, &q, &[c2]).unwrap();
        prop_assert!((both - sum).amax() < 1e-12);
        let oracle = point_jacobian(&model, &q, 1, a).unwrap().transpose() * f1;
        prop_assert!((external_torque_from_contacts(&model, &q, &[c1]).unwrap() - oracle).amax() < 1e-12);
    }

    #[test]
    fn backward_pushes_never_give_negative_hip_or_knee_torque(
        q in knee_back_q(), link in 1usize..3, frac in 0.0..=1.0f64, f in 0.1..50.0f64,
    ) {
        let model = right_leg();
        let kin = forward_kinematics(&model, &q);
        let force = front_normal_push(&kin, link, f);
        prop_assert!(force.x < 0.0);
        let tau = external_torque_from_contacts(&model, &q, &[ContactForce::new(link, frac, force).unwrap()]).unwrap();
        prop_assert!(tau[HIP] >= -1e-9 && tau[KNEE] >= -1e-9);
    }
}

#[test]
fn ten_newton_backward_foot_force_in_knee_back_posture() {
    let model = left_leg();
    let q = inverse_kinematics(
        &model,
        &(model.hip_position + Vec3::new(0.02, 0.1, -0.3)),
        KneeDirection::Back,
    )
    .q;
    assert!(q[HIP] > 0.0 && q[KNEE] < 0.0);
    let f = ContactForce::new(2, 1.0, Vec3::new(-10.0, 0.0, 0.0)).unwrap();
    let tau = external_torque_from_contacts(&model, &q, &[f]).unwrap();
    let oracle = foot_jacobian(&model, &q).transpose() * f.force;
    assert_abs_diff_eq!(tau, oracle, epsilon = 1e-12);
    assert!(tau[HIP] > 0.0 && tau[KNEE] > 0.0);
}

fn rk4(model: &LegModel, s: &JointState, dt: f64) -> JointState {
    let zero = Vec3::zeros();
    let f = |s: &JointState| (s.qdot, forward_dynamics(model, s, &zero, &zero));
    let shift = |k: &(Vec3, Vec3), h: f64| JointState::new(s.q + k.0 * h, s.qdot + k.1 * h);
    let k1 = f(s);
    let k2 = f(&shift(&k1, dt / 2.0));
    let k3 = f(&shift(&k2, dt / 2.0));
    let k4 = f(&shift(&k3, dt));
    JointState::new(
        s.q + (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0) * dt / 6.0,
        s.qdot + (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1) * dt / 6.0,
    )
}

#[test]
fn passive_swing_conserves_energy_without_friction() {
    let rk = max_energy_drift(rk4, 10.0);
    let mid = max_energy_drift(implicit_midpoint, 10.0);
    assert!(rk < 0.01, "rk4 drift {rk:.3e}");
    assert!(mid < 0.01, "midpoint drift {mid:.3e}");
}
