//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the kinematics or dynamics of the crate; the
//! oracles only read the model parameters.

#![allow(dead_code)]

pub mod checks;

use disentangle::leg_dynamics::{LegModel, Mat3, Side, Vec3, JOINTS};
use nalgebra::Matrix4;
use proptest::prelude::*;

pub fn left_leg() -> LegModel {
    LegModel::small_quadruped(Side::Left, Vec3::new(0.2263, 0.07, 0.0))
}

pub fn right_leg() -> LegModel {
    LegModel::small_quadruped(Side::Right, Vec3::new(-0.2263, -0.07, 0.0))
}

fn rodrigues(axis: &Vec3, angle: f64) -> Mat3 {
    let k = axis / axis.norm();
    let kx = Mat3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Mat3::identity() + angle.sin() * kx + (1.0 - angle.cos()) * kx * kx
}

fn homogeneous(r: &Mat3, p: &Vec3) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    t.fixed_view_mut::<3, 1>(0, 3).copy_from(p);
    t
}

fn apply(t: &Matrix4<f64>, p: &Vec3) -> Vec3 {
    let h = t * p.push(1.0);
    Vec3::new(h.x, h.y, h.z)
}

/// Link frames as 4x4 transforms: frame `i` sits at joint `i`, rotated by `q_0..q_i`.
pub struct Chain {
    pub frames: [Matrix4<f64>; JOINTS],
    /// Joint origins followed by the foot.
    pub points: [Vec3; JOINTS + 1],
}

impl Chain {
    pub fn rotation(&self, i: usize) -> Mat3 {
        self.frames[i].fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn com(&self, model: &LegModel, i: usize) -> Vec3 {
        apply(&self.frames[i], &model.link_com_offsets[i])
    }
}

pub fn transform_chain(model: &LegModel, q: &Vec3) -> Chain {
    let mut t = homogeneous(&Mat3::identity(), &model.hip_position);
    let mut frames = [Matrix4::identity(); JOINTS];
    let mut points = [Vec3::zeros(); JOINTS + 1];
    for i in 0..JOINTS {
        t *= homogeneous(&rodrigues(&model.joint_axes[i], q[i]), &Vec3::zeros());
        frames[i] = t;
        points[i] = apply(&t, &Vec3::zeros());
        // next joint origin, expressed by a pure translation in this frame
        let offset = if i == 0 {
            Vec3::new(0.0, model.side.sign() * model.link_lengths[0], 0.0)
        } else {
            Vec3::new(0.0, 0.0, -model.link_lengths[i])
        };
        t *= homogeneous(&Mat3::identity(), &offset);
    }
    points[JOINTS] = apply(&t, &Vec3::zeros());
    Chain { frames, points }
}

/// Kinetic energy by propagating link velocities outward and summing
/// `m v_c^2 / 2 + w^T I w / 2` per link.
pub fn kinetic_energy_oracle(model: &LegModel, q: &Vec3, qdot: &Vec3) -> f64 {
    let chain = transform_chain(model, q);
    let mut omega = Vec3::zeros();
    let mut v_origin = Vec3::zeros();
    let mut parent = Mat3::identity();
    let mut energy = 0.0;
    for i in 0..JOINTS {
        omega += parent * model.joint_axes[i] * qdot[i];
        let r = chain.rotation(i);
        let com = chain.com(model, i);
        let v_com = v_origin + omega.cross(&(com - chain.points[i]));
        let inertia = r * model.link_inertias[i] * r.transpose();
        energy += 0.5 * model.link_masses[i] * v_com.norm_squared() + 0.5 * omega.dot(&(inertia * omega));
        v_origin += omega.cross(&(chain.points[i + 1] - chain.points[i]));
        parent = r;
    }
    energy
}

/// Inertia matrix recovered from the energy oracle by polarization.
pub fn mass_matrix_oracle(model: &LegModel, q: &Vec3) -> Mat3 {
    let e = |v: Vec3| kinetic_energy_oracle(model, q, &v);
    let unit = |i: usize| Vec3::from_fn(|k, _| if k == i { 1.0 } else { 0.0 });
    Mat3::from_fn(|i, j| {
        if i == j {
            2.0 * e(unit(i))
        } else {
            e(unit(i) + unit(j)) - e(unit(i)) - e(unit(j))
        }
    })
}

/// Potential energy `sum m g z_c` from the transform chain.
pub fn potential_energy_oracle(model: &LegModel, q: &Vec3) -> f64 {
    let chain = transform_chain(model, q);
    (0..JOINTS)
        .map(|i| model.link_masses[i] * model.gravity * chain.com(model, i).z)
        .sum()
}

/// Central finite difference of a vector-valued function of `q`, column `k`.
pub fn fd_column<F: Fn(&Vec3) -> Vec3>(f: F, q: &Vec3, k: usize, h: f64) -> Vec3 {
    let mut lo = *q;
    let mut hi = *q;
    lo[k] -= h;
    hi[k] += h;
    (f(&hi) - f(&lo)) / (2.0 * h)
}

/// Joint angles inside the limits of the default leg.
pub fn any_q() -> impl Strategy<Value = Vec3> {
    (-0.6..0.6f64, -2.4..2.4f64, -2.7..2.7f64).prop_map(|(a, b, c)| Vec3::new(a, b, c))
}

pub fn any_qdot() -> impl Strategy<Value = Vec3> {
    (-10.0..10.0f64, -15.0..15.0f64, -15.0..15.0f64).prop_map(|(a, b, c)| Vec3::new(a, b, c))
}

/// Knee-back postures: thigh swung back, shin swung forward of it by less
/// than a right angle, so the foot stays below the knee.
pub fn knee_back_q() -> impl Strategy<Value = Vec3> {
    (-0.4..0.4f64, 0.0..1.3f64, -1.5..0.0f64).prop_map(|(a, b, c)| Vec3::new(a, b, c))
}
