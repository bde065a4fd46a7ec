//! Kinematics and rigid-body dynamics of a single 3-DOF leg.
//!
//! Each leg is an independent serial chain rooted at the torso frame, which is
//! treated as inertial. Joint 0 (ab/ad) rotates about the body x axis, joints 1
//! and 2 (hip, knee) about the body y axis in the zero configuration. With the
//! leg hanging straight down at `q = 0`, a positive hip or knee angle swings the
//! distal links backward (towards -x) and up.
//!
//! The equations of motion are
//!
//! ```text
//! M(q) q'' + C(q, q') q' + G(q) = tau_m + tau_p + tau_ext
//! ```
//!
//! where `tau_p` collects the passive torques the model knows about (joint
//! friction and the joint-limit penalty). `C` is built from the Christoffel
//! symbols of `M` so that `dM/dt = C + C^T` holds exactly.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Number of joints in a leg.
pub const JOINTS: usize = 3;

pub const ABAD: usize = 0;
pub const HIP: usize = 1;
pub const KNEE: usize = 2;

/// Standard gravity, m/s^2.
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Which side of the torso a leg is mounted on. Mirrors the ab/ad offset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

/// Which way the knee points when solving inverse kinematics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KneeDirection {
    /// Knee behind the hip-foot line (negative knee angle).
    Back,
    /// Knee ahead of the hip-foot line (positive knee angle).
    Forward,
}

/// Kinematic, inertial and friction description of one leg.
#[derive(Clone, Debug, PartialEq)]
pub struct LegModel {
    /// Joint axes in the zero configuration (unit vectors, torso frame).
    pub joint_axes: [Vec3; JOINTS],
    /// Ab/ad offset, upper leg, lower leg (m).
    pub link_lengths: [f64; JOINTS],
    pub link_masses: [f64; JOINTS],
    /// Centre of mass of each link in its own frame (m).
    pub link_com_offsets: [Vec3; JOINTS],
    /// Inertia about each link's centre of mass, link frame (kg m^2).
    pub link_inertias: [Mat3; JOINTS],
    /// Dry friction `c` per joint (N m).
    pub friction_dry: [f64; JOINTS],
    /// Viscous friction `d` per joint (N m s/rad).
    pub friction_viscous: [f64; JOINTS],
    /// Smoothing velocity for the dry-friction sign (rad/s).
    pub friction_smoothing: f64,
    /// Lower/upper limit per joint (rad).
    pub joint_limits: [[f64; 2]; JOINTS],
    pub velocity_limit: [f64; JOINTS],
    pub torque_limit: [f64; JOINTS],
    /// Ab/ad joint location in the torso frame (m).
    pub hip_position: Vec3,
    pub side: Side,
    /// Gravity magnitude along torso -z (m/s^2).
    pub gravity: f64,
    /// Joint-limit penalty stiffness (N m/rad) and damping (N m s/rad).
    pub limit_stiffness: f64,
    pub limit_damping: f64,
}

/// Joint positions and velocities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointState {
    pub q: Vec3,
    pub qdot: Vec3,
}

impl JointState {
    pub fn new(q: Vec3, qdot: Vec3) -> Self {
        Self { q, qdot }
    }

    pub fn at_rest(q: Vec3) -> Self {
        Self { q, qdot: Vec3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }
}

/// A pure point force applied somewhere along a link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactForce {
    pub link_index: usize,
    /// Position along the link, 0 at its proximal joint, 1 at its distal end.
    pub fraction_along_link: f64,
    /// Force in the torso frame (N).
    pub force: Vec3,
}

impl ContactForce {
    pub fn new(link_index: usize, fraction_along_link: f64, force: Vec3) -> Result<Self> {
        check_link_point(link_index, fraction_along_link)?;
        Ok(Self {
            link_index,
            fraction_along_link,
            force,
        })
    }
}

fn check_link_point(link_index: usize, fraction: f64) -> Result<()> {
    if link_index >= JOINTS {
        return Err(Error::InvalidArgument(format!(
            "link index {link_index} out of range 0..{JOINTS}"
        )));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "fraction along link {fraction} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Solid-rod inertia about the centre of mass for a link along `axis` (0=x, 1=y, 2=z).
fn rod_inertia(mass: f64, length: f64, radius: f64, axis: usize) -> Mat3 {
    let transverse = mass * (3.0 * radius * radius + length * length) / 12.0;
    let axial = 0.5 * mass * radius * radius;
    let mut d = Vec3::repeat(transverse);
    d[axis] = axial;
    Mat3::from_diagonal(&d)
}

impl LegModel {
    /// A small-quadruped leg with placeholder inertial values.
    pub fn small_quadruped(side: Side, hip_position: Vec3) -> Self {
        let lengths = [0.10, 0.206, 0.206];
        let masses = [0.6, 0.8, 0.25];
        let s = side.sign();
        Self {
            joint_axes: [Vec3::x(), Vec3::y(), Vec3::y()],
            link_lengths: lengths,
            link_masses: masses,
            link_com_offsets: [
                Vec3::new(0.0, s * 0.5 * lengths[0], 0.0),
                Vec3::new(0.0, 0.0, -0.5 * lengths[1]),
                Vec3::new(0.0, 0.0, -0.5 * lengths[2]),
            ],
            link_inertias: [
                rod_inertia(masses[0], lengths[0], 0.04, 1),
                rod_inertia(masses[1], lengths[1], 0.025, 2),
                rod_inertia(masses[2], lengths[2], 0.012, 2),
            ],
            friction_dry: [0.2, 0.2, 0.44],
            friction_viscous: [0.01, 0.01, 0.01],
            friction_smoothing: 0.01,
            joint_limits: [[-0.7, 0.7], [-2.6, 2.6], [-2.9, 2.9]],
            velocity_limit: [25.0, 25.0, 20.0],
            torque_limit: [20.0, 20.0, 25.0],
            hip_position,
            side,
            gravity: STANDARD_GRAVITY,
            limit_stiffness: 200.0,
            limit_damping: 2.0,
        }
    }

    /// Checks the model's physical invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        for i in 0..JOINTS {
            if !(self.link_lengths[i] > 0.0) {
                return bad("link lengths must be > 0");
            }
            if !(self.link_masses[i] > 0.0) {
                return bad("link masses must be > 0");
            }
            if !(self.friction_dry[i] >= 0.0) || !(self.friction_viscous[i] >= 0.0) {
                return bad("friction parameters must be >= 0");
            }
            let [lo, hi] = self.joint_limits[i];
            if !(lo < hi) {
                return bad("joint limits must satisfy lower < upper");
            }
            if !(self.velocity_limit[i] > 0.0) || !(self.torque_limit[i] > 0.0) {
                return bad("velocity and torque limits must be > 0");
            }
            let inertia = &self.link_inertias[i];
            if (inertia - inertia.transpose()).amax() > 1e-12 {
                return bad("link inertias must be symmetric");
            }
            if inertia.cholesky().is_none() {
                return bad("link inertias must be positive definite");
            }
            if (self.joint_axes[i].norm() - 1.0).abs() > 1e-9 {
                return bad("joint axes must be unit vectors");
            }
        }
        if !(self.friction_smoothing > 0.0) {
            return bad("friction smoothing velocity must be > 0");
        }
        if !(self.gravity >= 0.0) {
            return bad("gravity must be >= 0");
        }
        Ok(())
    }

    /// Vector from joint `i` to the next joint (or the foot) in link frame `i`.
    pub fn link_vector(&self, i: usize) -> Vec3 {
        match i {
            0 => Vec3::new(0.0, self.side.sign() * self.link_lengths[0], 0.0),
            _ => Vec3::new(0.0, 0.0, -self.link_lengths[i]),
        }
    }

    pub fn clamp_to_limits(&self, q: Vec3) -> Vec3 {
        Vec3::from_fn(|i, _| q[i].clamp(self.joint_limits[i][0], self.joint_limits[i][1]))
    }
}

/// Poses of every link for a given joint configuration, torso frame.
#[derive(Clone, Debug)]
pub struct LegKinematics {
    /// Orientation of each link frame.
    pub rotations: [Mat3; JOINTS],
    /// Joint origins `o0..o2` followed by the foot point.
    pub origins: [Vec3; JOINTS + 1],
    /// Joint axes in the torso frame.
    pub axes: [Vec3; JOINTS],
}

impl LegKinematics {
    pub fn foot(&self) -> Vec3 {
        self.origins[JOINTS]
    }

    pub fn knee(&self) -> Vec3 {
        self.origins[KNEE]
    }

    /// Point at `fraction` along link `link` (0 = proximal joint).
    pub fn link_point(&self, link: usize, fraction: f64) -> Vec3 {
        self.origins[link] + (self.origins[link + 1] - self.origins[link]) * fraction
    }
}

fn axis_rotation(axis: &Vec3, angle: f64) -> Mat3 {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).into_inner()
}

/// Link frames and foot position for configuration `q`.
pub fn forward_kinematics(model: &LegModel, q: &Vec3) -> LegKinematics {
    let mut rotations = [Mat3::identity(); JOINTS];
    let mut origins = [model.hip_position; JOINTS + 1];
    let mut axes = [Vec3::zeros(); JOINTS];
    let mut parent = Mat3::identity();
    for i in 0..JOINTS {
        axes[i] = parent * model.joint_axes[i];
        let r = parent * axis_rotation(&model.joint_axes[i], q[i]);
        rotations[i] = r;
        origins[i + 1] = origins[i] + r * model.link_vector(i);
        parent = r;
    }
    LegKinematics {
        rotations,
        origins,
        axes,
    }
}

fn jacobian_at(kin: &LegKinematics, link: usize, point: &Vec3) -> Mat3 {
    let mut j = Mat3::zeros();
    for col in 0..=link {
        let c = kin.axes[col].cross(&(point - kin.origins[col]));
        j.set_column(col, &c);
    }
    j
}

/// Linear-velocity Jacobian of the point at `fraction` along link `link_index`.
pub fn point_jacobian(model: &LegModel, q: &Vec3, link_index: usize, fraction: f64) -> Result<Mat3> {
    check_link_point(link_index, fraction)?;
    let kin = forward_kinematics(model, q);
    let p = kin.link_point(link_index, fraction);
    Ok(jacobian_at(&kin, link_index, &p))
}

/// Jacobian of the foot point.
pub fn foot_jacobian(model: &LegModel, q: &Vec3) -> Mat3 {
    let kin = forward_kinematics(model, q);
    jacobian_at(&kin, KNEE, &kin.foot())
}

fn skew(v: &Vec3) -> Mat3 {
    v.cross_matrix()
}

/// Per-link quantities shared by the mass matrix and its derivatives.
struct LinkTerms {
    com: Vec3,
    jv: Mat3,
    jw: Mat3,
    /// World-frame inertia about the centre of mass.
    inertia: Mat3,
}

fn link_terms(model: &LegModel, kin: &LegKinematics) -> [LinkTerms; JOINTS] {
    std::array::from_fn(|i| {
        let r = kin.rotations[i];
        let com = kin.origins[i] + r * model.link_com_offsets[i];
        let jv = jacobian_at(kin, i, &com);
        let mut jw = Mat3::zeros();
        for col in 0..=i {
            jw.set_column(col, &kin.axes[col]);
        }
        LinkTerms {
            com,
            jv,
            jw,
            inertia: r * model.link_inertias[i] * r.transpose(),
        }
    })
}

/// Joint-space inertia matrix `M(q)` (composite of per-link kinetic energy).
pub fn mass_matrix(model: &LegModel, q: &Vec3) -> Mat3 {
    let kin = forward_kinematics(model, q);
    let terms = link_terms(model, &kin);
    let mut m = Mat3::zeros();
    for (i, t) in terms.iter().enumerate() {
        m += model.link_masses[i] * t.jv.transpose() * t.jv;
        m += t.jw.transpose() * t.inertia * t.jw;
    }
    0.5 * (m + m.transpose())
}

/// Partial derivatives `dM/dq_k` for k = 0..2, computed analytically.
pub fn mass_matrix_partials(model: &LegModel, q: &Vec3) -> [Mat3; JOINTS] {
    let kin = forward_kinematics(model, q);
    let terms = link_terms(model, &kin);
    let z = &kin.axes;
    let o = &kin.origins;
    std::array::from_fn(|k| {
        let mut dm = Mat3::zeros();
        for (i, t) in terms.iter().enumerate() {
            if k > i {
                continue;
            }
            let c = t.com;
            let mut djv = Mat3::zeros();
            let mut djw = Mat3::zeros();
            for j in 0..=i {
                let col = if k < j {
                    // joint k rotates both z_j and (c - o_j) rigidly
                    z[k].cross(&z[j].cross(&(c - o[j])))
                } else {
                    // j <= k <= i: only the lever arm beyond joint k moves
                    z[j].cross(&z[k].cross(&(c - o[k])))
                };
                djv.set_column(j, &col);
                if k < j {
                    djw.set_column(j, &z[k].cross(&z[j]));
                }
            }
            let sk = skew(&z[k]);
            let da = sk * t.inertia - t.inertia * sk;
            let m = model.link_masses[i];
            dm += m * (djv.transpose() * t.jv + t.jv.transpose() * djv);
            dm +=
                djw.transpose() * t.inertia * t.jw + t.jw.transpose() * da * t.jw + t.jw.transpose() * t.inertia * djw;
        }
        dm
    })
}

/// Coriolis/centrifugal matrix built from the Christoffel symbols of `M`.
pub fn christoffel_matrix(model: &LegModel, q: &Vec3, qdot: &Vec3) -> Mat3 {
    let dm = mass_matrix_partials(model, q);
    Mat3::from_fn(|k, j| {
        (0..JOINTS)
            .map(|i| 0.5 * (dm[i][(k, j)] + dm[j][(k, i)] - dm[k][(i, j)]) * qdot[i])
            .sum()
    })
}

/// Time derivative of `M` along `qdot`.
pub fn mass_matrix_rate(model: &LegModel, q: &Vec3, qdot: &Vec3) -> Mat3 {
    let dm = mass_matrix_partials(model, q);
    (0..JOINTS).fold(Mat3::zeros(), |acc, i| acc + dm[i] * qdot[i])
}

/// Gravity torques `G(q)`, the gradient of potential energy.
pub fn gravity_vector(model: &LegModel, q: &Vec3) -> Vec3 {
    let kin = forward_kinematics(model, q);
    let terms = link_terms(model, &kin);
    terms.iter().enumerate().fold(Vec3::zeros(), |acc, (i, t)| {
        acc + model.link_masses[i] * model.gravity * t.jv.row(2).transpose()
    })
}

/// Potential energy relative to the torso origin (J).
pub fn potential_energy(model: &LegModel, q: &Vec3) -> f64 {
    let kin = forward_kinematics(model, q);
    link_terms(model, &kin)
        .iter()
        .enumerate()
        .map(|(i, t)| model.link_masses[i] * model.gravity * t.com.z)
        .sum()
}

pub fn kinetic_energy(model: &LegModel, state: &JointState) -> f64 {
    0.5 * state.qdot.dot(&(mass_matrix(model, &state.q) * state.qdot))
}

/// Joint friction `-c tanh(q'/v_eps) - d q'`, the smoothed form of `-c sign(q') - d q'`.
pub fn friction_torque(model: &LegModel, qdot: &Vec3) -> Vec3 {
    Vec3::from_fn(|i, _| {
        -model.friction_dry[i] * (qdot[i] / model.friction_smoothing).tanh() - model.friction_viscous[i] * qdot[i]
    })
}

/// Unilateral penalty torque at the joint limits; zero inside the range.
pub fn limit_torque(model: &LegModel, state: &JointState) -> Vec3 {
    Vec3::from_fn(|i, _| {
        let [lo, hi] = model.joint_limits[i];
        let (q, v) = (state.q[i], state.qdot[i]);
        if q < lo {
            (model.limit_stiffness * (lo - q) - model.limit_damping * v).max(0.0)
        } else if q > hi {
            (-model.limit_stiffness * (q - hi) - model.limit_damping * v).min(0.0)
        } else {
            0.0
        }
    })
}

/// Every passive torque the model accounts for: friction plus joint-limit stops.
pub fn passive_torque(model: &LegModel, state: &JointState) -> Vec3 {
    friction_torque(model, &state.qdot) + limit_torque(model, state)
}

/// Joint torques produced by point contacts: the sum of `J_c^T F`.
pub fn external_torque_from_contacts(model: &LegModel, q: &Vec3, contacts: &[ContactForce]) -> Result<Vec3> {
    if contacts.is_empty() {
        return Ok(Vec3::zeros());
    }
    let kin = forward_kinematics(model, q);
    contacts.iter().try_fold(Vec3::zeros(), |acc, c| {
        check_link_point(c.link_index, c.fraction_along_link)?;
        let p = kin.link_point(c.link_index, c.fraction_along_link);
        Ok(acc + jacobian_at(&kin, c.link_index, &p).transpose() * c.force)
    })
}

/// Joint accelerations from the equations of motion.
pub fn forward_dynamics(model: &LegModel, state: &JointState, tau_m: &Vec3, tau_ext: &Vec3) -> Vec3 {
    let m = mass_matrix(model, &state.q);
    let rhs = tau_m + passive_torque(model, state) + tau_ext
        - christoffel_matrix(model, &state.q, &state.qdot) * state.qdot
        - gravity_vector(model, &state.q);
    solve_spd(&m, &rhs)
}

pub(crate) fn solve_spd(m: &Mat3, rhs: &Vec3) -> Vec3 {
    match m.cholesky() {
        Some(ch) => ch.solve(rhs),
        None => m.lu().solve(rhs).unwrap_or_else(|| Vec3::repeat(f64::NAN)),
    }
}

/// Result of the sagittal inverse kinematics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IkSolution {
    pub q: Vec3,
    /// The target was outside the reachable annulus and was pulled onto it.
    pub clamped: bool,
}

/// Inverse kinematics for a foot target (torso frame) with the ab/ad joint held at zero.
///
/// Only the x/z components of the target are used; the lateral position is
/// fixed by the ab/ad offset.
pub fn inverse_kinematics(model: &LegModel, target: &Vec3, knee: KneeDirection) -> IkSolution {
    let hip_joint = model.hip_position + model.link_vector(0);
    let (l1, l2) = (model.link_lengths[HIP], model.link_lengths[KNEE]);
    let rel_x = target.x - hip_joint.x;
    let rel_z = target.z - hip_joint.z;
    let dist = rel_x.hypot(rel_z);
    let [klo, khi] = model.joint_limits[KNEE];
    let max_fold = match knee {
        KneeDirection::Back => -klo,
        KneeDirection::Forward => khi,
    }
    .min(std::f64::consts::PI);
    // reach at the knee's folding limit
    let min_reach = (l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * max_fold.cos()).max(0.0).sqrt();
    let max_reach = (l1 + l2) * (1.0 - 1e-6);
    let reach = dist.clamp(min_reach.max(1e-6), max_reach);
    let clamped = (reach - dist).abs() > 1e-12;
    let cos_knee = ((reach * reach - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let knee_mag = cos_knee.acos();
    let q2 = match knee {
        KneeDirection::Back => -knee_mag,
        KneeDirection::Forward => knee_mag,
    };
    // foot direction measured the same way as the link angles: d(psi) = (-sin psi, -cos psi)
    let psi = if dist > 1e-12 { (-rel_x).atan2(-rel_z) } else { 0.0 };
    let q1 = psi - (l2 * q2.sin()).atan2(l1 + l2 * q2.cos());
    IkSolution {
        q: Vec3::new(0.0, q1, q2),
        clamped,
    }
}
