//! Trot scheduling, swing and stance leg control, and the swing-leg reaction.
//!
//! Legs are numbered front-left, front-right, hind-left, hind-right. The
//! front-left/hind-right pair starts in stance at `t = 0`.
//!
//! The reaction runs during swing only:
//!
//! ```text
//! Nominal --stuck--> Retract --free & min time, or deadline--> ExtendAdvance
//!     ExtendAdvance --above foothold, or descent deadline--> ExtendDescend
//!     ExtendAdvance | ExtendDescend --stuck--> Retract
//! ```
//!
//! Retraction drives the hip backward at a target velocity while the knee
//! presses forward with a constant torque, so an obstacle resting on the
//! front of the shin slides down and off the foot.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leg_dynamics::{
    foot_jacobian, forward_kinematics, gravity_vector, inverse_kinematics, JointState, KneeDirection, LegModel, Side,
    Vec3, ABAD, HIP, JOINTS, KNEE,
};
use crate::momentum_observer::StuckVerdict;

pub const LEG_COUNT: usize = 4;
pub const LEG_NAMES: [&str; LEG_COUNT] = ["fl", "fr", "hl", "hr"];
/// Shortest admissible gait period (s), set by the knee speed limit.
pub const MIN_PERIOD: f64 = 0.31;

/// Hip (ab/ad joint) locations in the torso frame.
pub fn hip_positions() -> [Vec3; LEG_COUNT] {
    let (x, y) = (0.2263, 0.07);
    [
        Vec3::new(x, y, 0.0),
        Vec3::new(x, -y, 0.0),
        Vec3::new(-x, y, 0.0),
        Vec3::new(-x, -y, 0.0),
    ]
}

pub fn leg_side(leg: usize) -> Side {
    if leg.is_multiple_of(2) {
        Side::Left
    } else {
        Side::Right
    }
}

/// The four legs of the default robot.
pub fn quadruped_legs() -> [LegModel; LEG_COUNT] {
    let hips = hip_positions();
    std::array::from_fn(|i| LegModel::small_quadruped(leg_side(i), hips[i]))
}

/// Joint-space PD gains.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointGains {
    pub kp: [f64; JOINTS],
    pub kd: [f64; JOINTS],
}

impl Default for JointGains {
    fn default() -> Self {
        Self {
            kp: [80.0, 80.0, 60.0],
            kd: [2.0, 2.0, 1.5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitConfig {
    /// Gait period (s).
    pub period: f64,
    pub duty_factor: f64,
    /// Swing apex above the liftoff-touchdown chord (m).
    pub step_height: f64,
    pub body_speed: f64,
    pub body_height: f64,
    /// Swing time left at which extension is forced and the stuck state is carried over (s).
    pub t_down: f64,
    /// Swing time left at which the foot must start descending (s).
    pub t_descend: f64,
    /// Shortest retraction (s).
    pub retract_min: f64,
    /// Hip retraction velocity target (rad/s); positive swings the leg backward and up.
    pub retract_hip_velocity: f64,
    /// Hip velocity-tracking gain during retraction (N m s/rad).
    pub retract_hip_gain: f64,
    /// Hip angle at which retraction stops and holds (rad).
    pub retract_hip_stop: f64,
    /// Forward knee torque during retraction (N m).
    pub retract_knee_torque: f64,
    /// Most forward shin pitch allowed while retracting (rad, 0 = vertical).
    /// Past it the knee is held so the shin front keeps sloping down.
    pub retract_shin_min: f64,
    /// Horizontal speed and acceleration limits while advancing (m/s, m/s^2).
    pub advance_speed: f64,
    pub advance_accel: f64,
    pub descend_speed: f64,
    pub descend_accel: f64,
    /// Foot target depth below the ground at the end of a descent (m).
    pub touchdown_depth: f64,
    /// Mass carried by the legs, two at a time (kg).
    pub body_mass: f64,
    pub gains: JointGains,
}

impl Default for GaitConfig {
    fn default() -> Self {
        Self {
            period: 0.54,
            duty_factor: 0.5,
            step_height: 0.07,
            body_speed: 0.5,
            body_height: 0.27,
            t_down: 0.12,
            t_descend: 0.05,
            retract_min: 0.1,
            retract_hip_velocity: 15.0,
            retract_hip_gain: 1.0,
            retract_hip_stop: 2.3,
            retract_knee_torque: 2.0,
            retract_shin_min: 0.0,
            advance_speed: 3.5,
            advance_accel: 80.0,
            descend_speed: 2.5,
            descend_accel: 80.0,
            touchdown_depth: 0.005,
            body_mass: 12.0,
            gains: JointGains::default(),
        }
    }
}

impl GaitConfig {
    pub fn validate(&self) -> Result<()> {
        let path = |f: &str| format!("gait.{f}");
        if (self.duty_factor - 0.5).abs() > 1e-12 {
            return Err(Error::config(
                path("duty_factor"),
                format!("trot duty factor is fixed at 0.5, got {}", self.duty_factor),
            ));
        }
        if !(self.period >= MIN_PERIOD) || !self.period.is_finite() {
            return Err(Error::config(
                path("period"),
                format!("period must be >= {MIN_PERIOD} s, got {}", self.period),
            ));
        }
        let swing = self.swing_duration();
        for (name, v) in [
            ("step_height", self.step_height),
            ("body_height", self.body_height),
            ("t_down", self.t_down),
            ("t_descend", self.t_descend),
            ("retract_hip_velocity", self.retract_hip_velocity),
            ("retract_hip_gain", self.retract_hip_gain),
            ("advance_speed", self.advance_speed),
            ("advance_accel", self.advance_accel),
            ("descend_speed", self.descend_speed),
            ("descend_accel", self.descend_accel),
            ("body_mass", self.body_mass),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(path(name), format!("must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("body_speed", self.body_speed),
            ("retract_min", self.retract_min),
            ("retract_knee_torque", self.retract_knee_torque),
            ("touchdown_depth", self.touchdown_depth),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(path(name), format!("must be >= 0, got {v}")));
            }
        }
        if self.t_down >= swing || self.t_descend > self.t_down {
            return Err(Error::config(
                path("t_down"),
                format!("need t_descend <= t_down < swing duration {swing}"),
            ));
        }
        if !(self.retract_shin_min.abs() < FRAC_PI_2) {
            return Err(Error::config(
                path("retract_shin_min"),
                format!("must lie in (-pi/2, pi/2), got {}", self.retract_shin_min),
            ));
        }
        if self.body_height > 0.40 || self.step_height >= self.body_height {
            return Err(Error::config(
                path("body_height"),
                "body height must be <= 0.40 m and above the step height",
            ));
        }
        for (name, g) in [("kp", self.gains.kp), ("kd", self.gains.kd)] {
            if g.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::config(path(&format!("gains.{name}")), "gains must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn swing_duration(&self) -> f64 {
        self.period * (1.0 - self.duty_factor)
    }

    pub fn stance_duration(&self) -> f64 {
        self.period * self.duty_factor
    }

    /// Forward foot travel per swing relative to the ground.
    pub fn stride(&self, speed: f64) -> f64 {
        speed * self.period * self.duty_factor
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Default,
    HighStep,
    KneeForward,
    AlwaysRetract,
    Reactive,
}

pub const STRATEGIES: [Strategy; 5] = [
    Strategy::Default,
    Strategy::HighStep,
    Strategy::KneeForward,
    Strategy::AlwaysRetract,
    Strategy::Reactive,
];

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Default => "default",
            Strategy::HighStep => "high_step",
            Strategy::KneeForward => "knee_forward",
            Strategy::AlwaysRetract => "always_retract",
            Strategy::Reactive => "reactive",
        }
    }

    pub fn knee_direction(self) -> KneeDirection {
        match self {
            Strategy::KneeForward => KneeDirection::Forward,
            _ => KneeDirection::Back,
        }
    }

    /// Whether stuck verdicts drive the reaction state machine.
    pub fn reacts(self) -> bool {
        matches!(self, Strategy::AlwaysRetract | Strategy::Reactive)
    }

    /// Gait with the strategy's overrides applied.
    pub fn adjust(self, cfg: &GaitConfig) -> GaitConfig {
        let mut cfg = cfg.clone();
        if self == Strategy::HighStep {
            cfg.step_height = 0.20;
        }
        cfg
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        baseline_strategy(s)
    }
}

pub fn baseline_strategy(name: &str) -> Result<Strategy> {
    STRATEGIES.into_iter().find(|s| s.name() == name).ok_or_else(|| {
        let names: Vec<_> = STRATEGIES.iter().map(|s| s.name()).collect();
        Error::InvalidArgument(format!(
            "unknown strategy `{name}`; expected one of {}",
            names.join(", ")
        ))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Stance,
    Swing,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseInfo {
    pub phase: Phase,
    /// Progress through the current phase, in `[0, 1)`.
    pub fraction: f64,
    /// Time left in the current phase (s).
    pub remaining: f64,
}

/// Trot phase of `leg` at time `t`.
pub fn gait_phase(t: f64, cfg: &GaitConfig, leg: usize) -> Result<PhaseInfo> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("gait time {t} must be >= 0")));
    }
    if leg >= LEG_COUNT {
        return Err(Error::InvalidArgument(format!("leg index {leg} out of range")));
    }
    let half = 0.5 * cfg.period;
    let offset = if leg == 1 || leg == 2 { half } else { 0.0 };
    let cycle = (t + offset).rem_euclid(cfg.period);
    let (phase, within) = if cycle < half {
        (Phase::Stance, cycle)
    } else {
        (Phase::Swing, cycle - half)
    };
    let fraction = (within / half).clamp(0.0, 1.0 - f64::EPSILON);
    Ok(PhaseInfo {
        phase,
        fraction,
        remaining: half - within,
    })
}

fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

fn min_jerk_rate(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    30.0 * s * s * (1.0 - s) * (1.0 - s)
}

/// Foot target on the nominal swing arc from `liftoff` to `touchdown`.
///
/// Horizontal motion follows a minimum-jerk profile; the height above the
/// chord is `16 h s^2 (1 - s)^2`, which peaks at `h` halfway through.
pub fn nominal_swing_target(fraction: f64, step_height: f64, liftoff: &Vec3, touchdown: &Vec3) -> Vec3 {
    let s = fraction.clamp(0.0, 1.0);
    let chord = liftoff + (touchdown - liftoff) * s;
    let mut p = liftoff + (touchdown - liftoff) * min_jerk(s);
    p.z = chord.z + 16.0 * step_height * s * s * (1.0 - s) * (1.0 - s);
    p
}

/// Rate of [`nominal_swing_target`] with respect to the swing fraction.
pub fn nominal_swing_rate(fraction: f64, step_height: f64, liftoff: &Vec3, touchdown: &Vec3) -> Vec3 {
    let s = fraction.clamp(0.0, 1.0);
    let mut v = (touchdown - liftoff) * min_jerk_rate(s);
    v.z = (touchdown.z - liftoff.z) + 32.0 * step_height * s * (1.0 - s) * (1.0 - 2.0 * s);
    v
}

/// What one joint is asked to do.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JointCommand {
    Torque(f64),
    Velocity {
        target: f64,
        gain: f64,
        feedforward: f64,
    },
    Position {
        target: f64,
        velocity: f64,
        kp: f64,
        kd: f64,
        feedforward: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegCommand {
    pub joints: [JointCommand; JOINTS],
}

impl LegCommand {
    /// Motor torque for the measured state, clipped to the torque limits.
    pub fn torque(&self, model: &LegModel, state: &JointState) -> Vec3 {
        Vec3::from_fn(|i, _| {
            let tau = match self.joints[i] {
                JointCommand::Torque(t) => t,
                JointCommand::Velocity {
                    target,
                    gain,
                    feedforward,
                } => gain * (target - state.qdot[i]) + feedforward,
                JointCommand::Position {
                    target,
                    velocity,
                    kp,
                    kd,
                    feedforward,
                } => kp * (target - state.q[i]) + kd * (velocity - state.qdot[i]) + feedforward,
            };
            let lim = model.torque_limit[i];
            tau.clamp(-lim, lim)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReactionMode {
    Nominal,
    Retract,
    ExtendAdvance,
    ExtendDescend,
}

impl ReactionMode {
    pub fn code(self) -> u8 {
        match self {
            ReactionMode::Nominal => 0,
            ReactionMode::Retract => 1,
            ReactionMode::ExtendAdvance => 2,
            ReactionMode::ExtendDescend => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReactionState {
    pub mode: ReactionMode,
    pub stuck: bool,
    pub retract_elapsed: f64,
    /// Stuck verdict latched at `t_down` (or any later stuck verdict in the
    /// same swing), used by the next swing.
    pub carryover_stuck: bool,
    /// Whether the carryover was latched during the current swing.
    pub latched: bool,
}

impl Default for ReactionState {
    fn default() -> Self {
        Self {
            mode: ReactionMode::Nominal,
            stuck: false,
            retract_elapsed: 0.0,
            carryover_stuck: false,
            latched: false,
        }
    }
}

impl ReactionState {
    /// State at the first tick of a swing.
    pub fn begin_swing(&self, strategy: Strategy) -> Self {
        let retract = match strategy {
            Strategy::AlwaysRetract => true,
            Strategy::Reactive => self.carryover_stuck,
            _ => false,
        };
        Self {
            mode: if retract {
                ReactionMode::Retract
            } else {
                ReactionMode::Nominal
            },
            stuck: self.carryover_stuck,
            retract_elapsed: 0.0,
            carryover_stuck: false,
            latched: false,
        }
    }
}

/// Advances the reaction state machine by one tick of swing.
///
/// `foot_error` is the horizontal distance from the foot to its foothold.
pub fn reaction_update(
    rs: &ReactionState,
    verdict: &StuckVerdict,
    phase: &PhaseInfo,
    foot_error: f64,
    cfg: &GaitConfig,
    dt: f64,
) -> Result<ReactionState> {
    if phase.phase != Phase::Swing {
        return Err(Error::InvalidState("reaction update called during stance".into()));
    }
    let mut next = *rs;
    next.stuck = verdict.stuck;
    let remaining = phase.remaining;
    // extension must be under way one tick before the deadline passes
    let past_deadline = remaining - dt < cfg.t_down;
    let can_retract = !past_deadline;
    // the verdict at the deadline decides the next swing; a leg that is
    // found obstructed later in the same swing is carried over as well
    if past_deadline {
        next.carryover_stuck = if rs.latched {
            rs.carryover_stuck || verdict.stuck
        } else {
            verdict.stuck
        };
        next.latched = true;
    }
    match rs.mode {
        ReactionMode::Nominal => {
            if verdict.stuck && can_retract {
                next.mode = ReactionMode::Retract;
                next.retract_elapsed = 0.0;
            }
        }
        ReactionMode::Retract => {
            next.retract_elapsed = rs.retract_elapsed + dt;
            let served = next.retract_elapsed >= cfg.retract_min - 1e-9;
            if served && (!verdict.stuck || past_deadline) {
                next.mode = ReactionMode::ExtendAdvance;
            }
        }
        ReactionMode::ExtendAdvance | ReactionMode::ExtendDescend if verdict.stuck && can_retract => {
            next.mode = ReactionMode::Retract;
            next.retract_elapsed = 0.0;
        }
        ReactionMode::ExtendAdvance => {
            if foot_error <= 0.01 || remaining - dt < cfg.t_descend {
                next.mode = ReactionMode::ExtendDescend;
            }
        }
        ReactionMode::ExtendDescend => {}
    }
    Ok(next)
}

/// Minimum-time follower with bounded speed and acceleration.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Follower {
    pos: f64,
    vel: f64,
}

impl Follower {
    fn step(&mut self, target: f64, vmax: f64, amax: f64, dt: f64) {
        let err = target - self.pos;
        let wanted = err.signum() * vmax.min((2.0 * amax * err.abs()).sqrt());
        let dv = (wanted - self.vel).clamp(-amax * dt, amax * dt);
        self.vel += dv;
        let step = self.vel * dt;
        if step.abs() >= err.abs() && err.abs() < vmax * dt {
            self.pos = target;
            self.vel = 0.0;
        } else {
            self.pos += step;
        }
    }
}

/// Torso pose and motion as seen by the leg controllers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyView {
    pub x: f64,
    pub speed: f64,
    pub height: f64,
}

impl BodyView {
    pub fn to_torso(&self, world: &Vec3) -> Vec3 {
        Vec3::new(world.x - self.x, world.y, world.z - self.height)
    }

    pub fn to_world(&self, torso: &Vec3) -> Vec3 {
        Vec3::new(torso.x + self.x, torso.y, torso.z + self.height)
    }
}

/// Per-leg controller: swing/stance tracking plus the reaction state.
#[derive(Clone, Debug)]
pub struct LegController {
    pub leg: usize,
    pub strategy: Strategy,
    pub reaction: ReactionState,
    /// Foot position at liftoff (world).
    pub liftoff: Vec3,
    /// Planned touchdown point during swing; ground foothold during stance (world).
    pub foothold: Vec3,
    /// The last IK target fell outside the workspace.
    pub clamped: bool,
    extend_x: Follower,
    extend_z: Follower,
    extend_mode: Option<ReactionMode>,
}

/// Per-tick inputs to [`LegController::command`].
#[derive(Clone, Copy, Debug)]
pub struct ControlInput<'a> {
    pub model: &'a LegModel,
    pub state: &'a JointState,
    pub phase: PhaseInfo,
    pub body: BodyView,
    pub verdict: StuckVerdict,
    pub dt: f64,
}

impl LegController {
    pub fn new(leg: usize, strategy: Strategy, foot_world: Vec3) -> Self {
        Self {
            leg,
            strategy,
            reaction: ReactionState::default(),
            liftoff: foot_world,
            foothold: Vec3::new(foot_world.x, foot_world.y, 0.0),
            clamped: false,
            extend_x: Follower { pos: 0.0, vel: 0.0 },
            extend_z: Follower { pos: 0.0, vel: 0.0 },
            extend_mode: None,
        }
    }

    pub fn mode(&self) -> ReactionMode {
        self.reaction.mode
    }

    pub fn begin_swing(&mut self, foot_world: Vec3) {
        self.liftoff = foot_world;
        self.reaction = self.reaction.begin_swing(self.strategy);
        self.extend_mode = None;
    }

    pub fn begin_stance(&mut self, foot_world: Vec3) {
        self.foothold = Vec3::new(foot_world.x, foot_world.y, 0.0);
        self.reaction.mode = ReactionMode::Nominal;
        self.reaction.retract_elapsed = 0.0;
        self.extend_mode = None;
    }

    /// Planned touchdown point for a swing with `remaining` time left.
    pub fn plan_foothold(&self, model: &LegModel, cfg: &GaitConfig, body: &BodyView, remaining: f64) -> Vec3 {
        let hip_x = body.x + model.hip_position.x;
        let x = hip_x + body.speed * remaining + 0.5 * cfg.stride(body.speed);
        Vec3::new(x, self.liftoff.y, 0.0)
    }

    /// Command for this tick. Updates the reaction state during swing.
    pub fn command(&mut self, cfg: &GaitConfig, input: &ControlInput) -> Result<LegCommand> {
        let knee = self.strategy.knee_direction();
        let model = input.model;
        let body = input.body;
        match input.phase.phase {
            Phase::Stance => {
                let target = body.to_torso(&self.foothold);
                let velocity = Vec3::new(-body.speed, 0.0, 0.0);
                let weight = Vec3::new(0.0, 0.0, 0.5 * cfg.body_mass * model.gravity);
                let q = input.state.q;
                let support = -(foot_jacobian(model, &q).transpose() * weight);
                Ok(self.track(cfg, input, &target, &velocity, knee, &support))
            }
            Phase::Swing => {
                let swing = cfg.swing_duration();
                self.foothold = self.plan_foothold(model, cfg, &body, input.phase.remaining);
                let foot = body.to_world(&forward_kinematics(model, &input.state.q).foot());
                if self.strategy.reacts() {
                    let error = (foot.x - self.foothold.x).abs();
                    self.reaction =
                        reaction_update(&self.reaction, &input.verdict, &input.phase, error, cfg, input.dt)?;
                }
                let mode = self.reaction.mode;
                if self.extend_mode != Some(mode) {
                    if mode == ReactionMode::ExtendAdvance
                        || (mode == ReactionMode::ExtendDescend && self.extend_mode.is_none())
                    {
                        self.extend_x = Follower { pos: foot.x, vel: 0.0 };
                        self.extend_z = Follower { pos: foot.z, vel: 0.0 };
                    }
                    self.extend_mode = Some(mode);
                }
                match mode {
                    ReactionMode::Nominal => {
                        let s = 1.0 - input.phase.remaining / swing;
                        let world = nominal_swing_target(s, cfg.step_height, &self.liftoff, &self.foothold);
                        let rate = nominal_swing_rate(s, cfg.step_height, &self.liftoff, &self.foothold) / swing;
                        let target = body.to_torso(&world);
                        let velocity = rate - Vec3::new(body.speed, 0.0, 0.0);
                        Ok(self.track(cfg, input, &target, &velocity, knee, &Vec3::zeros()))
                    }
                    ReactionMode::Retract => Ok(self.retract(cfg, input)),
                    ReactionMode::ExtendAdvance => {
                        let height = self.extend_z.pos;
                        self.extend_x
                            .step(self.foothold.x, cfg.advance_speed, cfg.advance_accel, input.dt);
                        let world = Vec3::new(self.extend_x.pos, self.foothold.y, height);
                        let velocity = Vec3::new(self.extend_x.vel - body.speed, 0.0, 0.0);
                        let target = body.to_torso(&world);
                        Ok(self.track(cfg, input, &target, &velocity, knee, &Vec3::zeros()))
                    }
                    ReactionMode::ExtendDescend => {
                        self.extend_x
                            .step(self.foothold.x, cfg.advance_speed, cfg.advance_accel, input.dt);
                        self.extend_z
                            .step(-cfg.touchdown_depth, cfg.descend_speed, cfg.descend_accel, input.dt);
                        let world = Vec3::new(self.extend_x.pos, self.foothold.y, self.extend_z.pos);
                        let velocity = Vec3::new(self.extend_x.vel - body.speed, 0.0, self.extend_z.vel);
                        let target = body.to_torso(&world);
                        Ok(self.track(cfg, input, &target, &velocity, knee, &Vec3::zeros()))
                    }
                }
            }
        }
    }

    /// Joint PD on the inverse kinematics of a torso-frame foot target, plus gravity compensation.
    fn track(
        &mut self,
        cfg: &GaitConfig,
        input: &ControlInput,
        target: &Vec3,
        velocity: &Vec3,
        knee: KneeDirection,
        feedforward: &Vec3,
    ) -> LegCommand {
        let model = input.model;
        let ik = inverse_kinematics(model, target, knee);
        let ahead = inverse_kinematics(model, &(target + velocity * input.dt), knee);
        self.clamped = ik.clamped;
        let q_des = model.clamp_to_limits(ik.q);
        let qd_des = (ahead.q - ik.q) / input.dt;
        let ff = gravity_vector(model, &input.state.q) + feedforward;
        LegCommand {
            joints: std::array::from_fn(|i| JointCommand::Position {
                target: q_des[i],
                velocity: qd_des[i],
                kp: cfg.gains.kp[i],
                kd: cfg.gains.kd[i],
                feedforward: ff[i],
            }),
        }
    }

    fn retract(&self, cfg: &GaitConfig, input: &ControlInput) -> LegCommand {
        let g = gravity_vector(input.model, &input.state.q);
        let gains = &cfg.gains;
        let hip = if input.state.q[HIP] < cfg.retract_hip_stop {
            JointCommand::Velocity {
                target: cfg.retract_hip_velocity,
                gain: cfg.retract_hip_gain,
                feedforward: g[HIP],
            }
        } else {
            JointCommand::Position {
                target: cfg.retract_hip_stop,
                velocity: 0.0,
                kp: gains.kp[HIP],
                kd: gains.kd[HIP],
                feedforward: g[HIP],
            }
        };
        let mut joints = [JointCommand::Torque(0.0); JOINTS];
        joints[ABAD] = JointCommand::Position {
            target: 0.0,
            velocity: 0.0,
            kp: gains.kp[ABAD],
            kd: gains.kd[ABAD],
            feedforward: g[ABAD],
        };
        joints[HIP] = hip;
        // positive knee angles swing the shin backward, so forward pressure is negative
        let q_hip = input.state.q[HIP];
        joints[KNEE] = if q_hip + input.state.q[KNEE] < cfg.retract_shin_min {
            JointCommand::Position {
                target: cfg.retract_shin_min - q_hip,
                velocity: 0.0,
                kp: gains.kp[KNEE],
                kd: gains.kd[KNEE],
                feedforward: g[KNEE] - cfg.retract_knee_torque,
            }
        } else {
            JointCommand::Torque(g[KNEE] - cfg.retract_knee_torque)
        };
        LegCommand { joints }
    }
}
