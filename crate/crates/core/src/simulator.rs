//! Fixed-step simulation of four legs on a kinematic torso walking through an obstacle course.
//!
//! The torso stays level at a fixed height and moves forward at the commanded
//! speed, slowed linearly by the total backward obstacle force:
//! `v = v_cmd max(0, 1 - F_back / F_max)`. Each leg is a full three-joint
//! rigid-body chain driven by its controller, loaded by the ground and the
//! obstacles, and watched by a momentum observer.
//!
//! Each tick runs, in order: gait clock and phase transitions, controller
//! commands, contact forces, leg dynamics, observers, torso progress,
//! obstacle updates, and logging.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::contact_world::{
    compute_contacts, update_obstacles, ContactMemory, LegGeometry, ObstacleCourse, StrandState,
};
use crate::error::{Error, Result};
use crate::gait_controller::{
    gait_phase, quadruped_legs, BodyView, ControlInput, GaitConfig, LegController, Phase, ReactionMode, Strategy,
    LEG_COUNT, LEG_NAMES,
};
use crate::leg_dynamics::{
    external_torque_from_contacts, foot_jacobian, forward_dynamics, forward_kinematics, inverse_kinematics,
    mass_matrix, ContactForce, JointState, LegModel, Vec3, HIP, JOINTS, KNEE,
};
use crate::momentum_observer::{
    classify_stuck, observer_reset, observer_step, ObserverConfig, ObserverState, StuckVerdict,
};

/// Torso state. Orientation is always level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyState {
    pub x: f64,
    pub commanded_speed: f64,
    pub speed: f64,
    pub height: f64,
    /// Largest total backward force the legs can push through (N).
    pub f_max: f64,
}

/// Advances the torso given the total backward obstacle force.
pub fn body_progress(body: &BodyState, f_back: f64, dt: f64) -> BodyState {
    let scale = (1.0 - f_back.max(0.0) / body.f_max).max(0.0);
    let speed = body.commanded_speed * scale;
    BodyState {
        x: body.x + speed * dt,
        speed,
        ..*body
    }
}

/// Penalty model of flat ground at `z = 0`: normal force only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundModel {
    pub stiffness: f64,
    pub damping: f64,
}

impl Default for GroundModel {
    fn default() -> Self {
        Self {
            stiffness: 20_000.0,
            damping: 150.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration_limit: f64,
    pub seed: u64,
    /// Uniform random shift applied to each obstacle along the walkway (m).
    pub course_jitter: f64,
    pub strategy: Strategy,
    pub gait: GaitConfig,
    pub observer: ObserverConfig,
    pub observer_reset: bool,
    pub threshold: f64,
    pub course: ObstacleCourse,
    pub legs: [LegModel; LEG_COUNT],
    pub ground: GroundModel,
    /// Ground friction coefficient bounding the push-through force.
    pub friction_coefficient: f64,
    /// Horizontal stance foot slip that counts as a fall (m).
    pub fall_bound: f64,
    /// Periods spent below 1% of the commanded speed before the run is declared stuck.
    pub stuck_periods: f64,
    pub record_log: bool,
}

impl SimConfig {
    pub fn new(strategy: Strategy, course: ObstacleCourse) -> Self {
        Self {
            dt: 0.001,
            duration_limit: 30.0,
            seed: 0,
            course_jitter: 0.0,
            strategy,
            gait: GaitConfig::default(),
            observer: ObserverConfig::default(),
            observer_reset: true,
            threshold: crate::momentum_observer::DEFAULT_THRESHOLD,
            course,
            legs: quadruped_legs(),
            ground: GroundModel::default(),
            friction_coefficient: 0.6,
            fall_bound: 0.12,
            stuck_periods: 5.0,
            record_log: true,
        }
    }

    pub fn f_max(&self) -> f64 {
        self.friction_coefficient * self.gait.body_mass * self.legs[0].gravity
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.005) {
            return Err(Error::config("dt", "tick must lie in (0, 0.005] s"));
        }
        if !(self.duration_limit > 0.0 && self.duration_limit.is_finite()) {
            return Err(Error::config("duration_limit", "must be > 0"));
        }
        if !(self.friction_coefficient > 0.0) {
            return Err(Error::config("robot.friction_coefficient", "must be > 0"));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::config("observer.threshold", "must be > 0"));
        }
        if !(self.fall_bound > 0.0) || !(self.stuck_periods > 0.0) {
            return Err(Error::config("limits", "fall bound and stuck periods must be > 0"));
        }
        if !(self.course_jitter >= 0.0) {
            return Err(Error::config("course.jitter", "must be >= 0"));
        }
        for (i, g) in self.observer.gain.iter().enumerate() {
            if !(*g > 0.0) {
                return Err(Error::config(format!("observer.gain[{i}]"), "must be > 0"));
            }
        }
        if !(self.observer.reset_window >= 0.0) {
            return Err(Error::config("observer.reset_window", "must be >= 0"));
        }
        for (i, leg) in self.legs.iter().enumerate() {
            leg.validate()
                .map_err(|e| Error::config(format!("robot.legs[{i}]"), e.to_string()))?;
        }
        self.gait.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    Stuck,
    Fall,
    Timeout,
    Fault,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Stuck => "stuck",
            Outcome::Fall => "fall",
            Outcome::Timeout => "timeout",
            Outcome::Fault => "fault",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSummary {
    pub outcome: Outcome,
    pub success: bool,
    pub obstacles_cleared: usize,
    pub obstacle_count: usize,
    /// Mean actuator power while free of obstacles / in obstacle contact (W).
    pub p_f: f64,
    pub p_o: f64,
    /// Mean torso speed while free / in contact (m/s).
    pub v_f: f64,
    pub v_o: f64,
    pub energy_total: f64,
    pub terminal_speed: f64,
    pub distance: f64,
    pub duration: f64,
    pub retract_entries: usize,
    pub threshold_crossings: usize,
    pub first_contact_time: Option<f64>,
    pub first_trigger_time: Option<f64>,
    pub obstacles_broken: usize,
    pub fault: Option<String>,
}

impl MetricsSummary {
    /// Delay from the first obstacle contact to the first stuck verdict.
    pub fn trigger_latency(&self) -> Option<f64> {
        match (self.first_contact_time, self.first_trigger_time) {
            (Some(c), Some(t)) if t >= c => Some(t - c),
            _ => None,
        }
    }

    /// Process exit status for this outcome.
    pub fn exit_code(&self) -> i32 {
        match self.outcome {
            Outcome::Completed => 0,
            Outcome::Stuck | Outcome::Fall | Outcome::Timeout => 2,
            Outcome::Fault => 1,
        }
    }

    /// `key = value` lines.
    pub fn to_record(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("outcome", format!("\"{}\"", self.outcome.name()));
        kv("success", self.success.to_string());
        kv("obstacles_cleared", self.obstacles_cleared.to_string());
        kv("obstacle_count", self.obstacle_count.to_string());
        kv("p_f", self.p_f.to_string());
        kv("p_o", self.p_o.to_string());
        kv("v_f", self.v_f.to_string());
        kv("v_o", self.v_o.to_string());
        kv("energy_total", self.energy_total.to_string());
        kv("terminal_speed", self.terminal_speed.to_string());
        kv("distance", self.distance.to_string());
        kv("duration", self.duration.to_string());
        kv("retract_entries", self.retract_entries.to_string());
        kv("threshold_crossings", self.threshold_crossings.to_string());
        kv("first_contact_time", opt(self.first_contact_time));
        kv("first_trigger_time", opt(self.first_trigger_time));
        kv("obstacles_broken", self.obstacles_broken.to_string());
        if let Some(f) = &self.fault {
            kv("fault", format!("{f:?}"));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegRow {
    pub phase: Phase,
    pub mode: ReactionMode,
    pub q: Vec3,
    pub qdot: Vec3,
    pub tau: Vec3,
    pub r: Vec3,
    /// Residual of a shadow observer that is never reset.
    pub r_noreset: Vec3,
    /// Total obstacle force on the leg (N).
    pub obstacle_force: Vec3,
    pub foot: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub time: f64,
    pub body_x: f64,
    pub body_speed: f64,
    pub f_back: f64,
    /// Instantaneous actuator power, `sum |tau q'|` over all joints (W).
    pub power: f64,
    pub legs: [LegRow; LEG_COUNT],
}

pub const LEG_COLUMNS: [&str; 23] = [
    "phase", "mode", "q_abad", "q_hip", "q_knee", "qd_abad", "qd_hip", "qd_knee", "tau_abad", "tau_hip", "tau_knee",
    "r_abad", "r_hip", "r_knee", "rnr_abad", "rnr_hip", "rnr_knee", "fx", "fy", "fz", "foot_x", "foot_y", "foot_z",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepLog {
    pub dt: f64,
    pub rows: Vec<LogRow>,
}

impl StepLog {
    /// CSV header; the column order is part of the file format.
    pub fn header() -> Vec<String> {
        let mut cols: Vec<String> = ["time", "body_x", "body_speed", "f_back", "power"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for leg in LEG_NAMES {
            cols.extend(LEG_COLUMNS.iter().map(|c| format!("{leg}_{c}")));
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::header().join(","))?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for v in [row.time, row.body_x, row.body_speed, row.f_back, row.power] {
                push_num(&mut line, v);
            }
            for leg in &row.legs {
                push_num(&mut line, if leg.phase == Phase::Swing { 1.0 } else { 0.0 });
                push_num(&mut line, f64::from(leg.mode.code()));
                for v in [
                    &leg.q,
                    &leg.qdot,
                    &leg.tau,
                    &leg.r,
                    &leg.r_noreset,
                    &leg.obstacle_force,
                    &leg.foot,
                ] {
                    for x in v.iter() {
                        push_num(&mut line, *x);
                    }
                }
            }
            line.pop();
            writeln!(out, "{line}")?;
        }
        out.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

fn push_num(line: &mut String, v: f64) {
    use std::fmt::Write as _;
    let _ = write!(line, "{v},");
}

/// Running sums behind [`MetricsSummary`].
#[derive(Clone, Debug, Default)]
struct Accumulator {
    free_ticks: usize,
    contact_ticks: usize,
    free_power: f64,
    contact_power: f64,
    free_speed: f64,
    contact_speed: f64,
    energy: f64,
    retract_entries: usize,
    crossings: usize,
    first_contact: Option<f64>,
    first_trigger: Option<f64>,
}

/// Per-leg simulation state.
#[derive(Clone, Debug)]
struct LegSim {
    state: JointState,
    phase: Phase,
    controller: LegController,
    observer: ObserverState,
    shadow: ObserverState,
    verdict: StuckVerdict,
    stance_time: f64,
}

/// One simulation run.
#[derive(Clone, Debug)]
pub struct Simulation {
    cfg: SimConfig,
    gait: GaitConfig,
    course: ObstacleCourse,
    memory: ContactMemory,
    body: BodyState,
    legs: Vec<LegSim>,
    tick: u64,
    slow_time: f64,
    acc: Accumulator,
    log: StepLog,
    outcome: Option<Outcome>,
    fault: Option<String>,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let gait = cfg.strategy.adjust(&cfg.gait);
        let mut course = cfg.course.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        course.jitter(&mut rng, cfg.course_jitter);
        let memory = ContactMemory::new(&course);
        let body = BodyState {
            x: 0.0,
            commanded_speed: gait.body_speed,
            speed: gait.body_speed,
            height: gait.body_height,
            f_max: cfg.f_max(),
        };
        let view = BodyView {
            x: body.x,
            speed: body.speed,
            height: body.height,
        };
        let quarter = 0.5 * gait.stride(gait.body_speed);
        let knee = cfg.strategy.knee_direction();
        let mut legs = Vec::with_capacity(LEG_COUNT);
        for (i, model) in cfg.legs.iter().enumerate() {
            let phase = gait_phase(0.0, &gait, i)?.phase;
            let lateral = model.hip_position + model.link_vector(0);
            let offset = if phase == Phase::Stance { quarter } else { -quarter };
            let foot_world = Vec3::new(body.x + lateral.x + offset, lateral.y, 0.0);
            let q = inverse_kinematics(model, &view.to_torso(&foot_world), knee).q;
            let state = JointState::at_rest(q);
            let mut controller = LegController::new(i, cfg.strategy, foot_world);
            let latched = ObserverState::latched(&cfg.observer, model, &state);
            let observer = match phase {
                Phase::Swing => {
                    controller.begin_swing(foot_world);
                    if cfg.observer_reset {
                        observer_reset(&cfg.observer, model, &state)
                    } else {
                        latched
                    }
                }
                Phase::Stance => {
                    controller.begin_stance(foot_world);
                    latched
                }
            };
            legs.push(LegSim {
                state,
                phase,
                controller,
                observer,
                shadow: latched,
                verdict: StuckVerdict::free(cfg.threshold),
                stance_time: 0.0,
            });
        }
        let acc = Accumulator {
            retract_entries: legs
                .iter()
                .filter(|l| l.controller.mode() == ReactionMode::Retract)
                .count(),
            ..Accumulator::default()
        };
        Ok(Self {
            log: StepLog {
                dt: cfg.dt,
                rows: Vec::new(),
            },
            cfg,
            gait,
            course,
            memory,
            body,
            legs,
            tick: 0,
            slow_time: 0.0,
            acc,
            outcome: None,
            fault: None,
        })
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.dt
    }

    pub fn body(&self) -> &BodyState {
        &self.body
    }

    pub fn course(&self) -> &ObstacleCourse {
        &self.course
    }

    pub fn gait(&self) -> &GaitConfig {
        &self.gait
    }

    pub fn contact_memory(&self) -> &ContactMemory {
        &self.memory
    }

    /// World-frame hip, knee and foot of `leg`.
    pub fn leg_geometry(&self, leg: usize) -> LegGeometry {
        self.geometry(leg)
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn joint_state(&self, leg: usize) -> JointState {
        self.legs[leg].state
    }

    fn view(&self) -> BodyView {
        BodyView {
            x: self.body.x,
            speed: self.body.speed,
            height: self.body.height,
        }
    }

    fn geometry(&self, leg: usize) -> LegGeometry {
        let kin = forward_kinematics(&self.cfg.legs[leg], &self.legs[leg].state.q);
        let view = self.view();
        LegGeometry {
            hip: view.to_world(&kin.origins[HIP]),
            knee: view.to_world(&kin.origins[KNEE]),
            foot: view.to_world(&kin.foot()),
        }
    }

    fn ground_contact(&self, leg: usize) -> Option<ContactForce> {
        let model = &self.cfg.legs[leg];
        let s = &self.legs[leg].state;
        let foot = self.view().to_world(&forward_kinematics(model, &s.q).foot());
        if foot.z >= 0.0 {
            return None;
        }
        let vz = (foot_jacobian(model, &s.q) * s.qdot).z;
        let fz = (-self.cfg.ground.stiffness * foot.z - self.cfg.ground.damping * vz).max(0.0);
        Some(ContactForce {
            link_index: KNEE,
            fraction_along_link: 1.0,
            force: Vec3::new(0.0, 0.0, fz),
        })
    }

    /// Advances one tick. Returns the outcome once the run has ended.
    pub fn step(&mut self) -> Option<Outcome> {
        if self.outcome.is_some() {
            return self.outcome;
        }
        if let Err(e) = self.try_step() {
            self.fault = Some(e.to_string());
            self.outcome = Some(Outcome::Fault);
        }
        self.outcome
    }

    fn try_step(&mut self) -> Result<()> {
        let dt = self.cfg.dt;
        let t = self.time();
        let view = self.view();

        // gait clock
        for i in 0..LEG_COUNT {
            let phase = gait_phase(t, &self.gait, i)?;
            let leg = &mut self.legs[i];
            if phase.phase != leg.phase {
                let model = &self.cfg.legs[i];
                let foot = view.to_world(&forward_kinematics(model, &leg.state.q).foot());
                match phase.phase {
                    Phase::Swing => {
                        if self.cfg.observer_reset {
                            leg.observer = observer_reset(&self.cfg.observer, model, &leg.state);
                        }
                        leg.controller.begin_swing(foot);
                        if leg.controller.mode() == ReactionMode::Retract {
                            self.acc.retract_entries += 1;
                        }
                    }
                    Phase::Stance => {
                        leg.controller.begin_stance(foot);
                        leg.stance_time = 0.0;
                    }
                }
                leg.phase = phase.phase;
            }
        }

        // controllers
        let mut taus = [Vec3::zeros(); LEG_COUNT];
        for (i, tau) in taus.iter_mut().enumerate() {
            let phase = gait_phase(t, &self.gait, i)?;
            let leg = &mut self.legs[i];
            let verdict = if phase.phase == Phase::Swing && !leg.observer.in_reset_window() {
                classify_stuck(&leg.observer, self.cfg.threshold)
            } else {
                StuckVerdict::free(self.cfg.threshold)
            };
            if verdict.stuck && !leg.verdict.stuck {
                self.acc.crossings += 1;
                self.acc.first_trigger.get_or_insert(t);
            }
            leg.verdict = verdict;
            let before = leg.controller.mode();
            let input = ControlInput {
                model: &self.cfg.legs[i],
                state: &leg.state,
                phase,
                body: view,
                verdict,
                dt,
            };
            let cmd = leg.controller.command(&self.gait, &input)?;
            if leg.controller.mode() == ReactionMode::Retract && before != ReactionMode::Retract {
                self.acc.retract_entries += 1;
            }
            *tau = cmd.torque(&self.cfg.legs[i], &leg.state);
        }

        // contacts
        let geometry: [LegGeometry; LEG_COUNT] = std::array::from_fn(|i| self.geometry(i));
        let report = compute_contacts(&self.course, &mut self.memory, &geometry, dt);
        if self.acc.first_contact.is_none() && (0..LEG_COUNT).any(|l| self.memory.captured_count(l) > 0) {
            self.acc.first_contact = Some(t);
        }
        let grounds: [Option<ContactForce>; LEG_COUNT] = std::array::from_fn(|i| self.ground_contact(i));

        // dynamics, observers
        let mut power = 0.0;
        let mut rows = Vec::with_capacity(if self.cfg.record_log { LEG_COUNT } else { 0 });
        for i in 0..LEG_COUNT {
            let model = &self.cfg.legs[i];
            let leg = &mut self.legs[i];
            let mut contacts = report.contacts(i);
            contacts.extend(grounds[i]);
            let tau_ext = external_torque_from_contacts(model, &leg.state.q, &contacts)?;
            let qdd = forward_dynamics(model, &leg.state, &taus[i], &tau_ext);
            let mut qdot = leg.state.qdot + qdd * dt;
            let unclamped = qdot;
            for j in 0..JOINTS {
                let lim = model.velocity_limit[j];
                qdot[j] = qdot[j].clamp(-lim, lim);
            }
            let mut tau = taus[i];
            if qdot != unclamped {
                // the speed limiter acts through the motor
                tau += mass_matrix(model, &leg.state.q) * (qdot - unclamped) / dt;
            }
            let q = leg.state.q + qdot * dt;
            leg.state = JointState::new(q, qdot);
            if !leg.state.is_finite() {
                return Err(Error::InvalidState(format!(
                    "non-finite joint state on leg {} at t = {t}",
                    LEG_NAMES[i]
                )));
            }
            leg.observer = observer_step(&leg.observer, &self.cfg.observer, model, &leg.state, &tau, dt, i)?;
            leg.shadow = observer_step(&leg.shadow, &self.cfg.observer, model, &leg.state, &tau, dt, i)?;
            let leg_power: f64 = (0..JOINTS).map(|j| (tau[j] * qdot[j]).abs()).sum();
            power += leg_power;
            if self.cfg.record_log {
                let obstacle_force = report.per_leg[i].iter().fold(Vec3::zeros(), |a, c| a + c.contact.force);
                let foot = view.to_world(&forward_kinematics(model, &q).foot());
                rows.push(LegRow {
                    phase: leg.phase,
                    mode: leg.controller.mode(),
                    q,
                    qdot,
                    tau,
                    r: leg.observer.r,
                    r_noreset: leg.shadow.r,
                    obstacle_force,
                    foot,
                });
            }
        }

        // torso
        let f_back = report.backward_force();
        self.body = body_progress(&self.body, f_back, dt);
        let in_contact = report.any_active();
        let acc = &mut self.acc;
        acc.energy += power * dt;
        if in_contact {
            acc.contact_ticks += 1;
            acc.contact_power += power;
            acc.contact_speed += self.body.speed;
        } else {
            acc.free_ticks += 1;
            acc.free_power += power;
            acc.free_speed += self.body.speed;
        }

        update_obstacles(&mut self.course, &report);

        if self.cfg.record_log {
            self.log.rows.push(LogRow {
                time: t,
                body_x: self.body.x,
                body_speed: self.body.speed,
                f_back,
                power,
                legs: rows.try_into().expect("one row per leg"),
            });
        }

        self.tick += 1;
        self.check_termination()?;
        Ok(())
    }

    fn check_termination(&mut self) -> Result<()> {
        let dt = self.cfg.dt;
        if self.body.x >= self.course.course_length {
            self.outcome = Some(Outcome::Completed);
            return Ok(());
        }
        if self.body.speed < 0.01 * self.body.commanded_speed {
            self.slow_time += dt;
        } else {
            self.slow_time = 0.0;
        }
        if self.slow_time > self.cfg.stuck_periods * self.gait.period {
            self.outcome = Some(Outcome::Stuck);
            return Ok(());
        }
        let view = self.view();
        for i in 0..LEG_COUNT {
            if self.legs[i].phase != Phase::Stance {
                continue;
            }
            self.legs[i].stance_time += dt;
            if self.legs[i].stance_time < 0.05 {
                continue;
            }
            let foot = view.to_world(&forward_kinematics(&self.cfg.legs[i], &self.legs[i].state.q).foot());
            if (foot.x - self.legs[i].controller.foothold.x).abs() > self.cfg.fall_bound {
                self.outcome = Some(Outcome::Fall);
                return Ok(());
            }
        }
        if self.time() >= self.cfg.duration_limit - 0.5 * dt {
            self.outcome = Some(Outcome::Timeout);
        }
        Ok(())
    }

    /// Obstacles that every leg has passed.
    pub fn obstacles_cleared(&self) -> usize {
        (0..self.course.obstacles.len())
            .filter(|&o| {
                self.course
                    .strands()
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.obstacle == o)
                    .all(|(si, _)| (0..LEG_COUNT).all(|l| self.memory.state(si, l) == StrandState::Passed))
            })
            .count()
    }

    pub fn summary(&self) -> MetricsSummary {
        let a = &self.acc;
        let mean = |sum: f64, n: usize| if n == 0 { 0.0 } else { sum / n as f64 };
        let outcome = self.outcome.unwrap_or(Outcome::Timeout);
        MetricsSummary {
            outcome,
            success: outcome == Outcome::Completed,
            obstacles_cleared: self.obstacles_cleared(),
            obstacle_count: self.course.obstacles.len(),
            p_f: mean(a.free_power, a.free_ticks),
            p_o: mean(a.contact_power, a.contact_ticks),
            v_f: mean(a.free_speed, a.free_ticks),
            v_o: mean(a.contact_speed, a.contact_ticks),
            energy_total: a.energy,
            terminal_speed: self.body.speed,
            distance: self.body.x,
            duration: self.time(),
            retract_entries: a.retract_entries,
            threshold_crossings: a.crossings,
            first_contact_time: a.first_contact,
            first_trigger_time: a.first_trigger,
            obstacles_broken: self.course.obstacles.iter().filter(|o| o.is_broken()).count(),
            fault: self.fault.clone(),
        }
    }

    pub fn log(&self) -> &StepLog {
        &self.log
    }

    pub fn into_log(self) -> StepLog {
        self.log
    }
}

/// Runs a scenario to completion.
pub fn run_scenario(cfg: &SimConfig) -> Result<(StepLog, MetricsSummary)> {
    let mut sim = Simulation::new(cfg.clone())?;
    while sim.step().is_none() {}
    let summary = sim.summary();
    Ok((sim.into_log(), summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn body() -> BodyState {
        BodyState {
            x: 0.0,
            commanded_speed: 0.5,
            speed: 0.5,
            height: 0.27,
            f_max: 70.0,
        }
    }

    #[test]
    fn body_progress_examples() {
        assert_abs_diff_eq!(body_progress(&body(), 0.0, 0.001).speed, 0.5);
        assert_eq!(body_progress(&body(), 70.0, 0.001).speed, 0.0);
        assert_abs_diff_eq!(body_progress(&body(), 35.0, 0.001).speed, 0.25, epsilon = 1e-15);
        assert_eq!(body_progress(&body(), 500.0, 0.001).speed, 0.0);
    }

    #[test]
    fn header_has_every_leg_column() {
        let h = StepLog::header();
        assert_eq!(h.len(), 5 + LEG_COUNT * LEG_COLUMNS.len());
        assert_eq!(h[5], "fl_phase");
        assert!(h.contains(&"hr_r_knee".to_string()));
    }

    #[test]
    fn exit_codes_follow_outcome() {
        let cfg = SimConfig {
            duration_limit: 0.01,
            ..SimConfig::new(Strategy::Default, ObstacleCourse::empty(3.0))
        };
        let (log, m) = run_scenario(&cfg).unwrap();
        assert_eq!(m.outcome, Outcome::Timeout);
        assert_eq!(m.exit_code(), 2);
        assert_eq!(log.rows.len(), 10);
    }
}
