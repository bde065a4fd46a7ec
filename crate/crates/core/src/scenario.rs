//! Scenario files.
//!
//! A scenario is a TOML document naming a strategy, a course and any
//! overrides. Every table is optional and unknown keys are rejected:
//!
//! ```toml
//! strategy = "reactive"
//! seed = 3
//!
//! [course]
//! preset = "soft"
//! jitter = 0.03
//!
//! [observer]
//! threshold = 2.0
//! reset = true
//! ```
//!
//! Defaults:
//!
//! | key | default |
//! |---|---|
//! | `gait.period` | 0.54 s |
//! | `gait.duty_factor` | 0.5 (fixed) |
//! | `gait.step_height` | 0.07 m |
//! | `gait.body_speed` | 0.5 m/s |
//! | `gait.body_height` | 0.27 m |
//! | `gait.retract_min` | 0.1 s |
//! | `gait.retract_knee_torque` | 2 N m |
//! | `gait.t_down`, `gait.t_descend` | 0.12 s, 0.05 s |
//! | `gait.retract_shin_min` | 0 rad |
//! | `observer.gain` | 25 1/s |
//! | `observer.threshold` | 2 N m |
//! | `observer.reset_window` | 0.03 s |
//! | `robot.friction_coefficient` | 0.6 |
//! | `dt` | 1 ms |
//! | `duration_limit` | 30 s |
//!
//! A preset's own gait adjustments (the net raises the body to 0.35 m and
//! slows to 0.4 m/s) replace `gait.body_height` and `gait.body_speed`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contact_world::{
    slack_for_sag, BreakableWire, ElasticCord, Net, Obstacle, ObstacleCourse, RigidBar, Rope, DEFAULT_CORD_K1,
    DEFAULT_CORD_K2, DEFAULT_CORD_KNEE, DEFAULT_ROPE_SAG, WALKWAY_HALF_WIDTH,
};
use crate::error::{Error, Result};
use crate::gait_controller::{GaitConfig, Strategy};
use crate::leg_dynamics::Vec3;
use crate::momentum_observer::{ObserverConfig, DEFAULT_GAIN, DEFAULT_THRESHOLD, RESET_WINDOW};
use crate::simulator::{GroundModel, SimConfig};

/// Room left past the last obstacle before the run counts as completed (m).
pub const RUN_OUT: f64 = 0.8;
/// Shortest default course (m).
pub const EMPTY_COURSE_LENGTH: f64 = 3.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub strategy: Strategy,
    pub seed: u64,
    pub dt: f64,
    pub duration_limit: f64,
    /// Stance foot slip counted as a fall (m).
    pub fall_bound: f64,
    /// Gait periods below 1% of the commanded speed before a run is stuck.
    pub stuck_periods: f64,
    pub course: CourseSpec,
    pub gait: GaitConfig,
    pub observer: ObserverSpec,
    pub robot: RobotSpec,
    pub output: OutputSpec,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Reactive,
            seed: 0,
            dt: 0.001,
            duration_limit: 30.0,
            fall_bound: 0.12,
            stuck_periods: 5.0,
            course: CourseSpec::default(),
            gait: GaitConfig::default(),
            observer: ObserverSpec::default(),
            robot: RobotSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CourseSpec {
    /// One of the named layouts; its obstacles come before `obstacles`.
    pub preset: Option<String>,
    pub obstacles: Vec<ObstacleSpec>,
    /// Distance to walk (m); by default the preset's length, stretched to leave a run-out past the last obstacle.
    pub length: Option<f64>,
    /// Uniform random shift of each obstacle along the walkway (m), drawn from the seed.
    pub jitter: f64,
}

impl Default for CourseSpec {
    fn default() -> Self {
        Self {
            preset: None,
            obstacles: Vec::new(),
            length: None,
            jitter: 0.0,
        }
    }
}

/// An obstacle spanning the walkway at `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleSpec {
    ElasticCord {
        x: f64,
        height: f64,
        #[serde(default = "cord_k1")]
        k1: f64,
        #[serde(default = "cord_k2")]
        k2: f64,
        #[serde(default = "cord_knee")]
        knee_deflection: f64,
    },
    Rope {
        x: f64,
        height: f64,
        /// Mid-span push at which the rope goes taut (m).
        #[serde(default = "rope_sag")]
        sag: f64,
        #[serde(default = "rope_k")]
        k_taut: f64,
    },
    RigidBar {
        x: f64,
        height: f64,
        #[serde(default = "bar_k")]
        k: f64,
        #[serde(default = "bar_damping")]
        damping: f64,
    },
    BreakableWire {
        x: f64,
        height: f64,
        #[serde(default = "wire_k")]
        k: f64,
        #[serde(default = "wire_break")]
        break_force: f64,
    },
    Net {
        x_start: f64,
        length: f64,
        #[serde(default = "net_height")]
        height: f64,
        #[serde(default = "net_cell")]
        cell_size: f64,
        #[serde(default = "cord_k1")]
        k1: f64,
        #[serde(default = "cord_k2")]
        k2: f64,
        #[serde(default = "cord_knee")]
        knee_deflection: f64,
    },
}

fn cord_k1() -> f64 {
    DEFAULT_CORD_K1
}
fn cord_k2() -> f64 {
    DEFAULT_CORD_K2
}
fn cord_knee() -> f64 {
    DEFAULT_CORD_KNEE
}
fn rope_sag() -> f64 {
    DEFAULT_ROPE_SAG
}
fn rope_k() -> f64 {
    5000.0
}
fn bar_k() -> f64 {
    50_000.0
}
fn bar_damping() -> f64 {
    50.0
}
fn wire_k() -> f64 {
    400.0
}
fn wire_break() -> f64 {
    5.0
}
fn net_height() -> f64 {
    0.076
}
fn net_cell() -> f64 {
    0.14
}

impl ObstacleSpec {
    pub fn to_obstacle(&self) -> Obstacle {
        let ends = |x: f64, h: f64| {
            (
                Vec3::new(x, WALKWAY_HALF_WIDTH, h),
                Vec3::new(x, -WALKWAY_HALF_WIDTH, h),
            )
        };
        match *self {
            ObstacleSpec::ElasticCord {
                x,
                height,
                k1,
                k2,
                knee_deflection,
            } => {
                let (anchor_a, anchor_b) = ends(x, height);
                Obstacle::ElasticCord(ElasticCord {
                    anchor_a,
                    anchor_b,
                    rest_length: 2.0 * WALKWAY_HALF_WIDTH,
                    k1,
                    k2,
                    knee_deflection,
                })
            }
            ObstacleSpec::Rope { x, height, sag, k_taut } => {
                let (anchor_a, anchor_b) = ends(x, height);
                Obstacle::Rope(Rope {
                    anchor_a,
                    anchor_b,
                    slack_length: slack_for_sag(WALKWAY_HALF_WIDTH, sag),
                    k_taut,
                })
            }
            ObstacleSpec::RigidBar { x, height, k, damping } => {
                let (anchor_a, anchor_b) = ends(x, height);
                Obstacle::RigidBar(RigidBar {
                    anchor_a,
                    anchor_b,
                    k,
                    damping,
                })
            }
            ObstacleSpec::BreakableWire {
                x,
                height,
                k,
                break_force,
            } => {
                let (anchor_a, anchor_b) = ends(x, height);
                Obstacle::BreakableWire(BreakableWire {
                    anchor_a,
                    anchor_b,
                    k,
                    break_force,
                    broken: false,
                })
            }
            ObstacleSpec::Net {
                x_start,
                length,
                height,
                cell_size,
                k1,
                k2,
                knee_deflection,
            } => Obstacle::Net(Net {
                x_start,
                length,
                half_width: WALKWAY_HALF_WIDTH,
                cell_size,
                height,
                k1,
                k2,
                knee_deflection,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverSpec {
    /// Re-zero at each stance-to-swing transition.
    pub reset: bool,
    pub gain: f64,
    pub reset_window: f64,
    pub threshold: f64,
    /// Fraction of the plant's joint friction the observer compensates.
    pub friction_scale: f64,
}

impl Default for ObserverSpec {
    fn default() -> Self {
        Self {
            reset: true,
            gain: DEFAULT_GAIN,
            reset_window: RESET_WINDOW,
            threshold: DEFAULT_THRESHOLD,
            friction_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotSpec {
    /// Ground friction bounding the force the legs can push through.
    pub friction_coefficient: f64,
    /// Multiplies every joint's dry and viscous friction in the plant.
    pub joint_friction_scale: f64,
    pub ground_stiffness: f64,
    pub ground_damping: f64,
}

impl Default for RobotSpec {
    fn default() -> Self {
        let g = GroundModel::default();
        Self {
            friction_coefficient: 0.6,
            joint_friction_scale: 1.0,
            ground_stiffness: g.stiffness,
            ground_damping: g.damping,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for the step log and summary; the CLI falls back to its own default.
    pub dir: Option<PathBuf>,
    /// Skip the per-tick log.
    pub no_log: bool,
}

impl ScenarioConfig {
    /// A scenario on a named course with everything else at its default.
    pub fn preset(course: &str, strategy: Strategy) -> Self {
        Self {
            strategy,
            course: CourseSpec {
                preset: Some(course.to_string()),
                ..CourseSpec::default()
            },
            ..Self::default()
        }
    }

    /// Parses and fully validates a scenario document.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|s| locate(text, s.start))
                .unwrap_or_else(|| "scenario".into());
            Error::config(path, e.message().to_string())
        })?;
        cfg.build()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config { path: field, message } => Error::config(format!("{}: {field}", path.display()), message),
            other => other,
        })
    }

    pub fn emit(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidState(format!("cannot serialize scenario: {e}")))
    }

    pub fn course(&self) -> Result<ObstacleCourse> {
        Ok(self.course_and_gait()?.0)
    }

    fn course_and_gait(&self) -> Result<(ObstacleCourse, GaitConfig)> {
        let mut gait = self.gait.clone();
        let mut obstacles = Vec::new();
        let mut floor = EMPTY_COURSE_LENGTH;
        if let Some(name) = &self.course.preset {
            let (course, adjust) =
                ObstacleCourse::preset(name).map_err(|e| Error::config("course.preset", e.to_string()))?;
            floor = course.course_length;
            obstacles = course.obstacles;
            if let Some(h) = adjust.body_height {
                gait.body_height = h;
            }
            if let Some(v) = adjust.body_speed {
                gait.body_speed = v;
            }
        }
        let offset = obstacles.len();
        obstacles.extend(self.course.obstacles.iter().map(ObstacleSpec::to_obstacle));
        let length = match self.course.length {
            Some(l) => l,
            None => obstacles.iter().map(|o| o.far_x() + RUN_OUT).fold(floor, f64::max),
        };
        let course = ObstacleCourse::new(obstacles, length).map_err(|e| match e {
            // report explicit obstacles by their index in the file
            Error::Config { path, message } => Error::config(renumber(&path, offset), message),
            other => other,
        })?;
        Ok((course, gait))
    }

    /// Simulation config with every invariant checked.
    pub fn build(&self) -> Result<SimConfig> {
        let (course, gait) = self.course_and_gait()?;
        let mut cfg = SimConfig::new(self.strategy, course);
        cfg.gait = gait;
        cfg.seed = self.seed;
        cfg.dt = self.dt;
        cfg.duration_limit = self.duration_limit;
        cfg.fall_bound = self.fall_bound;
        cfg.stuck_periods = self.stuck_periods;
        cfg.course_jitter = self.course.jitter;
        cfg.observer = ObserverConfig {
            reset_window: self.observer.reset_window,
            friction_scale: self.observer.friction_scale,
            ..ObserverConfig::with_gain(self.observer.gain)
        };
        cfg.observer_reset = self.observer.reset;
        cfg.threshold = self.observer.threshold;
        cfg.friction_coefficient = self.robot.friction_coefficient;
        cfg.ground = GroundModel {
            stiffness: self.robot.ground_stiffness,
            damping: self.robot.ground_damping,
        };
        let scale = self.robot.joint_friction_scale;
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::config("robot.joint_friction_scale", "must be >= 0"));
        }
        if !(self.robot.ground_stiffness > 0.0 && self.robot.ground_damping >= 0.0) {
            return Err(Error::config(
                "robot.ground_stiffness",
                "ground stiffness must be > 0, damping >= 0",
            ));
        }
        if !(self.observer.friction_scale >= 0.0) {
            return Err(Error::config("observer.friction_scale", "must be >= 0"));
        }
        for leg in &mut cfg.legs {
            leg.friction_dry = leg.friction_dry.map(|c| c * scale);
            leg.friction_viscous = leg.friction_viscous.map(|d| d * scale);
        }
        cfg.record_log = !self.output.no_log;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `course.obstacles[i]` paths count preset obstacles first; shift them back.
fn renumber(path: &str, offset: usize) -> String {
    let Some(rest) = path.strip_prefix("course.obstacles[") else {
        return path.to_string();
    };
    let Some((index, tail)) = rest.split_once(']') else {
        return path.to_string();
    };
    match index.parse::<usize>() {
        Ok(i) if i >= offset => format!("course.obstacles[{}]{tail}", i - offset),
        Ok(_) => format!("course.preset{tail}"),
        Err(_) => path.to_string(),
    }
}

fn locate(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    format!("line {line}, column {col}")
}
