//! Obstacles and their unilateral point contacts with the legs.
//!
//! Every obstacle is one or more straight strands stretched across the
//! walkway. Contact is resolved in each leg's sagittal (x-z) plane: a strand
//! crosses that plane at a single rest point, and the thigh and shin are
//! segments of the hip-knee-foot polyline.
//!
//! A strand that a link's front surface sweeps past becomes *captured* by
//! that leg. While captured the strand sits at the point of the leg closest
//! to its rest point (it slides freely along the link) and pulls back
//! towards rest with the obstacle's force law, which always pushes on the
//! front surface. A captured strand is released either back in front of the
//! leg, or under the foot once it slides off the bottom. A strand the foot
//! passes over, or one that slid off under the foot, is *passed* for that leg
//! and no longer interacts with it: rear-surface contacts only press the leg
//! upward and forward, which never impedes progress, and are not modelled.

use rand::Rng;

use crate::error::{Error, Result};
use crate::leg_dynamics::{ContactForce, Vec3, HIP, KNEE};

pub const DEFAULT_CORD_K1: f64 = 250.0;
pub const DEFAULT_CORD_K2: f64 = 70.0;
pub const DEFAULT_CORD_KNEE: f64 = 0.08;
/// Mid-span deflection at which the default rope goes taut (m).
pub const DEFAULT_ROPE_SAG: f64 = 0.02;

/// Heights of the four anchor posts A-D (m).
pub const ANCHOR_HEIGHTS: [f64; 4] = [0.161, 0.195, 0.229, 0.127];
/// Distance of the anchor posts along the walkway (m).
pub const ANCHOR_X: [f64; 4] = [0.9, 1.4, 1.9, 2.4];
/// Half-width of the walkway between the left and right anchors (m).
pub const WALKWAY_HALF_WIDTH: f64 = 0.6;

/// Light bungee cord with a softening two-slope force law.
#[derive(Clone, Debug, PartialEq)]
pub struct ElasticCord {
    pub anchor_a: Vec3,
    pub anchor_b: Vec3,
    pub rest_length: f64,
    pub k1: f64,
    pub k2: f64,
    pub knee_deflection: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rope {
    pub anchor_a: Vec3,
    pub anchor_b: Vec3,
    /// Total rope length; larger than the anchor distance when slack.
    pub slack_length: f64,
    pub k_taut: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RigidBar {
    pub anchor_a: Vec3,
    pub anchor_b: Vec3,
    pub k: f64,
    pub damping: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BreakableWire {
    pub anchor_a: Vec3,
    pub anchor_b: Vec3,
    pub k: f64,
    pub break_force: f64,
    pub broken: bool,
}

/// Horizontal net: transverse cords every `cell_size` between `x_start` and
/// `x_start + length`, spanning the walkway at `height`.
#[derive(Clone, Debug, PartialEq)]
pub struct Net {
    pub x_start: f64,
    pub length: f64,
    pub half_width: f64,
    pub cell_size: f64,
    pub height: f64,
    pub k1: f64,
    pub k2: f64,
    pub knee_deflection: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Obstacle {
    ElasticCord(ElasticCord),
    Rope(Rope),
    RigidBar(RigidBar),
    BreakableWire(BreakableWire),
    Net(Net),
}

impl ElasticCord {
    pub fn across(x: f64, height: f64) -> Self {
        Self {
            anchor_a: Vec3::new(x, WALKWAY_HALF_WIDTH, height),
            anchor_b: Vec3::new(x, -WALKWAY_HALF_WIDTH, height),
            rest_length: 2.0 * WALKWAY_HALF_WIDTH,
            k1: DEFAULT_CORD_K1,
            k2: DEFAULT_CORD_K2,
            knee_deflection: DEFAULT_CORD_KNEE,
        }
    }

    /// Three cords joined in series: one third the stiffness, three times the reach of the first slope.
    pub fn triple_series(x: f64, height: f64) -> Self {
        Self {
            k1: DEFAULT_CORD_K1 / 3.0,
            k2: DEFAULT_CORD_K2 / 3.0,
            knee_deflection: 3.0 * DEFAULT_CORD_KNEE,
            ..Self::across(x, height)
        }
    }
}

impl Rope {
    pub fn across(x: f64, height: f64) -> Self {
        Self {
            anchor_a: Vec3::new(x, WALKWAY_HALF_WIDTH, height),
            anchor_b: Vec3::new(x, -WALKWAY_HALF_WIDTH, height),
            slack_length: slack_for_sag(WALKWAY_HALF_WIDTH, DEFAULT_ROPE_SAG),
            k_taut: 5000.0,
        }
    }
}

/// Rope length that goes taut when pushed `sag` sideways at mid-span.
pub fn slack_for_sag(half_span: f64, sag: f64) -> f64 {
    2.0 * half_span.hypot(sag)
}

impl RigidBar {
    pub fn across(x: f64, height: f64) -> Self {
        Self {
            anchor_a: Vec3::new(x, WALKWAY_HALF_WIDTH, height),
            anchor_b: Vec3::new(x, -WALKWAY_HALF_WIDTH, height),
            k: 50_000.0,
            damping: 50.0,
        }
    }
}

impl BreakableWire {
    pub fn across(x: f64, height: f64) -> Self {
        Self {
            anchor_a: Vec3::new(x, WALKWAY_HALF_WIDTH, height),
            anchor_b: Vec3::new(x, -WALKWAY_HALF_WIDTH, height),
            k: 400.0,
            break_force: 5.0,
            broken: false,
        }
    }
}

impl Net {
    pub fn across(x_start: f64, length: f64) -> Self {
        Self {
            x_start,
            length,
            half_width: WALKWAY_HALF_WIDTH,
            cell_size: 0.14,
            height: 0.076,
            k1: DEFAULT_CORD_K1,
            k2: DEFAULT_CORD_K2,
            knee_deflection: DEFAULT_CORD_KNEE,
        }
    }
}

/// Two-slope cord force: `k1 x` up to the knee, then `k2` beyond it.
pub fn cord_tension(deflection: f64, cord: &ElasticCord) -> Result<f64> {
    if deflection < 0.0 || deflection.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "cord deflection {deflection} must be >= 0"
        )));
    }
    Ok(two_slope(deflection, cord.k1, cord.k2, cord.knee_deflection))
}

fn two_slope(x: f64, k1: f64, k2: f64, knee: f64) -> f64 {
    if x <= knee {
        k1 * x
    } else {
        k1 * knee + k2 * (x - knee)
    }
}

/// Deflection at mid-span at which the rope's path reaches its length.
pub fn rope_slack_deflection(rope: &Rope) -> f64 {
    let half_span = 0.5 * (rope.anchor_a - rope.anchor_b).norm();
    let half_slack = 0.5 * rope.slack_length;
    (half_slack * half_slack - half_span * half_span).max(0.0).sqrt()
}

/// Transverse force of a rope pushed `deflection` sideways at mid-span.
///
/// Zero while the deflected path is shorter than the rope; once taut the
/// rope resists further deflection with stiffness `k_taut`, like the other
/// obstacles' contact stiffnesses.
pub fn rope_force(deflection: f64, rope: &Rope) -> f64 {
    rope.k_taut * (deflection - rope_slack_deflection(rope)).max(0.0)
}

impl Obstacle {
    pub fn kind(&self) -> &'static str {
        match self {
            Obstacle::ElasticCord(_) => "elastic_cord",
            Obstacle::Rope(_) => "rope",
            Obstacle::RigidBar(_) => "rigid_bar",
            Obstacle::BreakableWire(_) => "breakable_wire",
            Obstacle::Net(_) => "net",
        }
    }

    /// Force magnitude for a strand of this obstacle deflected by `deflection`.
    pub fn force_magnitude(&self, deflection: f64, deflection_rate: f64) -> f64 {
        let d = deflection.max(0.0);
        match self {
            Obstacle::ElasticCord(c) => two_slope(d, c.k1, c.k2, c.knee_deflection),
            Obstacle::Rope(r) => rope_force(d, r),
            Obstacle::RigidBar(b) => (b.k * d + b.damping * deflection_rate).max(0.0),
            Obstacle::BreakableWire(w) if w.broken => 0.0,
            Obstacle::BreakableWire(w) => w.k * d,
            Obstacle::Net(n) => two_slope(d, n.k1, n.k2, n.knee_deflection),
        }
    }

    /// Straight strands making up this obstacle.
    pub fn strands(&self) -> Vec<(Vec3, Vec3)> {
        match self {
            Obstacle::ElasticCord(c) => vec![(c.anchor_a, c.anchor_b)],
            Obstacle::Rope(r) => vec![(r.anchor_a, r.anchor_b)],
            Obstacle::RigidBar(b) => vec![(b.anchor_a, b.anchor_b)],
            Obstacle::BreakableWire(w) => vec![(w.anchor_a, w.anchor_b)],
            Obstacle::Net(n) => {
                let count = (n.length / n.cell_size).floor() as usize + 1;
                (0..count)
                    .map(|i| {
                        let x = n.x_start + i as f64 * n.cell_size;
                        (
                            Vec3::new(x, n.half_width, n.height),
                            Vec3::new(x, -n.half_width, n.height),
                        )
                    })
                    .collect()
            }
        }
    }

    /// Furthest point of the obstacle along the walkway.
    pub fn far_x(&self) -> f64 {
        self.strands()
            .iter()
            .flat_map(|(a, b)| [a.x, b.x])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_height(&self) -> f64 {
        self.strands()
            .iter()
            .flat_map(|(a, b)| [a.z, b.z])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_broken(&self) -> bool {
        matches!(self, Obstacle::BreakableWire(w) if w.broken)
    }

    /// Shifts the obstacle along the walkway.
    pub fn shift_x(&mut self, dx: f64) {
        let shift = |v: &mut Vec3| v.x += dx;
        match self {
            Obstacle::ElasticCord(c) => {
                shift(&mut c.anchor_a);
                shift(&mut c.anchor_b);
            }
            Obstacle::Rope(r) => {
                shift(&mut r.anchor_a);
                shift(&mut r.anchor_b);
            }
            Obstacle::RigidBar(b) => {
                shift(&mut b.anchor_a);
                shift(&mut b.anchor_b);
            }
            Obstacle::BreakableWire(w) => {
                shift(&mut w.anchor_a);
                shift(&mut w.anchor_b);
            }
            Obstacle::Net(n) => n.x_start += dx,
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{path}.{name}"), format!("must be > 0, got {v}")))
            }
        };
        let anchors = |a: &Vec3, b: &Vec3| {
            if (a.y - b.y).abs() < 1e-9 {
                return Err(Error::config(
                    format!("{path}.anchor_b"),
                    "anchors must be separated across the walkway (different y)",
                ));
            }
            for (name, v) in [("anchor_a", a), ("anchor_b", b)] {
                if !(0.0..=0.35).contains(&v.z) {
                    return Err(Error::config(
                        format!("{path}.{name}"),
                        format!("anchor height {} outside [0, 0.35] m", v.z),
                    ));
                }
            }
            Ok(())
        };
        match self {
            Obstacle::ElasticCord(c) => {
                anchors(&c.anchor_a, &c.anchor_b)?;
                positive(c.rest_length, "rest_length")?;
                positive(c.k1, "k1")?;
                positive(c.k2, "k2")?;
                positive(c.knee_deflection, "knee_deflection")
            }
            Obstacle::Rope(r) => {
                anchors(&r.anchor_a, &r.anchor_b)?;
                positive(r.k_taut, "k_taut")?;
                if r.slack_length < (r.anchor_a - r.anchor_b).norm() {
                    return Err(Error::config(
                        format!("{path}.slack_length"),
                        "rope shorter than the anchor distance",
                    ));
                }
                Ok(())
            }
            Obstacle::RigidBar(b) => {
                anchors(&b.anchor_a, &b.anchor_b)?;
                positive(b.k, "k")?;
                if b.damping < 0.0 {
                    return Err(Error::config(format!("{path}.damping"), "must be >= 0"));
                }
                Ok(())
            }
            Obstacle::BreakableWire(w) => {
                anchors(&w.anchor_a, &w.anchor_b)?;
                positive(w.k, "k")?;
                positive(w.break_force, "break_force")
            }
            Obstacle::Net(n) => {
                positive(n.length, "length")?;
                positive(n.half_width, "half_width")?;
                positive(n.cell_size, "cell_size")?;
                positive(n.k1, "k1")?;
                positive(n.k2, "k2")?;
                positive(n.knee_deflection, "knee_deflection")?;
                if !(0.0..=0.35).contains(&n.height) {
                    return Err(Error::config(format!("{path}.height"), "outside [0, 0.35] m"));
                }
                Ok(())
            }
        }
    }
}

/// One straight strand and the obstacle it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct Strand {
    pub obstacle: usize,
    pub anchor_a: Vec3,
    pub anchor_b: Vec3,
}

impl Strand {
    /// Where the strand crosses the plane `y`, if it spans it.
    fn rest_point_at(&self, y: f64) -> Option<(f64, f64)> {
        let (a, b) = (&self.anchor_a, &self.anchor_b);
        let s = (y - a.y) / (b.y - a.y);
        if !(0.0..=1.0).contains(&s) {
            return None;
        }
        let p = a + (b - a) * s;
        Some((p.x, p.z))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObstacleCourse {
    pub obstacles: Vec<Obstacle>,
    pub course_length: f64,
    strands: Vec<Strand>,
}

/// Gait adjustments a preset asks for.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PresetGait {
    pub body_height: Option<f64>,
    pub body_speed: Option<f64>,
}

pub const PRESET_NAMES: [&str; 8] = ["soft", "rope", "rigid", "mixed", "net", "softer", "wire", "empty"];

impl ObstacleCourse {
    pub fn new(obstacles: Vec<Obstacle>, course_length: f64) -> Result<Self> {
        if !(course_length > 0.0) {
            return Err(Error::config("course.length", "course length must be > 0"));
        }
        for (i, o) in obstacles.iter().enumerate() {
            o.validate(&format!("course.obstacles[{i}]"))?;
        }
        let strands = obstacles
            .iter()
            .enumerate()
            .flat_map(|(i, o)| {
                o.strands().into_iter().map(move |(a, b)| Strand {
                    obstacle: i,
                    anchor_a: a,
                    anchor_b: b,
                })
            })
            .collect();
        Ok(Self {
            obstacles,
            course_length,
            strands,
        })
    }

    pub fn empty(course_length: f64) -> Self {
        Self::new(Vec::new(), course_length).expect("empty course is valid")
    }

    /// Named course layouts on the four-anchor rack.
    ///
    /// * `soft`: bungee cords on anchors A-D.
    /// * `rope`, `rigid`, `softer`, `wire`: a single obstacle on anchor A.
    /// * `mixed`: rigid bar at A, cords at B and C, rope at D.
    /// * `net`: a low net over the whole rack; also raises the body and slows down.
    /// * `empty`: no obstacles.
    pub fn preset(name: &str) -> Result<(Self, PresetGait)> {
        let [xa, xb, xc, xd] = ANCHOR_X;
        let [ha, hb, hc, hd] = ANCHOR_HEIGHTS;
        let length = xd + 0.8;
        let mut gait = PresetGait::default();
        let obstacles = match name {
            "soft" => ANCHOR_X
                .iter()
                .zip(ANCHOR_HEIGHTS)
                .map(|(&x, h)| Obstacle::ElasticCord(ElasticCord::across(x, h)))
                .collect(),
            "rope" => vec![Obstacle::Rope(Rope::across(xa, ha))],
            "rigid" => vec![Obstacle::RigidBar(RigidBar::across(xa, ha))],
            "softer" => vec![Obstacle::ElasticCord(ElasticCord::triple_series(xa, ha))],
            "wire" => vec![Obstacle::BreakableWire(BreakableWire::across(xa, ha))],
            "mixed" => vec![
                Obstacle::RigidBar(RigidBar::across(xa, ha)),
                Obstacle::ElasticCord(ElasticCord::across(xb, hb)),
                Obstacle::ElasticCord(ElasticCord::across(xc, hc)),
                Obstacle::Rope(Rope::across(xd, hd)),
            ],
            "net" => {
                gait.body_height = Some(0.35);
                gait.body_speed = Some(0.4);
                vec![Obstacle::Net(Net::across(xa, xd - xa))]
            }
            "empty" => Vec::new(),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown course preset `{other}`; expected one of {PRESET_NAMES:?}"
                )))
            }
        };
        Ok((Self::new(obstacles, length)?, gait))
    }

    pub fn strands(&self) -> &[Strand] {
        &self.strands
    }

    /// Moves each obstacle by an independent uniform offset in `[-amplitude, amplitude]`.
    pub fn jitter<R: Rng>(&mut self, rng: &mut R, amplitude: f64) {
        if amplitude <= 0.0 {
            return;
        }
        for o in &mut self.obstacles {
            o.shift_x(rng.gen_range(-amplitude..=amplitude));
        }
        self.rebuild_strands();
    }

    fn rebuild_strands(&mut self) {
        let rebuilt =
            Self::new(std::mem::take(&mut self.obstacles), self.course_length).expect("obstacles were valid before");
        *self = rebuilt;
    }
}

/// A leg's hip joint, knee and foot in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegGeometry {
    pub hip: Vec3,
    pub knee: Vec3,
    pub foot: Vec3,
}

type P2 = (f64, f64);

/// Tolerance on the link parameter when testing for a sweep, so a strand
/// cannot slip between two links at the knee within one tick.
const SWEEP_SLACK: f64 = 0.02;

fn sub(a: P2, b: P2) -> P2 {
    (a.0 - b.0, a.1 - b.1)
}

fn dot(a: P2, b: P2) -> f64 {
    a.0 * b.0 + a.1 * b.1
}

fn xz(v: &Vec3) -> P2 {
    (v.x, v.z)
}

/// A point measured against one link in the sagittal plane.
#[derive(Clone, Copy, Debug)]
struct LinkRelation {
    /// Distance behind the link's front surface (positive = behind).
    depth: f64,
    /// Projection along the link, 0 at its proximal end, 1 at its distal end.
    along: f64,
    length: f64,
    start: P2,
    dir: P2,
}

impl LinkRelation {
    fn new(start: P2, end: P2, point: P2) -> Self {
        let seg = sub(end, start);
        let length = dot(seg, seg).sqrt().max(1e-12);
        let dir = (seg.0 / length, seg.1 / length);
        // anatomical front: the +x side for a link pointing straight down
        let normal = (-dir.1, dir.0);
        let rel = sub(point, start);
        Self {
            depth: -dot(rel, normal),
            along: dot(rel, dir) / length,
            length,
            start,
            dir,
        }
    }

    fn point_at(&self, along: f64) -> P2 {
        let s = along * self.length;
        (self.start.0 + self.dir.0 * s, self.start.1 + self.dir.1 * s)
    }
}

fn relations(leg: &LegGeometry, rest: P2) -> [LinkRelation; 2] {
    [
        LinkRelation::new(xz(&leg.hip), xz(&leg.knee), rest),
        LinkRelation::new(xz(&leg.knee), xz(&leg.foot), rest),
    ]
}

/// Interaction of one strand with one leg.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StrandState {
    Ahead,
    Captured { deflection: f64 },
    Passed,
}

/// Per-run bookkeeping of which strands each leg has captured or passed.
#[derive(Clone, Debug)]
pub struct ContactMemory {
    states: Vec<[StrandState; 4]>,
    previous: [Option<LegGeometry>; 4],
}

impl ContactMemory {
    pub fn new(course: &ObstacleCourse) -> Self {
        Self {
            states: vec![[StrandState::Ahead; 4]; course.strands.len()],
            previous: [None; 4],
        }
    }

    pub fn state(&self, strand: usize, leg: usize) -> StrandState {
        self.states[strand][leg]
    }

    /// Number of strands currently captured by `leg`.
    pub fn captured_count(&self, leg: usize) -> usize {
        self.states
            .iter()
            .filter(|s| matches!(s[leg], StrandState::Captured { .. }))
            .count()
    }
}

/// A contact force together with where it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObstacleContact {
    pub strand: usize,
    pub obstacle: usize,
    pub contact: ContactForce,
    pub deflection: f64,
    pub magnitude: f64,
}

/// Contacts on every leg for one tick.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContactReport {
    pub per_leg: [Vec<ObstacleContact>; 4],
}

impl ContactReport {
    /// Sum of the backward (-x) force components over all legs.
    pub fn backward_force(&self) -> f64 {
        self.per_leg
            .iter()
            .flatten()
            .map(|c| (-c.contact.force.x).max(0.0))
            .sum()
    }

    pub fn any_active(&self) -> bool {
        self.per_leg.iter().any(|l| !l.is_empty())
    }

    pub fn contacts(&self, leg: usize) -> Vec<ContactForce> {
        self.per_leg[leg].iter().map(|c| c.contact).collect()
    }
}

/// Where a captured strand sits on the leg, or why it let go.
enum Seat {
    On { link: usize, along: f64, point: P2 },
    ReleasedAhead,
    ReleasedUnder,
}

fn seat(rel: &[LinkRelation; 2], rest: P2) -> Seat {
    let [thigh, shin] = rel;
    let candidates = [thigh, shin].map(|r| {
        let along = r.along.clamp(0.0, 1.0);
        let p = r.point_at(along);
        let d = sub(rest, p);
        (along, p, dot(d, d))
    });
    let use_shin = candidates[1].2 < candidates[0].2;
    if use_shin {
        let (along, point, _) = candidates[1];
        if shin.along >= 1.0 {
            // slid off the foot: under the leg if behind the shin line
            return if shin.depth >= 0.0 {
                Seat::ReleasedUnder
            } else {
                Seat::ReleasedAhead
            };
        }
        if shin.along <= 0.0 {
            return knee_seat(thigh, shin, point);
        }
        return if shin.depth > 0.0 {
            Seat::On {
                link: KNEE,
                along,
                point,
            }
        } else {
            Seat::ReleasedAhead
        };
    }
    let (along, point, _) = candidates[0];
    if thigh.along >= 1.0 {
        return knee_seat(thigh, shin, point);
    }
    if thigh.depth > 0.0 {
        // pinned at the hip when it slides past the top of the thigh
        Seat::On {
            link: HIP,
            along,
            point,
        }
    } else {
        Seat::ReleasedAhead
    }
}

/// A strand at the knee stays hooked unless its rest point is in front of both links.
fn knee_seat(thigh: &LinkRelation, shin: &LinkRelation, point: P2) -> Seat {
    if thigh.depth > 0.0 || shin.depth > 0.0 {
        Seat::On {
            link: KNEE,
            along: 0.0,
            point,
        }
    } else {
        Seat::ReleasedAhead
    }
}

/// Resolves obstacle contacts for all four legs and updates the capture memory.
///
/// `legs` are world-frame leg geometries (torso level, so world and torso
/// axes coincide). Forces are returned in the torso frame.
pub fn compute_contacts(
    course: &ObstacleCourse,
    memory: &mut ContactMemory,
    legs: &[LegGeometry; 4],
    dt: f64,
) -> ContactReport {
    let mut report = ContactReport::default();
    for (si, strand) in course.strands.iter().enumerate() {
        let obstacle = &course.obstacles[strand.obstacle];
        for (li, leg) in legs.iter().enumerate() {
            let Some(rest) = strand.rest_point_at(leg.knee.y) else {
                continue;
            };
            let now = relations(leg, rest);
            let state = memory.states[si][li];
            let next = match state {
                StrandState::Passed => StrandState::Passed,
                StrandState::Ahead => match memory.previous[li] {
                    None => StrandState::Ahead,
                    Some(prev_leg) => {
                        let before = relations(&prev_leg, rest);
                        let swept = before.iter().zip(now.iter()).any(|(b, n)| {
                            b.depth <= 0.0 && n.depth > 0.0 && (-SWEEP_SLACK..=1.0 + SWEEP_SLACK).contains(&n.along)
                        });
                        let foot_over = prev_leg.foot.x < rest.0 && leg.foot.x >= rest.0 && leg.foot.z > rest.1;
                        if swept {
                            StrandState::Captured { deflection: 0.0 }
                        } else if foot_over {
                            StrandState::Passed
                        } else {
                            StrandState::Ahead
                        }
                    }
                },
                StrandState::Captured { .. } => state,
            };
            let next = match next {
                StrandState::Captured { deflection: prev } => match seat(&now, rest) {
                    Seat::ReleasedAhead => StrandState::Ahead,
                    Seat::ReleasedUnder => StrandState::Passed,
                    Seat::On { link, along, point } => {
                        let offset = sub(rest, point);
                        let deflection = dot(offset, offset).sqrt();
                        let rate = if matches!(state, StrandState::Captured { .. }) {
                            (deflection - prev) / dt
                        } else {
                            0.0
                        };
                        let magnitude = obstacle.force_magnitude(deflection, rate);
                        if magnitude > 0.0 && deflection > 0.0 {
                            let force = Vec3::new(offset.0, 0.0, offset.1) * (magnitude / deflection);
                            report.per_leg[li].push(ObstacleContact {
                                strand: si,
                                obstacle: strand.obstacle,
                                contact: ContactForce {
                                    link_index: link,
                                    fraction_along_link: along,
                                    force,
                                },
                                deflection,
                                magnitude,
                            });
                        }
                        StrandState::Captured { deflection }
                    }
                },
                other => other,
            };
            memory.states[si][li] = next;
        }
    }
    memory.previous = legs.map(Some);
    report
}

/// Applies per-tick obstacle state changes: wires break when their total load exceeds the limit.
pub fn update_obstacles(course: &mut ObstacleCourse, report: &ContactReport) {
    let mut load = vec![0.0; course.obstacles.len()];
    for c in report.per_leg.iter().flatten() {
        load[c.obstacle] += c.magnitude;
    }
    for (o, l) in course.obstacles.iter_mut().zip(load) {
        if let Obstacle::BreakableWire(w) = o {
            if l > w.break_force {
                w.broken = true;
            }
        }
    }
}
