use disentangle::contact_world::{Obstacle, ObstacleCourse};
use disentangle::gait_controller::{ReactionMode, Strategy};
use disentangle::scenario::ScenarioConfig;
use disentangle::simulator::*;

fn preset(name: &str, strategy: Strategy, seed: u64) -> SimConfig {
    let mut s = ScenarioConfig::preset(name, strategy);
    s.seed = seed;
    s.build().unwrap()
}

#[test]
fn free_walking_covers_the_commanded_distance() {
    let cfg = SimConfig::new(Strategy::Default, ObstacleCourse::empty(10.0));
    let mut sim = Simulation::new(cfg.clone()).unwrap();
    let ticks = (10.0 * cfg.gait.period / cfg.dt).round() as usize;
    for _ in 0..ticks {
        assert_eq!(sim.step(), None);
    }
    let expected = cfg.gait.body_speed * sim.time();
    let x = sim.body().x;
    assert!((x - expected).abs() <= 0.05 * expected, "{x} vs {expected}");
}

#[test]
fn zero_stiffness_obstacles_change_nothing() {
    let mut soft = preset("soft", Strategy::Reactive, 0);
    for o in &mut soft.course.obstacles {
        if let Obstacle::ElasticCord(c) = o {
            c.k1 = 0.0;
            c.k2 = 0.0;
        }
    }
    let mut empty = soft.clone();
    empty.course = ObstacleCourse::empty(soft.course.course_length);
    let (a, ma) = run_scenario(&soft).unwrap();
    let (b, mb) = run_scenario(&empty).unwrap();
    assert_eq!(a.rows.len(), b.rows.len());
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert!((ra.body_x - rb.body_x).abs() < 1e-9);
        for (la, lb) in ra.legs.iter().zip(&rb.legs) {
            assert!((la.q - lb.q).amax() < 1e-9);
            assert!((la.foot - lb.foot).amax() < 1e-9);
            assert!((la.r - lb.r).amax() < 1e-9);
        }
    }
    assert!(ma.success && mb.success);
    assert_eq!(ma.retract_entries, 0);
}

#[test]
fn equal_seeds_give_identical_logs() {
    let mut cfg = preset("mixed", Strategy::Reactive, 4);
    cfg.course_jitter = 0.03;
    cfg.duration_limit = 3.0;
    let a = run_scenario(&cfg).unwrap().0.to_csv_string();
    let b = run_scenario(&cfg).unwrap().0.to_csv_string();
    assert_eq!(a, b);
    cfg.seed = 5;
    let c = run_scenario(&cfg).unwrap().0.to_csv_string();
    assert_ne!(a, c, "jitter should depend on the seed");
}

#[test]
fn reactive_without_obstacles_walks_like_default() {
    let course = ObstacleCourse::empty(10.0);
    let run = |strategy| {
        let mut cfg = SimConfig::new(strategy, course.clone());
        cfg.duration_limit = 10.0 * cfg.gait.period;
        run_scenario(&cfg).unwrap()
    };
    let (d, _) = run(Strategy::Default);
    let (r, m) = run(Strategy::Reactive);
    assert_eq!(m.threshold_crossings, 0);
    assert_eq!(m.retract_entries, 0);
    let worst = d
        .rows
        .iter()
        .zip(&r.rows)
        .flat_map(|(a, b)| a.legs.iter().zip(&b.legs).map(|(x, y)| (x.foot - y.foot).norm()))
        .fold(0.0, f64::max);
    assert!(worst < 0.005, "feet differ by {worst} m");
}

#[test]
fn soft_cords_stop_default_but_not_reactive() {
    let (_, default) = run_scenario(&preset("soft", Strategy::Default, 0)).unwrap();
    assert_eq!(default.outcome, Outcome::Stuck);
    assert_eq!(default.exit_code(), 2);
    assert!(default.terminal_speed < 0.005);

    let (log, reactive) = run_scenario(&preset("soft", Strategy::Reactive, 0)).unwrap();
    assert!(reactive.success, "{}", reactive.to_record());
    assert_eq!(reactive.obstacles_cleared, 4);
    assert!(reactive.retract_entries > 0);
    assert!(log
        .rows
        .iter()
        .any(|r| r.legs.iter().any(|l| l.mode == ReactionMode::Retract)));
}

#[test]
fn breakable_wire_snaps_without_a_reaction() {
    let (_, m) = run_scenario(&preset("wire", Strategy::Reactive, 0)).unwrap();
    assert!(m.success);
    assert_eq!(m.obstacles_broken, 1);
    assert_eq!(m.retract_entries, 0);
}

#[test]
fn step_log_csv_header_is_stable() {
    let header = StepLog::header();
    assert_eq!(header.len(), 5 + 4 * LEG_COLUMNS.len());
    assert_eq!(
        &header[..6],
        ["time", "body_x", "body_speed", "f_back", "power", "fl_phase"]
    );
    assert_eq!(header.last().unwrap(), "hr_foot_z");
    let csv = run_scenario(&{
        let mut c = SimConfig::new(Strategy::Default, ObstacleCourse::empty(0.2));
        c.duration_limit = 0.01;
        c
    })
    .unwrap()
    .0
    .to_csv_string();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), header.join(","));
    assert!(lines.all(|l| l.split(',').count() == header.len()));
}
