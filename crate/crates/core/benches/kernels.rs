use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use disentangle::contact_world::{compute_contacts, ContactMemory, LegGeometry, ObstacleCourse};
use disentangle::gait_controller::quadruped_legs;
use disentangle::leg_dynamics::{christoffel_matrix, forward_dynamics, mass_matrix, JointState, Vec3};
use disentangle::momentum_observer::{observer_step, ObserverConfig, ObserverState};

fn dynamics(c: &mut Criterion) {
    let model = quadruped_legs()[0].clone();
    let s = JointState::new(Vec3::new(0.1, 0.9, -1.7), Vec3::new(0.4, -2.0, 5.0));
    c.bench_function("mass_matrix", |b| b.iter(|| mass_matrix(&model, black_box(&s.q))));
    c.bench_function("christoffel_matrix", |b| {
        b.iter(|| christoffel_matrix(&model, black_box(&s.q), black_box(&s.qdot)))
    });
    c.bench_function("forward_dynamics", |b| {
        b.iter(|| forward_dynamics(&model, black_box(&s), &Vec3::new(0.0, 3.0, 1.0), &Vec3::zeros()))
    });
    let cfg = ObserverConfig::default();
    let obs = ObserverState::latched(&cfg, &model, &s);
    c.bench_function("observer_step", |b| {
        b.iter(|| observer_step(black_box(&obs), &cfg, &model, &s, &Vec3::new(0.0, 3.0, 1.0), 0.001, 0))
    });
}

fn contacts(c: &mut Criterion) {
    let (course, _) = ObstacleCourse::preset("soft").unwrap();
    let legs = std::array::from_fn(|i| {
        let x = 0.85 + 0.1 * i as f64;
        LegGeometry {
            hip: Vec3::new(x + 0.1, 0.1, 0.27),
            knee: Vec3::new(x - 0.05, 0.1, 0.14),
            foot: Vec3::new(x + 0.05, 0.1, 0.02),
        }
    });
    c.bench_function("compute_contacts_soft", |b| {
        b.iter(|| {
            let mut mem = ContactMemory::new(&course);
            compute_contacts(&course, &mut mem, black_box(&legs), 0.001)
        })
    });
}

criterion_group!(benches, dynamics, contacts);
criterion_main!(benches);
