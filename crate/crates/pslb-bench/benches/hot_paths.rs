//! Per-call costs of the four hot paths: the design solver, the naive
//! loop's update-and-check step, the confidence radius, and the change
//! detector's sliding-window push.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pslb_core::algos::NaiveState;
use pslb_core::changedetect::LcdMonitor;
use pslb_core::design::{compute_g_optimal, sample_arm};
use pslb_core::env::{make_example_5_1, Dynamics, EnvState, Instance};
use pslb_core::estimation::{confidence_radius, RadiusMode, RadiusParams, RunningStats, ZetaMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn benchmark_instance() -> Instance {
    make_example_5_1(2, std::f64::consts::FRAC_PI_8).expect("benchmark instance is valid")
}

fn design_solver(c: &mut Criterion) {
    let instance = benchmark_instance();
    c.bench_function("design/3_arms_d2", |b| {
        b.iter(|| compute_g_optimal(black_box(&instance.arms), 1e-6).unwrap())
    });

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let arms: Vec<Vec<f64>> = (0..24)
        .map(|_| (0..6).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect();
    c.bench_function("design/24_arms_d6", |b| {
        b.iter(|| compute_g_optimal(black_box(&arms), 1e-5).unwrap())
    });
}

fn naive_step(c: &mut Criterion) {
    let instance = benchmark_instance();
    let allocation = compute_g_optimal(&instance.arms, 1e-6).unwrap();
    c.bench_function("naive/update_and_stop_check", |b| {
        let mut state = NaiveState::new(
            &instance.arms,
            &allocation,
            instance.lmax as f64,
            0.01,
            0.05,
        );
        let mut env = EnvState::new(&instance, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        b.iter(|| {
            let arm = sample_arm(&allocation, &mut rng);
            let obs = env.step(arm, Dynamics::Hidden).unwrap();
            state.update(arm, obs.reward);
            black_box(state.should_stop())
        })
    });
}

fn radius(c: &mut Criterion) {
    let instance = benchmark_instance();
    let allocation = compute_g_optimal(&instance.arms, 1e-6).unwrap();
    let mut stats = RunningStats::new(2, &instance.arms, &allocation, 512);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..5000u64 {
        let arm = sample_arm(&allocation, &mut rng);
        stats.push_real((i % 2) as usize, arm, rng.random::<f64>() - 0.3);
    }
    let params = RadiusParams {
        dim: instance.dim(),
        num_arms: instance.num_arms(),
        num_contexts: 2,
        l_max: instance.lmax as f64,
        delta: 0.05,
        mode: RadiusMode::Tight,
        zeta: ZetaMode::Balanced,
    };
    c.bench_function("radius/pair", |b| {
        b.iter(|| confidence_radius(black_box(&stats), &params, 0, 1))
    });
}

fn detector_push(c: &mut Criterion) {
    let instance = benchmark_instance();
    let allocation = compute_g_optimal(&instance.arms, 1e-6).unwrap();
    let stats = RunningStats::new(2, &instance.arms, &allocation, 8);
    let mut monitor = LcdMonitor::new(stats.m_table().to_vec(), 332);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let rewards: Vec<f64> = (0..4096).map(|_| rng.random::<f64>() - 0.5).collect();
    for (i, reward) in rewards.iter().take(400).enumerate() {
        monitor.push(i % 3, *reward);
    }
    c.bench_function("detector/push_full_window", |b| {
        let mut i = 0usize;
        b.iter(|| {
            i = i.wrapping_add(1);
            monitor.push(i % 3, rewards[i & 4095]);
            black_box(monitor.fires(0.9))
        })
    });
}

criterion_group!(benches, design_solver, naive_step, radius, detector_push);
criterion_main!(benches);
