use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use mcn_core::neuralnet::{conv2d_forward, ConvSpec, Tensor};
use mcn_core::rng;
use mcn_core::simworld::{generate_floorplan, raycast, start_pose, PlanStyle, ScanConfig};
use mcn_core::slam::{slam_step, Odometry, ParticleSet, SlamConfig};
use mcn_core::Pose2;

fn conv(c: &mut Criterion) {
    // first encoder layer of the generator at 64x64
    let x = Tensor::full([1, 2, 64, 64], 0.5);
    let w: Vec<f64> = (0..16 * 2 * 4 * 4).map(|i| (i % 7) as f64 * 0.01).collect();
    c.bench_function("conv2d 2->16 k4 s2 64x64", |b| {
        b.iter(|| conv2d_forward(black_box(&x), &w, [16, 2, 4, 4], None, ConvSpec::new(4, 2, 1)).unwrap())
    });
    let x = Tensor::full([1, 32, 16, 16], 0.5);
    let w: Vec<f64> = (0..64 * 32 * 16).map(|i| (i % 5) as f64 * 0.01).collect();
    c.bench_function("conv2d 32->64 k4 s2 16x16", |b| {
        b.iter(|| conv2d_forward(black_box(&x), &w, [64, 32, 4, 4], None, ConvSpec::new(4, 2, 1)).unwrap())
    });
}

fn raycasting(c: &mut Criterion) {
    let plan = generate_floorplan(3, &PlanStyle::A.params()).unwrap();
    let pose = start_pose(&plan, &mut rng::seeded(3)).unwrap();
    let cfg = ScanConfig::default();
    let mut r = rng::seeded(0);
    c.bench_function("raycast full sweep", |b| b.iter(|| raycast(&plan, black_box(&pose), &cfg, &mut r).unwrap()));
}

fn slam(c: &mut Criterion) {
    let plan = generate_floorplan(3, &PlanStyle::A.params()).unwrap();
    let start = start_pose(&plan, &mut rng::seeded(3)).unwrap();
    let cfg = SlamConfig::default();
    let scan_cfg = ScanConfig::default();
    let mut ps = ParticleSet::new(cfg.particles, start, &cfg.grid);
    let first = raycast(&plan, &start, &scan_cfg, &mut rng::seeded(1)).unwrap();
    slam_step(&mut ps, &Odometry::default(), &first, &cfg).unwrap();
    let moved = Pose2::new(start.x + 0.05 * start.theta.cos(), start.y + 0.05 * start.theta.sin(), start.theta);
    let odo = Odometry::between(&start, &moved);
    let scan = raycast(&plan, &moved, &scan_cfg, &mut rng::seeded(2)).unwrap();
    c.bench_function("slam_step 30 particles", |b| {
        b.iter_batched(|| ps.clone(), |mut ps| slam_step(&mut ps, &odo, &scan, &cfg).unwrap(), BatchSize::LargeInput)
    });
}

criterion_group!(benches, conv, raycasting, slam);
criterion_main!(benches);
