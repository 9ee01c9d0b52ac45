use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use geowarp_bench::{bench_image, bench_problem, jittered_grid};
use geowarp_core::lie::{so3_backward, so3_exp};
use geowarp_core::sampler::{bilinear_sample, bilinear_sample_backward};
use geowarp_core::{photometric_cost, photometric_gradient, pyramid};
use nalgebra::{Matrix3, Vector3};

fn lie_layers(c: &mut Criterion) {
    let v = Vector3::new(0.3, -0.2, 0.45);
    let rot = so3_exp(&v);
    let grad = Matrix3::from_element(0.25);
    c.bench_function("so3_exp", |b| b.iter(|| so3_exp(black_box(&v))));
    c.bench_function("so3_backward", |b| {
        b.iter(|| so3_backward(black_box(&v), black_box(&rot), black_box(&grad)))
    });
}

fn sampler_layers(c: &mut Criterion) {
    let src = bench_image(256, 256);
    let grid = jittered_grid(256, 256);
    let (_, mask) = bilinear_sample(&src, &grid).unwrap();
    c.bench_function("bilinear_sample_256", |b| {
        b.iter(|| bilinear_sample(black_box(&src), black_box(&grid)).unwrap())
    });
    c.bench_function("bilinear_backward_256", |b| {
        b.iter(|| bilinear_sample_backward(black_box(&src), black_box(&grid), &mask).unwrap())
    });
}

fn alignment_chain(c: &mut Criterion) {
    let problem = bench_problem(64);
    let params = [0.001, 0.0, 0.002, 0.0, 0.001, 0.0];
    c.bench_function("photometric_cost_64", |b| {
        b.iter(|| photometric_cost(black_box(&problem), black_box(&params)).unwrap())
    });
    c.bench_function("photometric_gradient_64", |b| {
        b.iter(|| photometric_gradient(black_box(&problem), black_box(&params)).unwrap())
    });
}

fn pyramid_ops(c: &mut Criterion) {
    let image = bench_image(256, 256);
    c.bench_function("downsample_256", |b| {
        b.iter(|| pyramid::downsample_image(black_box(&image)).unwrap())
    });
}

criterion_group!(
    benches,
    lie_layers,
    sampler_layers,
    alignment_chain,
    pyramid_ops
);
criterion_main!(benches);
