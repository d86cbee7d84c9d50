//! Hot paths of the laboratory: circle transforms, one flow step, the
//! signed-distance build plus a small arrival solve, graph extraction,
//! and the nonlinear remainder.  Run with `cargo bench -p mcflab-bench`.

use criterion::{criterion_group, criterion_main, Criterion};

use mcflab::arrival::{signed_distance_convex, solve_arrival, ArrivalControls, Grid2};
use mcflab::estimates::nonlinear_remainder;
use mcflab::flow::step_flow;
use mcflab::rescale::{extract_graph, rescale_snapshot, Gauge};
use mcflab::shapes;
use mcflab::spectral::{analyze, synthesize, SphereGrid};

fn transforms(c: &mut Criterion) {
    let grid = SphereGrid::new(1, 256).unwrap();
    let sf = shapes::ellipse(1.2, 1.0 / 1.2, 256).unwrap();
    let samples = sf.samples().to_vec();
    c.bench_function("analyze m=256", |b| {
        b.iter(|| analyze(&grid, &samples).unwrap())
    });
    let coeffs = analyze(&grid, &samples).unwrap();
    c.bench_function("synthesize m=256", |b| {
        b.iter(|| synthesize(&coeffs, &grid).unwrap())
    });
}

fn flow_step(c: &mut Criterion) {
    let sf = shapes::ellipse(1.2, 1.0 / 1.2, 256).unwrap();
    let dtau = 0.5 * sf.stability_bound();
    c.bench_function("flow step m=256", |b| {
        b.iter(|| step_flow(&sf, dtau).unwrap())
    });
}

fn arrival(c: &mut Criterion) {
    let sf = shapes::circle(1.0, [0.0, 0.0], 96).unwrap();
    let grid = Grid2::square(128, 1.15).unwrap();
    c.bench_function("signed distance 128x128", |b| {
        b.iter(|| signed_distance_convex(&sf, &grid))
    });

    let small = Grid2::square(64, 1.15).unwrap();
    let phi0 = signed_distance_convex(&sf, &small);
    let controls = ArrivalControls::default();
    let mut group = c.benchmark_group("arrival");
    group.sample_size(10);
    group.bench_function("solve 64x64", |b| {
        b.iter(|| solve_arrival(&small, &phi0, &controls).unwrap())
    });
    group.finish();
}

fn graph_extraction(c: &mut Criterion) {
    let sf = shapes::ellipse(1.05, 1.0 / 1.05, 256).unwrap();
    let gauge = Gauge {
        t_hat: sf.area() / (2.0 * std::f64::consts::PI),
        x0: [0.0, 0.0],
    };
    let sphere = SphereGrid::new(1, 64).unwrap();
    c.bench_function("graph extraction m=64", |b| {
        b.iter(|| {
            let rb = rescale_snapshot(&sf, &gauge).unwrap();
            extract_graph(&rb, &sphere).unwrap()
        })
    });

    let rb = rescale_snapshot(&sf, &gauge).unwrap();
    let snap = extract_graph(&rb, &sphere).unwrap();
    c.bench_function("nonlinear remainder m=64", |b| {
        b.iter(|| nonlinear_remainder(&snap).unwrap())
    });
}

criterion_group!(kernels, transforms, flow_step, arrival, graph_extraction);
criterion_main!(kernels);
