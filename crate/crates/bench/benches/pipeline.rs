//! Benchmarks for the numerical hot paths: jet evaluation, pointwise
//! curvature, the contact frame, the geodesic integrator, the identity
//! suite, and the closed-form radius bounds.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use contact_core::{
    eval_jet, frame_jets, get_model, integrate_geodesic, model_bound_inputs, parse,
    point_geometry, radius_bounds, run_identity_suite,
};

fn bench_eval_jet(c: &mut Criterion) {
    let coords: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    let e = parse("4*(1/(1+x^2+y^2+z^2))^2", &coords).expect("expression parses");
    let p = [0.3, -0.2, 0.5];
    let mut group = c.benchmark_group("eval_jet");
    for order in [0u8, 1, 2] {
        group.bench_function(format!("order {order}"), |b| {
            b.iter(|| eval_jet(black_box(&e), black_box(&p), order).expect("in domain"))
        });
    }
    group.finish();
}

fn bench_point_geometry(c: &mut Criterion) {
    let mut group = c.benchmark_group("point_geometry");
    for name in ["round-s3", "heisenberg5"] {
        let model = &get_model(name).expect("registry model").model;
        let p = vec![0.2; model.dim()];
        group.bench_function(name, |b| {
            b.iter(|| point_geometry(black_box(&model.metric), black_box(&p)).expect("geometry"))
        });
    }
    group.finish();
}

fn bench_frame_jets(c: &mut Criterion) {
    let mut group = c.benchmark_group("frame_jets");
    for name in ["round-s3", "heisenberg5"] {
        let model = &get_model(name).expect("registry model").model;
        let p = vec![0.2; model.dim()];
        group.bench_function(name, |b| {
            b.iter(|| frame_jets(black_box(model), black_box(&p)).expect("frame"))
        });
    }
    group.finish();
}

fn bench_geodesic(c: &mut Criterion) {
    let model = &get_model("round-s3").expect("registry model").model;
    let p = [0.0; 3];
    // g = 4δ at the origin, so the coordinate vector (1/2, 0, 0) is g-unit.
    let v = [0.5, 0.0, 0.0];
    c.bench_function("integrate_geodesic round-s3 length 1", |b| {
        b.iter(|| {
            integrate_geodesic(black_box(model), black_box(&p), black_box(&v), 1.0)
                .expect("geodesic")
        })
    });
}

fn bench_identity_suite(c: &mut Criterion) {
    let model = &get_model("heisenberg3").expect("registry model").model;
    c.bench_function("identity suite heisenberg3 1 point", |b| {
        b.iter(|| run_identity_suite(black_box(model), 1, 0, 1e-6).expect("suite"))
    });
}

fn bench_radius_bounds(c: &mut Criterion) {
    let inputs =
        model_bound_inputs(get_model("round-s3").expect("registry model")).expect("inputs");
    c.bench_function("radius_bounds round-s3", |b| {
        b.iter(|| radius_bounds(black_box(&inputs)).expect("bounds"))
    });
}

criterion_group!(
    benches,
    bench_eval_jet,
    bench_point_geometry,
    bench_frame_jets,
    bench_geodesic,
    bench_identity_suite,
    bench_radius_bounds
);
criterion_main!(benches);
