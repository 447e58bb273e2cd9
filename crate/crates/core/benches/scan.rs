use criterion::{criterion_group, criterion_main, Criterion};

use beamlab::discretization::assemble;
use beamlab::exec::Execution;
use beamlab::resolvent::{lambda_grid, scan_at};
use beamlab::BeamGeometry;

fn scan(c: &mut Criterion) {
    let op = assemble(BeamGeometry::new(0.5, 1.0).unwrap(), 64, 64).unwrap();
    let lambdas = lambda_grid(10.0, 1e3, 8);
    let mut group = c.benchmark_group("resolvent_scan_n64");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| scan_at(&op, &lambdas, 1, Execution::Sequential).unwrap())
    });
    if Execution::parallel_available() {
        group.bench_function("parallel", |b| {
            b.iter(|| scan_at(&op, &lambdas, 1, Execution::Parallel).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, scan);
criterion_main!(benches);
