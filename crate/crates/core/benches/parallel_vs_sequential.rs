use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use frameop::exec::Exec;
use frameop::fem::{assemble_operator_with, BoundaryCondition};
use frameop::framefield::harmonic_cross_field_2d;
use frameop::geometry::generators;

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble_operator");
    group.sample_size(10);
    for h in [0.05, 0.025] {
        let mesh = generators::disk(h).expect("disk");
        let field = harmonic_cross_field_2d(&mesh).expect("field");
        for exec in [Exec::Sequential, Exec::Parallel] {
            let id = BenchmarkId::new(format!("{exec:?}"), mesh.num_vertices());
            group.bench_with_input(id, &exec, |b, &exec| {
                b.iter(|| assemble_operator_with(&mesh, &field, 0.1, BoundaryCondition::Neumann, exec).expect("assemble"))
            });
        }
    }
    group.finish();
}

fn matvec(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator_matvec");
    let mesh = generators::disk(0.02).expect("disk");
    let field = harmonic_cross_field_2d(&mesh).expect("field");
    let op = assemble_operator_with(&mesh, &field, 0.1, BoundaryCondition::Neumann, Exec::default()).expect("assemble");
    let x: Vec<f64> = (0..op.num_vertices()).map(|i| (i as f64 * 0.37).sin()).collect();
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_function(format!("{exec:?}"), |b| b.iter(|| op.matrix().matrix().mul_vec_with(&x, exec)));
    }
    group.finish();
}

criterion_group!(benches, assembly, matvec);
criterion_main!(benches);
