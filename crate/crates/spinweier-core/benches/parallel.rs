//! Compares the rayon-parallel and sequential execution paths on the
//! per-edge Killing residual and the per-face closedness check.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use spinweier_core::exec::{set_mode, ExecMode};
use spinweier_core::forward::{forward_extract, killing_residual};
use spinweier_core::matrix_rep::{build_ideals, MatrixRep};
use spinweier_core::reconstruct::{build_xi, closedness_check};
use spinweier_core::scenarios::{generate, Scenario};

fn modes() -> Vec<(&'static str, ExecMode)> {
    let mut modes = vec![("sequential", ExecMode::Sequential)];
    #[cfg(feature = "parallel")]
    modes.push(("parallel", ExecMode::Parallel));
    modes
}

fn bench_killing(c: &mut Criterion) {
    let mut group = c.benchmark_group("killing_residual");
    for level in [3u32, 4] {
        let patch = generate(Scenario::Sphere, level);
        let rep = MatrixRep::build(patch.n).unwrap();
        let sys = build_ideals(&rep);
        let (mesh, field) = forward_extract(&patch, &sys).unwrap();
        for (name, mode) in modes() {
            group.bench_with_input(
                BenchmarkId::new(name, format!("sphere_level_{level}")),
                &mode,
                |b, &mode| {
                    set_mode(mode);
                    b.iter(|| killing_residual(&mesh, &field).unwrap());
                },
            );
        }
    }
    set_mode(ExecMode::default_mode());
    group.finish();
}

fn bench_closedness(c: &mut Criterion) {
    let mut group = c.benchmark_group("closedness_check");
    let patch = generate(Scenario::Catenoid, 4);
    let rep = MatrixRep::build(patch.n).unwrap();
    let sys = build_ideals(&rep);
    let (mesh, field) = forward_extract(&patch, &sys).unwrap();
    let form = build_xi(&mesh, &field).unwrap();
    for (name, mode) in modes() {
        group.bench_with_input(BenchmarkId::new(name, "catenoid_level_4"), &mode, |b, &mode| {
            set_mode(mode);
            b.iter(|| closedness_check(&mesh, &form).unwrap());
        });
    }
    set_mode(ExecMode::default_mode());
    group.finish();
}

criterion_group!(benches, bench_killing, bench_closedness);
criterion_main!(benches);
