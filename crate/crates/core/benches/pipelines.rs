//! Parallel pipelines against the same code on one worker.
//!
//! With the default `parallel` feature every workload runs twice: on the
//! global rayon pool and inside a single-thread pool. Built with
//! `--no-default-features` only the sequential fallback is measured.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use horolab::experiments::curvature_scan;
use horolab::horosphere::sample_horosphere;
use horolab::mesh::{build_mesh, Layout};
use horolab::HeintzeGroup;

type Workload = (&'static str, Box<dyn Fn() + Send + Sync>);

fn workloads() -> Vec<Workload> {
    let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
    let layout = Layout::new(&g, 8.5, 0.3).unwrap();
    let g1 = g.clone();
    let g2 = g.clone();
    vec![
        (
            "build_mesh",
            Box::new(move || {
                build_mesh(&g, 10.0, 0.2).unwrap();
            }),
        ),
        (
            "sample_horosphere",
            Box::new(move || {
                sample_horosphere(&g1, &layout, 0.0, -2.0).unwrap();
            }),
        ),
        (
            "curvature_scan",
            Box::new(move || {
                curvature_scan(&g2, 2000, 1, 1e-4).unwrap();
            }),
        ),
    ]
}

fn pipelines(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipelines");
    group.sample_size(10);
    #[cfg(feature = "parallel")]
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    for (name, work) in workloads() {
        #[cfg(feature = "parallel")]
        {
            group.bench_function(BenchmarkId::new(name, "parallel"), |b| b.iter(&work));
            group.bench_function(BenchmarkId::new(name, "one-thread"), |b| {
                b.iter(|| single.install(&work))
            });
        }
        #[cfg(not(feature = "parallel"))]
        group.bench_function(BenchmarkId::new(name, "sequential"), |b| b.iter(&work));
    }
    group.finish();
}

criterion_group!(benches, pipelines);
criterion_main!(benches);
