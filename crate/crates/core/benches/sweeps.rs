use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dpsense::dynamics::{moment_flow, steady_moments};
use dpsense::exec::{map, Execution};
use dpsense::metrology::qfim_two_site_closed;
use dpsense::params::DimensionlessParams;

fn grid(n: usize) -> Vec<DimensionlessParams> {
    (0..n)
        .map(|k| DimensionlessParams::new(0.59 * k as f64 / n as f64, 0.16, 0.13).with_kappa(-0.45 * (k % 7) as f64 / 7.0))
        .collect()
}

fn point(d: &DimensionlessParams) -> f64 {
    let chi = std::f64::consts::PI / 3.0;
    let lyap = steady_moments(&moment_flow(d, chi, 2)).map(|s| s.cov[(0, 0)]).unwrap_or(f64::NAN);
    let bound = qfim_two_site_closed(d, chi).map(|q| q.fim_inv[(0, 0)]).unwrap_or(f64::NAN);
    lyap + bound
}

fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("two_site_sweep");
    for n in [256, 4096] {
        let pts = grid(n);
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, n), &pts, |b, pts| {
                b.iter(|| black_box(map(exec, pts, point)))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
