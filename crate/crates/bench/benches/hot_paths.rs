use criterion::{criterion_group, criterion_main, Criterion};

use cellfree_bench::fixture;
use cellfree_core::{evaluate, gradient, project, solve, SolverOptions, UtilityKind};

fn bench_objective(c: &mut Criterion) {
    let mut group = c.benchmark_group("objective");
    for m in [200usize, 800] {
        let fx = fixture(m, 40);
        let kind = UtilityKind::se_max();
        group.bench_function(format!("semax_m{m}"), |b| {
            b.iter(|| evaluate(&kind, &fx.coeffs, &fx.start))
        });
    }
    group.finish();
}

fn bench_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("gradient");
    for m in [200usize, 800] {
        let fx = fixture(m, 40);
        let kind = UtilityKind::se_max();
        group.bench_function(format!("semax_m{m}"), |b| {
            b.iter(|| gradient(&kind, &fx.coeffs, &fx.start).unwrap())
        });
    }
    group.finish();
}

fn bench_projection(c: &mut Criterion) {
    let fx = fixture(800, 40);
    let x = fx.start.user_major().mapv(|v| 3.0 * v - 0.01);
    c.bench_function("project_m800", |b| b.iter(|| project(&x, 1)));
}

fn bench_solve(c: &mut Criterion) {
    let fx = fixture(100, 20);
    let kind = UtilityKind::se_max();
    let opts = SolverOptions { max_iter: 20, stop_tol: 1e-300, ..SolverOptions::default() };
    c.bench_function("solve_20_iters_m100_k20", |b| {
        b.iter(|| solve(&fx.coeffs, &kind, &opts, &fx.start).unwrap())
    });
}

criterion_group!(benches, bench_objective, bench_gradient, bench_projection, bench_solve);
criterion_main!(benches);
