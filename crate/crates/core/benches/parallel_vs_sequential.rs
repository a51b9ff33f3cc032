use criterion::{criterion_group, criterion_main, Criterion};
use r2d_core::fixtures;
use r2d_core::lmi::{assemble_thm1_matched, Structure};
use r2d_core::par;
use r2d_core::sdp::{solve_feasibility, SolverConfig};
use r2d_core::sim::{periodic_plan, simulate};

fn solver_batch(c: &mut Criterion) {
    let sys = fixtures::sec4_system();
    let problems: Vec<_> = (0..2)
        .map(|k| assemble_thm1_matched(&sys, k, 0.6, Structure::BlockDiagonal).unwrap())
        .collect();
    let cfg = SolverConfig::default();
    let job = |i: usize| solve_feasibility(&problems[i % 2], i as u64, &cfg).unwrap().margin;
    let mut g = c.benchmark_group("solver_batch_8");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| par::map_indexed(8, job)));
    g.bench_function("sequential", |b| b.iter(|| par::map_indexed_seq(8, job)));
    g.finish();
}

fn simulation_batch(c: &mut Criterion) {
    let sys = fixtures::sec4_system();
    let bc = fixtures::sec4_boundary(&sys);
    let unc = fixtures::sec4_uncertainty();
    let gains = fixtures::sec4_printed_solution().k;
    let job = |i: usize| {
        let plan = periodic_plan(4.0 + i as f64 * 0.5, i % 3, 2, i % 2, 120).unwrap();
        simulate(&sys, &bc, &plan, &unc, Some(&gains)).unwrap().energy[120]
    };
    let mut g = c.benchmark_group("simulation_batch_16");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| par::map_indexed(16, job)));
    g.bench_function("sequential", |b| b.iter(|| par::map_indexed_seq(16, job)));
    g.finish();
}

criterion_group!(benches, solver_batch, simulation_batch);
criterion_main!(benches);
