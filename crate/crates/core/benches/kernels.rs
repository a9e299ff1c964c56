//! Hot kernels under the default rayon pool and under a one-thread pool.
//! Build with `--no-default-features` for the purely sequential code path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use electroseis::biot::{BiotSolver, BiotState, DEFAULT_BIOT_CFL};
use electroseis::em::{init_em, EmSolver, InitialField};
use electroseis::field::Field3;
use electroseis::grid::{build_domain, Domain, Grid, Region, Resolution};
use electroseis::params::{ParameterFields, UniformParams};
use electroseis::stability::{region_weights, sobolev_sq, Samples};
use rayon::ThreadPool;

fn grid(n: usize) -> Grid {
    build_domain(
        Domain::unit_cube(0.25, 1.0, 0.2),
        Resolution {
            n: [n; 3],
            dt_max: Some(0.25 / n as f64),
        },
    )
    .unwrap()
    .1
}

fn pools() -> Vec<(String, ThreadPool)> {
    let n = rayon::current_num_threads();
    let mut v = vec![(
        format!("rayon_{n}"),
        rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap(),
    )];
    if n > 1 {
        v.push(("rayon_1".into(), rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()));
    }
    v
}

fn em_step(c: &mut Criterion) {
    let g = grid(48);
    let p = ParameterFields::uniform(g.node_dims(), &UniformParams { sigma: 0.3, ..Default::default() }).unwrap();
    let solver = EmSolver::new(&g, &p, 0.5).unwrap();
    let v = InitialField::Vortex {
        amp: 1.0,
        center: [0.5; 3],
        radius: 0.3,
        axis: 2,
    };
    let (state, _) = init_em(&g, v.edge_field(&g), v.face_field(&g)).unwrap();
    let mut group = c.benchmark_group("em_step_n48");
    for (name, pool) in pools() {
        let mut s = state.clone();
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| solver.step(&mut s).unwrap()))
        });
    }
    group.finish();
}

fn biot_step(c: &mut Criterion) {
    let g = grid(32);
    let p = ParameterFields::uniform(g.node_dims(), &UniformParams::default()).unwrap();
    let solver = BiotSolver::new(&g, &p, DEFAULT_BIOT_CFL).unwrap();
    let src: [Field3; 3] = std::array::from_fn(|k| {
        Field3::from_fn(g.node_dims(), |i, j, l| {
            let x = g.node(i, j, l);
            (x[k] * 7.0).sin() * x[0] * (1.0 - x[0])
        })
    });
    let mut group = c.benchmark_group("biot_step_n32");
    for (name, pool) in pools() {
        let mut s = BiotState::zero(&g);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| solver.step(&mut s, Some(&src), None).unwrap()))
        });
    }
    group.finish();
}

fn data_norm(c: &mut Criterion) {
    let g = grid(16);
    let w = region_weights(&g, Region::Shell);
    let levels: Vec<Field3> = (0..12)
        .map(|l| {
            Field3::from_fn(g.node_dims(), |i, j, k| {
                let x = g.node(i, j, k);
                (x[0] + 2.0 * x[1] - x[2] + 0.1 * l as f64).sin()
            })
        })
        .collect();
    let samples = Samples::from_levels(&levels, g.h, 0.1);
    let mut group = c.benchmark_group("h5_norm_n16");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| sobolev_sq(&samples, 5, &w).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, em_step, biot_step, data_norm);
criterion_main!(benches);
