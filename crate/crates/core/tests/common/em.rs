use std::f64::consts::PI;

use electroseis::em::{init_em, run_em_with, EmSolver, EmState, SnapshotPolicy, InitialField};
use electroseis::field::{Stagger, VecField};
use electroseis::grid::{build_domain, Domain, Grid, Resolution};
use electroseis::ops;
use electroseis::params::{ParameterFields, UniformParams};

pub fn unit_grid(n: usize, t_end: f64, dt_max: f64) -> Grid {
    build_domain(
        Domain::unit_cube(0.25, t_end, 0.5 * t_end),
        Resolution {
            n: [n; 3],
            dt_max: Some(dt_max),
        },
    )
    .unwrap()
    .1
}

/// Cavity eigenmode `D = e₃ sin(πx)sin(πy)cos(ωt)` with ω = π√2.
pub fn cavity_d(x: [f64; 3], t: f64) -> [f64; 3] {
    let w = PI * 2f64.sqrt();
    [0.0, 0.0, (PI * x[0]).sin() * (PI * x[1]).sin() * (w * t).cos()]
}

pub fn cavity_b(x: [f64; 3], t: f64) -> [f64; 3] {
    let w = PI * 2f64.sqrt();
    let s = -(PI / w) * (w * t).sin();
    [
        s * (PI * x[0]).sin() * (PI * x[1]).cos(),
        -s * (PI * x[0]).cos() * (PI * x[1]).sin(),
        0.0,
    ]
}

pub fn l2_error(grid: &Grid, num: &VecField, exact: impl Fn(usize, [f64; 3]) -> f64 + Sync + Send) -> f64 {
    let ex = ops::sample(grid, num.stagger, exact);
    let mut s = 0.0;
    for c in 0..3 {
        for (a, b) in num.comps[c].data().iter().zip(ex.comps[c].data()) {
            s += (a - b).powi(2);
        }
    }
    (s * grid.cell_volume()).sqrt()
}

pub fn cavity_error(n: usize) -> f64 {
    let t_end = 0.5;
    let g = unit_grid(n, t_end, 0.5 / n as f64);
    let p = ParameterFields::uniform(g.node_dims(), &UniformParams::default()).unwrap();
    let solver = EmSolver::new(&g, &p, 0.5).unwrap();
    let d0 = ops::sample(&g, Stagger::Edge, |c, x| cavity_d(x, 0.0)[c]);
    let (s, _) = init_em(&g, d0, VecField::zeros(Stagger::Face, g.n)).unwrap();
    let end = run_em_with(&solver, s, g.n_t, SnapshotPolicy::every(usize::MAX), |_| Ok(())).unwrap();
    let t = end.time;
    l2_error(&g, &end.d, |c, x| cavity_d(x, t)[c]) + l2_error(&g, &end.b, |c, x| cavity_b(x, t)[c])
}

pub fn vortex_state(g: &Grid) -> EmState {
    let v = InitialField::Vortex {
        amp: 1.0,
        center: [0.5, 0.45, 0.55],
        radius: 0.3,
        axis: 2,
    };
    init_em(g, v.edge_field(g), v.face_field(g)).unwrap().0
}

/// Maximum relative deviation of the plain and of the scheme energy over a
/// cavity-mode run.
pub fn cavity_energy_deviation(n: usize) -> (f64, f64) {
    let g = unit_grid(n, 1.0, 0.5 / n as f64);
    let p = ParameterFields::uniform(g.node_dims(), &UniformParams::default()).unwrap();
    let solver = EmSolver::new(&g, &p, 0.5).unwrap();
    let d0 = ops::sample(&g, Stagger::Edge, |c, x| cavity_d(x, 0.0)[c]);
    let (mut s, _) = init_em(&g, d0, VecField::zeros(Stagger::Face, g.n)).unwrap();
    let (e0, w0) = (solver.plain_energy(&s), solver.discrete_energy(&s));
    let (mut de, mut dw) = (0.0f64, 0.0f64);
    for _ in 0..g.n_t {
        solver.step(&mut s).unwrap();
        de = de.max(((solver.plain_energy(&s) - e0) / e0).abs());
        dw = dw.max(((solver.discrete_energy(&s) - w0) / w0).abs());
    }
    (de, dw)
}

/// Largest change of the cell divergence of B over a vortex run, scaled by
/// `h_min/max|B₀|`.
pub fn div_b_drift(n: usize) -> f64 {
    let g = unit_grid(n, 1.0, 0.5 / n as f64);
    let p = ParameterFields::uniform(g.node_dims(), &UniformParams::default()).unwrap();
    let solver = EmSolver::new(&g, &p, 0.5).unwrap();
    let mut s = vortex_state(&g);
    let div0 = ops::div_face_at_cells(&g, &s.b);
    let b_norm = s.b.max_abs();
    for _ in 0..g.n_t {
        solver.step(&mut s).unwrap();
    }
    let div1 = ops::div_face_at_cells(&g, &s.b);
    div1.zip_map(&div0, |a, b| a - b).max_abs() * g.h_min() / b_norm
}
