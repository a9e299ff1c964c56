use std::f64::consts::PI;

use electroseis::biot::{BiotSolver, BiotState, DEFAULT_BIOT_CFL};
use electroseis::field::{node_vec_zeros, Field3, NodeVec};
use electroseis::grid::{build_domain, Domain, Grid, Resolution};
use electroseis::params::{MaterialSpec, ParameterFields, ScalarSpec, UniformParams};

pub type Vec3 = [f64; 3];

pub fn grid(n: usize, t_end: f64, dt_max: f64) -> Grid {
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

pub fn profile(x: Vec3) -> f64 {
    (0..3).map(|d| (PI * x[d]).sin().powi(2)).product()
}

pub fn g_u(x: Vec3) -> Vec3 {
    let s = profile(x);
    [s * (1.0 + 0.5 * x[1]), s * (x[0] + x[2]).cos(), s * (0.5 + x[0] * x[1])]
}

pub fn g_w(x: Vec3) -> Vec3 {
    let s = profile(x);
    [s * (0.3 + x[2]), s * x[0].sin(), s * (1.0 - 0.4 * x[1])]
}

pub fn phi(t: f64) -> [f64; 3] {
    // value, first and second derivative of sin²(πt)
    [
        (PI * t).sin().powi(2),
        PI * (2.0 * PI * t).sin(),
        2.0 * PI * PI * (2.0 * PI * t).cos(),
    ]
}

pub fn psi(t: f64) -> [f64; 3] {
    // 0.5 sin²(2πt)
    [
        0.5 * (2.0 * PI * t).sin().powi(2),
        PI * (4.0 * PI * t).sin(),
        4.0 * PI * PI * (4.0 * PI * t).cos(),
    ]
}

pub fn material() -> MaterialSpec {
    let a = ScalarSpec::affine;
    MaterialSpec {
        lambda: a(2.0, [0.3, 0.0, 0.0]),
        shear: a(1.0, [0.0, 0.2, 0.0]),
        biot_c: a(1.0, [0.0, 0.0, 0.1]),
        biot_m: a(3.0, [0.2, 0.1, 0.0]),
        rho: a(2.0, [0.0, 0.0, 0.1]),
        rho_e: a(3.0, [0.2, 0.0, 0.0]),
        viscosity: a(0.5, [0.0, 0.5, 0.0]),
        ..MaterialSpec::default()
    }
}

/// Fourth-order central difference of `f` along axis `d`.
pub fn diff<F: Fn(Vec3) -> f64>(f: &F, x: Vec3, d: usize, h: f64) -> f64 {
    let at = |s: f64| {
        let mut y = x;
        y[d] += s * h;
        f(y)
    };
    (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h)
}

pub const FD_H: f64 = 2e-3;

/// Stress `τ` of displacement pair (u, w) at `x`, both given analytically.
pub fn stress(m: &MaterialSpec, u: &dyn Fn(Vec3) -> Vec3, w: &dyn Fn(Vec3) -> Vec3, x: Vec3) -> ([[f64; 3]; 3], f64) {
    let mut gu = [[0.0; 3]; 3];
    let mut divw = 0.0;
    for d in 0..3 {
        for c in 0..3 {
            gu[c][d] = diff(&|y| u(y)[c], x, d, FD_H);
        }
        divw += diff(&|y| w(y)[d], x, d, FD_H);
    }
    let divu = gu[0][0] + gu[1][1] + gu[2][2];
    let (la, g, c, mm) = (m.lambda.eval(x), m.shear.eval(x), m.biot_c.eval(x), m.biot_m.eval(x));
    let mut t = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            t[a][b] = g * (gu[a][b] + gu[b][a]);
        }
        t[a][a] += la * divu + c * divw;
    }
    (t, c * divu + mm * divw)
}

/// `(div τ, ∇(C div u + M div w))` at `x`.
pub fn operator(m: &MaterialSpec, u: &dyn Fn(Vec3) -> Vec3, w: &dyn Fn(Vec3) -> Vec3, x: Vec3) -> (Vec3, Vec3) {
    let mut div_tau = [0.0; 3];
    let mut grad_q = [0.0; 3];
    for d in 0..3 {
        for c in 0..3 {
            div_tau[c] += diff(&|y| stress(m, u, w, y).0[c][d], x, d, FD_H);
        }
        grad_q[d] = diff(&|y| stress(m, u, w, y).1, x, d, FD_H);
    }
    (div_tau, grad_q)
}

pub struct Forcing {
    /// `[div τ(g_u, 0), div τ(0, g_w)]`
    pub div_tau: [NodeVec; 2],
    /// `[∇q(g_u, 0), ∇q(0, g_w)]`
    pub grad_q: [NodeVec; 2],
    pub gu: NodeVec,
    pub gw: NodeVec,
}

pub fn node_vec(g: &Grid, f: impl Fn(Vec3) -> Vec3 + Sync + Send) -> NodeVec {
    std::array::from_fn(|c| Field3::from_fn(g.node_dims(), |i, j, k| f(g.node(i, j, k))[c]))
}

pub fn precompute(g: &Grid, m: &MaterialSpec) -> Forcing {
    let zero = |_: Vec3| [0.0; 3];
    let a = node_vec(g, |x| operator(m, &g_u, &zero, x).0);
    let b = node_vec(g, |x| operator(m, &zero, &g_w, x).0);
    let c = node_vec(g, |x| operator(m, &g_u, &zero, x).1);
    let d = node_vec(g, |x| operator(m, &zero, &g_w, x).1);
    Forcing {
        div_tau: [a, b],
        grad_q: [c, d],
        gu: node_vec(g, g_u),
        gw: node_vec(g, g_w),
    }
}

pub fn body_force(g: &Grid, p: &ParameterFields, f: &Forcing, t: f64) -> (NodeVec, NodeVec) {
    let (a, b) = (phi(t), psi(t));
    let mut fu = node_vec_zeros(g.n);
    let mut fw = node_vec_zeros(g.n);
    for c in 0..3 {
        for n in 0..fu[c].len() {
            let (gu, gw) = (f.gu[c].data()[n], f.gw[c].data()[n]);
            let (rho, rf, re) = (p.rho.data()[n], p.rho_f.data()[n], p.rho_e.data()[n]);
            let damp = p.viscosity.data()[n] / p.permeability.data()[n];
            fu[c].data_mut()[n] = rho * a[2] * gu + rf * b[2] * gw
                - a[0] * f.div_tau[0][c].data()[n]
                - b[0] * f.div_tau[1][c].data()[n];
            fw[c].data_mut()[n] = rf * a[2] * gu + re * b[2] * gw + damp * b[1] * gw
                - a[0] * f.grad_q[0][c].data()[n]
                - b[0] * f.grad_q[1][c].data()[n];
        }
    }
    (fu, fw)
}

pub fn mms_error(n: usize) -> f64 {
    let t_end = 0.5;
    let m = material();
    let probe = grid(n, t_end, 1.0);
    let p = ParameterFields::from_spec(&probe, &m).unwrap();
    let limit = electroseis::biot::cfl_limit(&probe, &p, DEFAULT_BIOT_CFL).unwrap();
    let g = grid(n, t_end, limit);
    let solver = BiotSolver::new(&g, &p, DEFAULT_BIOT_CFL).unwrap();
    let forcing = precompute(&g, &m);
    let mut s = BiotState::zero(&g);
    for _ in 0..g.n_t {
        let (fu, fw) = body_force(&g, &p, &forcing, s.time);
        solver.step(&mut s, None, Some((&fu, &fw))).unwrap();
    }
    let (a, b) = (phi(s.time)[0], psi(s.time)[0]);
    let (mut err, mut norm) = (0.0, 0.0);
    for c in 0..3 {
        for nn in 0..s.u[c].len() {
            let (eu, ew) = (a * forcing.gu[c].data()[nn], b * forcing.gw[c].data()[nn]);
            err += (s.u[c].data()[nn] - eu).powi(2) + (s.w[c].data()[nn] - ew).powi(2);
            norm += eu * eu + ew * ew;
        }
    }
    (err / norm).sqrt()
}

pub fn uniform_solver(n: usize, t_end: f64, v: &UniformParams) -> (Grid, ParameterFields, BiotSolver) {
    let probe = grid(n, t_end, 1.0);
    let p = ParameterFields::uniform(probe.node_dims(), v).unwrap();
    let limit = electroseis::biot::cfl_limit(&probe, &p, DEFAULT_BIOT_CFL).unwrap();
    let g = grid(n, t_end, limit);
    let s = BiotSolver::new(&g, &p, DEFAULT_BIOT_CFL).unwrap();
    (g, p, s)
}

pub fn pulse(g: &Grid, amp: f64) -> NodeVec {
    node_vec(g, move |x| {
        let r2 = (x[0] - 0.45).powi(2) + (x[1] - 0.5).powi(2) + (x[2] - 0.55).powi(2);
        let e = amp * (-r2 / 0.01).exp();
        [e, -0.5 * e, 0.25 * e]
    })
}

pub fn energy_history(v: &UniformParams) -> Vec<f64> {
    let (g, _, solver) = uniform_solver(16, 1.0, v);
    let z = node_vec_zeros(g.n);
    let mut s = BiotState::with_initial(&solver, pulse(&g, 1.0), pulse(&g, 0.5), z.clone(), z);
    let mut e = vec![solver.energy(&s)];
    for _ in 0..g.n_t {
        solver.step(&mut s, None, None).unwrap();
        e.push(solver.energy(&s));
    }
    e
}
