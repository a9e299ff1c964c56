//! Initial-time reconstruction of the electric parameter differences
//! `(α, β, γ)` and the coupling difference `ξ` from two twin experiments.
//!
//! At `t = 0` the difference fields satisfy, pointwise,
//!
//! ```text
//! ∇α × B₀ + α curl B₀ − γ D₀ = ∂ₜD(·,0)
//! −∇β × D₀ − β curl D₀      = ∂ₜB(·,0)
//! D₀ ξ                      = −ρ₁ ∂ₜ²u(·,0),   ρ₁ = (ρρₑ − ρ_f²)/ρ_f
//! ```
//!
//! Stacking both experiments gives `M (∇α, γ, ∇β) = N (α, β) + b` with a
//! 12×7 matrix `M`. The gradients are found by per-node least squares and
//! turned back into functions by a Dirichlet Poisson solve on `Ω₀`,
//! iterated to a fixed point when `N ≠ 0`.

use nalgebra::{SMatrix, SVector};

use crate::biot::node_derivative;
use crate::em::{init_em, SnapshotPolicy};
use crate::field::{node_vec_zeros, Field3, NodeVec, VecField};
use crate::grid::{Grid, Region};
use crate::ops;
use crate::par;
use crate::params::ParameterFields;
use crate::pipeline::{run_twin, Frame, SolverSettings};
use crate::{Error, Result};

pub type Mat12x7 = SMatrix<f64, 12, 7>;
pub type Mat12x2 = SMatrix<f64, 12, 2>;
pub type Mat7x12 = SMatrix<f64, 7, 12>;
pub type Vec12 = SVector<f64, 12>;
pub type Vec7 = SVector<f64, 7>;

/// Snapshot levels needed by the one-sided time stencils.
pub const MIN_LEVELS: usize = 6;
pub const DEFAULT_SIGMA_MIN: f64 = 1e-6;
pub const DEFAULT_TOL_FP: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_CG_TOL: f64 = 1e-10;

/// `∂ₜf(0)` from `f(0), …, f(4dt)`, fourth order.
pub const FIRST_DERIVATIVE: [f64; 5] = [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25];
/// `∂ₜ²f(0)` from `f(0), …, f(5dt)`, fourth order.
pub const SECOND_DERIVATIVE: [f64; 6] = [
    45.0 / 12.0,
    -154.0 / 12.0,
    214.0 / 12.0,
    -156.0 / 12.0,
    61.0 / 12.0,
    -10.0 / 12.0,
];

/// Difference fields of one experiment near `t = 0`.
#[derive(Clone, Debug)]
pub struct ExperimentSeries {
    /// Initial data shared by both parameter sets.
    pub d0: VecField,
    pub b0: VecField,
    pub dt: f64,
    /// Difference frames at consecutive levels starting at 0.
    pub frames: Vec<Frame>,
}

#[derive(Clone, Debug)]
pub struct Measurement {
    pub grid: Grid,
    pub experiments: [ExperimentSeries; 2],
}

/// Runs both parameter sets for both experiments and keeps the first
/// `levels` difference frames.
pub fn collect_measurement(
    grid: &Grid,
    p1: &ParameterFields,
    p2: &ParameterFields,
    initial: [(VecField, VecField); 2],
    levels: usize,
    settings: &SolverSettings,
) -> Result<Measurement> {
    let mut out = Vec::with_capacity(2);
    for (d0, b0) in initial {
        let mut frames = Vec::with_capacity(levels);
        run_twin(
            grid,
            p1,
            p2,
            &d0,
            &b0,
            levels.saturating_sub(1),
            SnapshotPolicy::every(1),
            settings,
            |f| {
                frames.push(f.clone());
                Ok(())
            },
        )?;
        let (state, _) = init_em(grid, d0, b0)?;
        out.push(ExperimentSeries {
            d0: state.d,
            b0: state.b,
            dt: grid.dt,
            frames,
        });
    }
    let [a, b]: [ExperimentSeries; 2] = out.try_into().expect("two experiments");
    Ok(Measurement {
        grid: grid.clone(),
        experiments: [a, b],
    })
}

/// Adds independent `N(0, σ²)` noise to every difference sample of every
/// frame, from a seeded generator.
pub fn add_noise(m: &mut Measurement, sigma: f64, seed: u64) -> Result<()> {
    use rand::SeedableRng;
    use rand_distr::Distribution;
    if sigma == 0.0 {
        return Ok(());
    }
    let normal = rand_distr::Normal::new(0.0, sigma).map_err(|e| Error::Invalid(format!("noise level: {e}")))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for ex in &mut m.experiments {
        for f in &mut ex.frames {
            let fields = f.d.comps.iter_mut().chain(&mut f.b.comps).chain(&mut f.u).chain(&mut f.w);
            for c in fields {
                for v in c.data_mut() {
                    *v += normal.sample(&mut rng);
                }
            }
        }
    }
    Ok(())
}

/// Node values of the initial data and of the initial time derivatives.
#[derive(Clone, Debug)]
pub struct InitialDerivatives {
    pub d0: NodeVec,
    pub b0: NodeVec,
    pub dd: NodeVec,
    pub db: NodeVec,
    /// `∂ₜ²u(·,0)`.
    pub a: NodeVec,
    /// `grad_a[k][c] = ∂ₖ a_c`.
    pub grad_a: [NodeVec; 3],
}

fn combine(fields: &[&Field3], coef: &[f64], scale: f64) -> Field3 {
    let mut out = Field3::zeros(fields[0].dims());
    for (f, c) in fields.iter().zip(coef) {
        out.axpy(c * scale, f);
    }
    out
}

fn combine_vec(fields: &[&VecField], coef: &[f64], scale: f64) -> VecField {
    VecField {
        stagger: fields[0].stagger,
        comps: std::array::from_fn(|c| {
            let comps: Vec<&Field3> = fields.iter().map(|f| &f.comps[c]).collect();
            combine(&comps, coef, scale)
        }),
    }
}

/// Central-difference gradient of each component: `out[k][c] = ∂ₖ f_c`.
pub fn node_gradient(grid: &Grid, f: &NodeVec) -> [NodeVec; 3] {
    std::array::from_fn(|k| {
        std::array::from_fn(|c| {
            Field3::from_fn(f[c].dims(), |i, j, l| node_derivative(&f[c], i, j, l, k, grid.h[k]))
        })
    })
}

/// `curl f` of a node vector field by central differences.
pub fn node_curl(grid: &Grid, f: &NodeVec) -> NodeVec {
    std::array::from_fn(|c| {
        let (p, q) = ((c + 1) % 3, (c + 2) % 3);
        Field3::from_fn(f[0].dims(), |i, j, k| {
            node_derivative(&f[q], i, j, k, p, grid.h[p]) - node_derivative(&f[p], i, j, k, q, grid.h[q])
        })
    })
}

fn check_series(s: &ExperimentSeries) -> Result<()> {
    if s.frames.len() < MIN_LEVELS {
        return Err(Error::Invalid(format!(
            "{} snapshot levels given, at least {MIN_LEVELS} are needed",
            s.frames.len()
        )));
    }
    for (l, f) in s.frames.iter().enumerate() {
        if f.level != l || (f.time - l as f64 * s.dt).abs() > 1e-9 * s.dt.max(f.time) {
            return Err(Error::Invalid(format!(
                "snapshots must be consecutive levels from 0 with spacing {}; frame {l} has level {} at t = {}",
                s.dt, f.level, f.time
            )));
        }
    }
    Ok(())
}

/// One-sided fourth-order time derivatives at `t = 0`, moved to nodes.
pub fn estimate_initial_derivatives(m: &Measurement) -> Result<[InitialDerivatives; 2]> {
    let g = &m.grid;
    let one = |s: &ExperimentSeries| -> Result<InitialDerivatives> {
        check_series(s)?;
        let f = &s.frames;
        let d: Vec<&VecField> = f[..5].iter().map(|x| &x.d).collect();
        let b: Vec<&VecField> = f[..5].iter().map(|x| &x.b).collect();
        let dd = combine_vec(&d, &FIRST_DERIVATIVE, 1.0 / s.dt);
        let db = combine_vec(&b, &FIRST_DERIVATIVE, 1.0 / s.dt);
        let a: NodeVec = std::array::from_fn(|c| {
            let u: Vec<&Field3> = f[..6].iter().map(|x| &x.u[c]).collect();
            combine(&u, &SECOND_DERIVATIVE, 1.0 / (s.dt * s.dt))
        });
        Ok(InitialDerivatives {
            // D₀ is averaged exactly as in the Biot source so that the ξ
            // relation holds node by node.
            d0: ops::edge_to_nodes(g, &s.d0),
            b0: ops::staggered_to_nodes_cubic(&s.b0),
            dd: ops::staggered_to_nodes_cubic(&dd),
            db: ops::staggered_to_nodes_cubic(&db),
            grad_a: node_gradient(g, &a),
            a,
        })
    };
    Ok([one(&m.experiments[0])?, one(&m.experiments[1])?])
}

fn at(f: &NodeVec, n: usize) -> [f64; 3] {
    [f[0].data()[n], f[1].data()[n], f[2].data()[n]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

const E: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// The 12×7 matrix for initial data `(D₀⁽¹⁾, B₀⁽¹⁾)`, `(D₀⁽²⁾, B₀⁽²⁾)` at a
/// point. Columns are `(∂₁α, ∂₂α, ∂₃α, γ, ∂₁β, ∂₂β, ∂₃β)`.
pub fn m_matrix(d0: [[f64; 3]; 2], b0: [[f64; 3]; 2]) -> Mat12x7 {
    let mut m = Mat12x7::zeros();
    for j in 0..2 {
        let r = 6 * j;
        for i in 0..3 {
            let eb = cross(E[i], b0[j]);
            let ed = cross(E[i], d0[j]);
            for c in 0..3 {
                m[(r + c, i)] = eb[c];
                m[(r + 3 + c, 4 + i)] = -ed[c];
            }
        }
        for c in 0..3 {
            m[(r + c, 3)] = -d0[j][c];
        }
    }
    m
}

/// Rows of `m` with the given 0-based indices.
pub fn select_rows(m: &Mat12x7, rows: [usize; 7]) -> SMatrix<f64, 7, 7> {
    SMatrix::<f64, 7, 7>::from_fn(|r, c| m[(rows[r], c)])
}

/// Per-node data of the algebraic system.
#[derive(Clone, Debug)]
pub struct NodeSystem {
    /// Flat node index.
    pub node: usize,
    pub m: Mat12x7,
    pub n: Mat12x2,
    pub b: Vec12,
    pub pinv: Mat7x12,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl NodeSystem {
    /// Least-squares solution of `M y = N (α, β) + b`.
    pub fn solve(&self, alpha: f64, beta: f64) -> Vec7 {
        self.pinv * (self.n * SVector::<f64, 2>::new(alpha, beta) + self.b)
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructionSystem {
    pub grid: Grid,
    /// Node mask of `Ω₀`.
    pub interior: Vec<bool>,
    pub nodes: Vec<NodeSystem>,
    pub derivs: [InitialDerivatives; 2],
    /// `ρ₁ = (ρρₑ − ρ_f²)/ρ_f` at nodes.
    pub rho1: Field3,
    /// Smallest `σ_min/σ_max` over `Ω₀` and where it occurs.
    pub worst_sigma: f64,
    pub worst_node: [usize; 3],
    /// True when `N` vanishes on `Ω₀`, so one pass is exact.
    pub decoupled: bool,
}

pub fn interior_mask(grid: &Grid) -> Vec<bool> {
    grid.node_labels().iter().map(|r| *r == Region::Interior).collect()
}

/// Builds `M`, `N`, `b` at every node of `Ω₀` and checks that
/// `σ_min(M) ≥ sigma_min·σ_max(M)` everywhere.
pub fn assemble_system(
    grid: &Grid,
    derivs: [InitialDerivatives; 2],
    params: &ParameterFields,
    sigma_min: f64,
) -> Result<ReconstructionSystem> {
    let interior = interior_mask(grid);
    let curl_b: [NodeVec; 2] = std::array::from_fn(|j| node_curl(grid, &derivs[j].b0));
    let curl_d: [NodeVec; 2] = std::array::from_fn(|j| node_curl(grid, &derivs[j].d0));
    let idx: Vec<usize> = (0..interior.len()).filter(|&n| interior[n]).collect();
    let nodes = par::map_range(idx.len(), |p| {
        let n = idx[p];
        let d0 = [at(&derivs[0].d0, n), at(&derivs[1].d0, n)];
        let b0 = [at(&derivs[0].b0, n), at(&derivs[1].b0, n)];
        let m = m_matrix(d0, b0);
        let mut nm = Mat12x2::zeros();
        let mut b = Vec12::zeros();
        for j in 0..2 {
            let (cb, cd) = (at(&curl_b[j], n), at(&curl_d[j], n));
            let (dd, db) = (at(&derivs[j].dd, n), at(&derivs[j].db, n));
            for c in 0..3 {
                nm[(6 * j + c, 0)] = -cb[c];
                nm[(6 * j + 3 + c, 1)] = cd[c];
                b[6 * j + c] = dd[c];
                b[6 * j + 3 + c] = db[c];
            }
        }
        let svd = m.svd(true, true);
        let sv = svd.singular_values;
        let (smin, smax) = (sv.min(), sv.max());
        let pinv = if smax > 0.0 {
            svd.pseudo_inverse(0.0).unwrap_or_else(|_| Mat7x12::zeros())
        } else {
            Mat7x12::zeros()
        };
        NodeSystem {
            node: n,
            m,
            n: nm,
            b,
            pinv,
            sigma_min: smin,
            sigma_max: smax,
        }
    });
    let mut worst = (f64::INFINITY, [0; 3]);
    for s in &nodes {
        let rel = if s.sigma_max > 0.0 { s.sigma_min / s.sigma_max } else { 0.0 };
        if rel < worst.0 {
            worst = (rel, params.rho.ijk(s.node));
        }
    }
    if nodes.is_empty() {
        return Err(Error::Invalid("the interior set Ω₀ has no nodes".into()));
    }
    if !(worst.0 >= sigma_min) {
        return Err(Error::Degenerate(format!(
            "M(x) is rank deficient: σ_min/σ_max = {:e} < {sigma_min:e} at node {:?}",
            worst.0, worst.1
        )));
    }
    let rho1 = Field3::from_fn(grid.node_dims(), |i, j, k| {
        let p = params.poro_at(params.rho.idx(i, j, k));
        (p.rho * p.rho_e - p.rho_f * p.rho_f) / p.rho_f
    });
    let decoupled = nodes.iter().all(|s| s.n.iter().all(|&v| v == 0.0));
    Ok(ReconstructionSystem {
        grid: grid.clone(),
        interior,
        nodes,
        derivs,
        rho1,
        worst_sigma: worst.0,
        worst_node: worst.1,
        decoupled,
    })
}

/// `ξ` and `∇ξ` on `Ω₀`, zero elsewhere.
#[derive(Clone, Debug)]
pub struct XiRecovery {
    pub xi: Field3,
    pub grad: NodeVec,
    /// Relative L² gap between the least-squares `∇ξ` and central
    /// differences of `ξ`, over nodes whose stencil stays in `Ω₀`.
    pub fd_gap: f64,
}

/// Per-node least squares of `D₀⁽ʲ⁾ξ = −ρ₁∂ₜ²u⁽ʲ⁾` over both experiments,
/// and of its spatial derivative for `∇ξ`.
pub fn recover_xi(sys: &ReconstructionSystem) -> Result<XiRecovery> {
    let g = &sys.grid;
    let dims = g.node_dims();
    let [e1, e2] = &sys.derivs;
    let weight = |n: usize| dot(at(&e1.d0, n), at(&e1.d0, n)) + dot(at(&e2.d0, n), at(&e2.d0, n));
    let max_w = sys.nodes.iter().map(|s| weight(s.node)).fold(0.0, f64::max);
    let c_star = 1e-12 * max_w;
    if let Some(s) = sys.nodes.iter().find(|s| !(weight(s.node) > c_star)) {
        return Err(Error::Degenerate(format!(
            "|D₀⁽¹⁾|² + |D₀⁽²⁾|² vanishes at node {:?}",
            sys.rho1.ijk(s.node)
        )));
    }
    if let Some(s) = sys.nodes.iter().find(|s| !sys.rho1.data()[s.node].is_finite()) {
        return Err(Error::Degenerate(format!(
            "ρ_f = 0 at node {:?}: ∂ₜ²u carries no information on ξ",
            sys.rho1.ijk(s.node)
        )));
    }
    let rho1 = &sys.rho1;
    let vals = par::map_range(sys.nodes.len(), |p| {
        let n = sys.nodes[p].node;
        let r1 = rho1.data()[n];
        let s: f64 = [e1, e2].iter().map(|e| dot(at(&e.d0, n), at(&e.a, n))).sum();
        -r1 * s / weight(n)
    });
    let mut xi = Field3::zeros(dims);
    for (s, v) in sys.nodes.iter().zip(&vals) {
        xi.data_mut()[s.node] = *v;
    }
    let grad_rho1: [Field3; 3] = std::array::from_fn(|k| {
        Field3::from_fn(dims, |i, j, l| node_derivative(rho1, i, j, l, k, g.h[k]))
    });
    let grad_d0 = [node_gradient(g, &e1.d0), node_gradient(g, &e2.d0)];
    let grads = par::map_range(sys.nodes.len(), |p| {
        let n = sys.nodes[p].node;
        let x = vals[p];
        let r1 = rho1.data()[n];
        std::array::from_fn::<f64, 3, _>(|k| {
            let mut s = 0.0;
            for (j, e) in [e1, e2].iter().enumerate() {
                let a = at(&e.a, n);
                let da = at(&e.grad_a[k], n);
                let dd = at(&grad_d0[j][k], n);
                let rhs: [f64; 3] =
                    std::array::from_fn(|c| -grad_rho1[k].data()[n] * a[c] - r1 * da[c] - dd[c] * x);
                s += dot(at(&e.d0, n), rhs);
            }
            s / weight(n)
        })
    });
    let mut grad = node_vec_zeros(g.n);
    for (s, v) in sys.nodes.iter().zip(&grads) {
        for k in 0..3 {
            grad[k].data_mut()[s.node] = v[k];
        }
    }
    let fd = node_gradient(g, &[xi.clone(), xi.clone(), xi.clone()]);
    let (mut num, mut den) = (0.0, 0.0);
    for s in &sys.nodes {
        let [i, j, k] = xi.ijk(s.node);
        if !stencil_inside(sys, i, j, k) {
            continue;
        }
        for d in 0..3 {
            let ls = grad[d].data()[s.node];
            num += (ls - fd[d][0].data()[s.node]).powi(2);
            den += ls * ls;
        }
    }
    Ok(XiRecovery {
        xi,
        grad,
        fd_gap: if den > 0.0 { (num / den).sqrt() } else { num.sqrt() },
    })
}

fn stencil_inside(sys: &ReconstructionSystem, i: usize, j: usize, k: usize) -> bool {
    let d = sys.grid.node_dims();
    let flat = |i: usize, j: usize, k: usize| i + d[0] * (j + d[1] * k);
    [(1, 0, 0), (0, 1, 0), (0, 0, 1)].iter().all(|&(a, b, c)| {
        sys.interior[flat(i + a, j + b, k + c)] && sys.interior[flat(i - a, j - b, k - c)]
    })
}

/// Difference stencils for the potential recovery.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StencilOrder {
    Second,
    Fourth,
}

impl StencilOrder {
    /// One-sided weights `w₁, w₂` of the centred first derivative
    /// `Σ wₘ (f(i+m) − f(i−m))/h`.
    fn first(self) -> [f64; 2] {
        match self {
            StencilOrder::Second => [0.5, 0.0],
            StencilOrder::Fourth => [2.0 / 3.0, -1.0 / 12.0],
        }
    }

    /// Weights `c₀, c₁, c₂` of `−f'' ≈ (c₀f(i) − Σ cₘ (f(i+m) + f(i−m)))/h²`.
    fn second(self) -> [f64; 3] {
        match self {
            StencilOrder::Second => [2.0, 1.0, 0.0],
            StencilOrder::Fourth => [2.5, 4.0 / 3.0, -1.0 / 12.0],
        }
    }
}

/// Matrix-free Dirichlet Laplacian on the masked node set; values off the
/// mask are zero.
struct Poisson<'a> {
    grid: &'a Grid,
    mask: &'a [bool],
    order: StencilOrder,
}

/// Value of `f` at node `n` shifted by `m` along axis `a`, or 0 if that node
/// is off the mask or off the grid.
#[inline]
fn shifted(grid: &Grid, mask: &[bool], f: &[f64], n: usize, a: usize, m: isize) -> f64 {
    let d = grid.node_dims();
    let stride = [1, d[0], d[0] * d[1]];
    let p = [n % d[0], (n / d[0]) % d[1], n / (d[0] * d[1])];
    let q = p[a] as isize + m;
    if q < 0 || q >= d[a] as isize {
        return 0.0;
    }
    let t = (n as isize + m * stride[a] as isize) as usize;
    if mask[t] {
        f[t]
    } else {
        0.0
    }
}

impl Poisson<'_> {
    /// `−Δf` at masked nodes.
    fn apply(&self, f: &[f64]) -> Vec<f64> {
        let c = self.order.second();
        let h2 = self.grid.h.map(|h| 1.0 / (h * h));
        par::map_range(f.len(), |n| {
            if !self.mask[n] {
                return 0.0;
            }
            let mut s = 0.0;
            for a in 0..3 {
                let mut v = c[0] * f[n];
                for m in 1..=2 {
                    if c[m] != 0.0 {
                        let pair = shifted(self.grid, self.mask, f, n, a, m as isize)
                            + shifted(self.grid, self.mask, f, n, a, -(m as isize));
                        v -= c[m] * pair;
                    }
                }
                s += h2[a] * v;
            }
            s
        })
    }

    /// Solves `−Δf = rhs` by conjugate gradients; returns the solution and
    /// the final relative residual.
    fn solve(&self, rhs: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64)> {
        let dotp = |a: &[f64], b: &[f64]| par::sum_range(a.len(), |i| a[i] * b[i]);
        let norm_b = dotp(rhs, rhs).sqrt();
        let mut x = vec![0.0; rhs.len()];
        if norm_b == 0.0 {
            return Ok((x, 0.0));
        }
        let mut r = rhs.to_vec();
        let mut p = r.clone();
        let mut rr = dotp(&r, &r);
        for _ in 0..max_iter {
            let ap = self.apply(&p);
            let alpha = rr / dotp(&p, &ap);
            for i in 0..x.len() {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new = dotp(&r, &r);
            if rr_new.sqrt() <= tol * norm_b {
                return Ok((x, rr_new.sqrt() / norm_b));
            }
            let beta = rr_new / rr;
            for i in 0..p.len() {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
        }
        Err(Error::NoConvergence(format!(
            "Poisson CG stopped after {max_iter} iterations at relative residual {:e}",
            rr.sqrt() / norm_b
        )))
    }
}

/// Centred divergence of a node vector field on masked nodes, with the
/// field taken as zero off the mask.
fn masked_divergence(grid: &Grid, g: &NodeVec, mask: &[bool], order: StencilOrder) -> Vec<f64> {
    let w = order.first();
    par::map_range(mask.len(), |n| {
        if !mask[n] {
            return 0.0;
        }
        (0..3)
            .map(|a| {
                let f = g[a].data();
                (1..=2)
                    .map(|m| {
                        w[m - 1] * (shifted(grid, mask, f, n, a, m as isize) - shifted(grid, mask, f, n, a, -(m as isize)))
                    })
                    .sum::<f64>()
                    / grid.h[a]
            })
            .sum()
    })
}

/// The function on the mask, zero elsewhere, whose discrete Laplacian
/// matches the divergence of `g`: the least-squares potential of `g`.
/// Returns the potential and the relative CG residual.
pub fn recover_potential(
    grid: &Grid,
    mask: &[bool],
    g: &NodeVec,
    order: StencilOrder,
    tol: f64,
    max_iter: usize,
) -> Result<(Field3, f64)> {
    let rhs: Vec<f64> = masked_divergence(grid, g, mask, order).iter().map(|v| -v).collect();
    let (x, r) = Poisson { grid, mask, order }.solve(&rhs, tol, max_iter)?;
    Ok((Field3::from_vec(grid.node_dims(), x), r))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub order: StencilOrder,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: DEFAULT_TOL_FP,
            max_iter: DEFAULT_MAX_ITER,
            cg_tol: DEFAULT_CG_TOL,
            cg_max_iter: 10_000,
            order: StencilOrder::Fourth,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub alpha: Field3,
    pub beta: Field3,
    pub gamma: Field3,
    pub xi: Field3,
    pub grad_xi: NodeVec,
    /// Least-squares gradients of the final iterate.
    pub grad_alpha: NodeVec,
    pub grad_beta: NodeVec,
    pub iterations: usize,
    /// Relative change of `(α, β)` per iteration.
    pub changes: Vec<f64>,
    /// Relative least-squares residual `‖My − r‖/‖r‖` summed over `Ω₀`.
    pub ls_residual: f64,
    pub poisson_residual: f64,
    pub xi_fd_gap: f64,
}

fn l2_on(mask: &[bool], grid: &Grid, f: &[f64]) -> f64 {
    let d = grid.node_dims();
    let s: f64 = (0..f.len())
        .filter(|&n| mask[n])
        .map(|n| {
            let (i, j, k) = (n % d[0], (n / d[0]) % d[1], n / (d[0] * d[1]));
            grid.node_weight(i, j, k) * f[n] * f[n]
        })
        .sum();
    s.sqrt()
}

/// Fixed-point reconstruction of `(α, β, γ)`, plus `ξ` and `∇ξ`.
pub fn reconstruct(sys: &ReconstructionSystem, opts: &FixedPointOptions) -> Result<ReconstructionResult> {
    let g = &sys.grid;
    let dims = g.node_dims();
    let len = sys.interior.len();
    let mut alpha = vec![0.0; len];
    let mut beta = vec![0.0; len];
    let mut changes = Vec::new();
    let mut ys: Vec<Vec7>;
    let mut presid;
    loop {
        ys = par::map_range(sys.nodes.len(), |p| {
            let s = &sys.nodes[p];
            s.solve(alpha[s.node], beta[s.node])
        });
        let mut ga = node_vec_zeros(g.n);
        let mut gb = node_vec_zeros(g.n);
        for (s, y) in sys.nodes.iter().zip(&ys) {
            for c in 0..3 {
                ga[c].data_mut()[s.node] = y[c];
                gb[c].data_mut()[s.node] = y[4 + c];
            }
        }
        let solve = |v: &NodeVec| recover_potential(g, &sys.interior, v, opts.order, opts.cg_tol, opts.cg_max_iter);
        let (na, ra) = solve(&ga)?;
        let (nb, rb) = solve(&gb)?;
        let (na, nb) = (na.into_vec(), nb.into_vec());
        presid = ra.max(rb);
        let diff: Vec<f64> = (0..len).map(|n| na[n] - alpha[n]).collect();
        let diffb: Vec<f64> = (0..len).map(|n| nb[n] - beta[n]).collect();
        let size = l2_on(&sys.interior, g, &na) + l2_on(&sys.interior, g, &nb);
        let delta = l2_on(&sys.interior, g, &diff) + l2_on(&sys.interior, g, &diffb);
        let change = if size > 0.0 { delta / size } else { delta };
        changes.push(change);
        alpha = na;
        beta = nb;
        if sys.decoupled || change < opts.tol {
            break;
        }
        if changes.len() >= opts.max_iter {
            let k = changes.len();
            let rate = if k >= 2 { changes[k - 1] / changes[k - 2] } else { f64::NAN };
            return Err(Error::NoConvergence(format!(
                "fixed point not reached in {k} iterations: last change {change:e}, contraction estimate {rate:.3}"
            )));
        }
    }
    // γ and the gradients at the final iterate.
    ys = par::map_range(sys.nodes.len(), |p| {
        let s = &sys.nodes[p];
        s.solve(alpha[s.node], beta[s.node])
    });
    let mut gamma = Field3::zeros(dims);
    let mut grad_alpha = node_vec_zeros(g.n);
    let mut grad_beta = node_vec_zeros(g.n);
    let (mut res2, mut rhs2) = (0.0, 0.0);
    for (s, y) in sys.nodes.iter().zip(&ys) {
        gamma.data_mut()[s.node] = y[3];
        for c in 0..3 {
            grad_alpha[c].data_mut()[s.node] = y[c];
            grad_beta[c].data_mut()[s.node] = y[4 + c];
        }
        let r = s.n * SVector::<f64, 2>::new(alpha[s.node], beta[s.node]) + s.b;
        res2 += (s.m * y - r).norm_squared();
        rhs2 += r.norm_squared();
    }
    let ls_residual = if rhs2 > 0.0 { (res2 / rhs2).sqrt() } else { 0.0 };
    let xi = recover_xi(sys)?;
    Ok(ReconstructionResult {
        alpha: Field3::from_vec(dims, alpha),
        beta: Field3::from_vec(dims, beta),
        gamma,
        xi: xi.xi,
        grad_xi: xi.grad,
        grad_alpha,
        grad_beta,
        iterations: changes.len(),
        changes,
        ls_residual,
        poisson_residual: presid,
        xi_fd_gap: xi.fd_gap,
    })
}

/// Relative L²(Ω₀) error `‖f − truth‖/‖truth‖` (absolute when the truth
/// vanishes).
pub fn relative_error(grid: &Grid, f: &Field3, truth: &Field3) -> f64 {
    let mask = interior_mask(grid);
    let diff: Vec<f64> = f.data().iter().zip(truth.data()).map(|(a, b)| a - b).collect();
    let t = l2_on(&mask, grid, truth.data());
    let e = l2_on(&mask, grid, &diff);
    if t > 0.0 {
        e / t
    } else {
        e
    }
}

impl ReconstructionResult {
    /// Relative errors of `(α, β, γ, ξ)` against the true differences.
    pub fn errors(&self, grid: &Grid, truth: [&Field3; 4]) -> [f64; 4] {
        [
            relative_error(grid, &self.alpha, truth[0]),
            relative_error(grid, &self.beta, truth[1]),
            relative_error(grid, &self.gamma, truth[2]),
            relative_error(grid, &self.xi, truth[3]),
        ]
    }

    /// True when every recovered field vanishes off `Ω₀`.
    pub fn supported_in_interior(&self, grid: &Grid) -> bool {
        let mask = interior_mask(grid);
        let fields = [&self.alpha, &self.beta, &self.gamma, &self.xi];
        (0..mask.len()).filter(|&n| !mask[n]).all(|n| fields.iter().all(|f| f.data()[n] == 0.0))
    }
}
