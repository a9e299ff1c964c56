//! Spectral Galerkin reference solver for the Biot system with constant
//! coefficients.
//!
//! In scaled coordinates `ξ = (x − lower)/extent`, component `c` of a basis
//! field is `cos(πk_c ξ_c) Π_{d≠c} sin(πk_d ξ_d)`, for both `u` and `w`.
//! Then `div u` and `div w` are products of sines, so `p = 0` and the normal
//! stress vanish on every face. The tangential displacement also vanishes
//! there, so the shear traction is not zero. Comparisons with the FD solver
//! are therefore restricted to times before any wave reaches the boundary.
//!
//! All six fields with the same wave vector `k` span an invariant subspace,
//! so the Gram matrices are block diagonal with 6×6 blocks.

use nalgebra::{DMatrix, Matrix6, SymmetricEigen, Vector6};

use crate::biot::{cfl_limit, BiotSolver, BiotState, DEFAULT_BIOT_CFL};
use crate::field::{Field3, NodeVec};
use crate::grid::{build_domain, Domain, Resolution};
use crate::params::{check_admissibility, wave_speed_fields, ParameterFields, UniformParams, DEFAULT_MARGIN_THRESHOLD};
use crate::quad::gauss_legendre;
use crate::{par, Error, Result};

/// Largest supported number of modes per axis.
pub const MAX_MODES: usize = 64;

/// Constant Biot coefficients with `damping = η/κ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub rho: f64,
    pub rho_f: f64,
    pub rho_e: f64,
    pub damping: f64,
    pub lambda: f64,
    pub shear: f64,
    pub biot_c: f64,
    pub biot_m: f64,
}

impl Material {
    /// Checks admissibility and extracts the Biot part of `v`.
    pub fn from_uniform(v: &UniformParams) -> Result<Self> {
        let p = ParameterFields::uniform([1, 1, 1], v)?;
        let report = check_admissibility(&p, DEFAULT_MARGIN_THRESHOLD);
        if !report.all_pass() {
            let names: Vec<&str> = report.failures().iter().map(|c| c.name).collect();
            return Err(Error::Inadmissible(names.join(", ")));
        }
        Ok(Material {
            rho: v.rho,
            rho_f: v.rho_f,
            rho_e: v.rho_e,
            damping: v.viscosity / v.permeability,
            lambda: v.lambda,
            shear: v.shear,
            biot_c: v.biot_c,
            biot_m: v.biot_m,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Sin = 0,
    Cos = 1,
}

/// A separable function `coef · Π_d f_{kind_d}(πk_d ξ_d)`.
#[derive(Clone, Copy, Debug)]
struct Term {
    coef: f64,
    kinds: [Kind; 3],
}

impl Term {
    fn value(comp: usize) -> Term {
        Term {
            coef: 1.0,
            kinds: std::array::from_fn(|d| if d == comp { Kind::Cos } else { Kind::Sin }),
        }
    }

    fn deriv(self, axis: usize, kappa: f64) -> Term {
        let mut t = self;
        match self.kinds[axis] {
            Kind::Sin => {
                t.kinds[axis] = Kind::Cos;
                t.coef *= kappa;
            }
            Kind::Cos => {
                t.kinds[axis] = Kind::Sin;
                t.coef *= -kappa;
            }
        }
        t
    }
}

/// Gram data of one wave vector. Slots `0..3` are `u` components, `3..6`
/// are `w` components.
#[derive(Clone, Debug)]
pub struct Block {
    pub k: [usize; 3],
    pub active: [bool; 6],
    /// `(φ_i, φ_j)` in L².
    pub l2: Matrix6<f64>,
    /// `(Aφ_i, φ_j)`.
    pub mass: Matrix6<f64>,
    /// `(Bφ_i, φ_j)`.
    pub damp: Matrix6<f64>,
    /// `𝓑(φ_i, φ_j)`.
    pub stiff: Matrix6<f64>,
    /// V inner product: `‖u‖²_{H¹} + ‖w‖² + ‖div w‖²`.
    pub v: Matrix6<f64>,
}

#[derive(Clone, Debug)]
pub struct GalerkinBasis {
    /// Largest wave number per axis; `k_d ∈ 0..=m`.
    pub m: usize,
    pub lower: [f64; 3],
    pub extent: [f64; 3],
    pub material: Material,
    pub blocks: Vec<Block>,
    /// Korn-type constant: smallest `𝓑(v,v)/|v|²_V` over the basis, with
    /// `|·|_V` the V seminorm.
    pub korn: f64,
    /// Shift making `𝓑_θ = 𝓑 + θ(·,·)` satisfy `𝓑_θ(v,v) ≥ korn ‖v‖²_V`.
    pub theta: f64,
}

/// 1-D integrals `∫ f_p f_q` over one axis for wave number `k`, `[p][q]`
/// indexed by `Kind`. Gauss–Legendre, doubled until two levels agree to 1e-8.
fn axis_integrals(m: usize, len: f64) -> Vec<[[f64; 2]; 2]> {
    let eval = |npts: usize| -> Vec<[[f64; 2]; 2]> {
        let rule = gauss_legendre(npts, 0.0, 1.0);
        (0..=m)
            .map(|k| {
                let mut out = [[0.0; 2]; 2];
                for &(x, w) in &rule {
                    let a = std::f64::consts::PI * k as f64 * x;
                    let f = [a.sin(), a.cos()];
                    for p in 0..2 {
                        for q in 0..2 {
                            out[p][q] += w * len * f[p] * f[q];
                        }
                    }
                }
                out
            })
            .collect()
    };
    let mut npts = 2 * m + 24;
    let mut cur = eval(npts);
    for _ in 0..6 {
        npts *= 2;
        let next = eval(npts);
        let diff = cur
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| (0..4).map(move |i| (a[i / 2][i % 2] - b[i / 2][i % 2]).abs()))
            .fold(0.0, f64::max);
        cur = next;
        if diff <= 1e-8 * len {
            break;
        }
    }
    cur
}

fn block_index(m: usize, k: [usize; 3]) -> usize {
    k[0] + (m + 1) * (k[1] + (m + 1) * k[2])
}

/// Assembles the block Gram matrices for modes `k_d ∈ 0..=m` on the box
/// `[lower, lower + extent]`.
pub fn assemble_galerkin(
    material: Material,
    m: usize,
    lower: [f64; 3],
    extent: [f64; 3],
) -> Result<GalerkinBasis> {
    if m == 0 || m > MAX_MODES {
        return Err(Error::Invalid(format!("mode count must be in 1..={MAX_MODES}, got {m}")));
    }
    let ints: [Vec<[[f64; 2]; 2]>; 3] = std::array::from_fn(|d| axis_integrals(m, extent[d]));
    let nb = (m + 1).pow(3);
    let blocks = par::map_range(nb, |b| {
        let k = [b % (m + 1), (b / (m + 1)) % (m + 1), b / ((m + 1) * (m + 1))];
        assemble_block(&material, k, extent, &ints)
    });
    for blk in &blocks {
        let cond = active_condition(&blk.v, &blk.active);
        if cond > 1e8 {
            return Err(Error::Degenerate(format!(
                "ill-conditioned basis at k = {:?} (condition {cond:e})",
                blk.k
            )));
        }
    }
    let korn = blocks
        .iter()
        .filter_map(korn_quotient)
        .fold(f64::INFINITY, f64::min);
    Ok(GalerkinBasis {
        m,
        lower,
        extent,
        material,
        blocks,
        korn,
        theta: korn,
    })
}

fn assemble_block(mat: &Material, k: [usize; 3], extent: [f64; 3], ints: &[Vec<[[f64; 2]; 2]>; 3]) -> Block {
    let kappa: [f64; 3] = std::array::from_fn(|d| std::f64::consts::PI * k[d] as f64 / extent[d]);
    let inner = |a: &Term, b: &Term| -> f64 {
        let mut v = a.coef * b.coef;
        for d in 0..3 {
            v *= ints[d][k[d]][a.kinds[d] as usize][b.kinds[d] as usize];
        }
        v
    };
    let active: [bool; 6] = std::array::from_fn(|s| (0..3).all(|d| d == s % 3 || k[d] >= 1));
    let val: [Term; 3] = std::array::from_fn(Term::value);
    let grad: [[Term; 3]; 3] = std::array::from_fn(|c| std::array::from_fn(|e| val[c].deriv(e, kappa[e])));
    // Strain of the field with only component c nonzero: ε_de = ½(δ_dc ∂_e + δ_ec ∂_d).
    let strain = |c: usize, d: usize, e: usize| -> Vec<Term> {
        let mut v = Vec::new();
        if d == c {
            v.push(Term {
                coef: 0.5 * grad[c][e].coef,
                ..grad[c][e]
            });
        }
        if e == c {
            v.push(Term {
                coef: 0.5 * grad[c][d].coef,
                ..grad[c][d]
            });
        }
        v
    };
    let mut l2 = Matrix6::<f64>::zeros();
    let mut h1 = Matrix6::<f64>::zeros();
    let mut divdiv = Matrix6::<f64>::zeros();
    let mut eps = Matrix6::<f64>::zeros();
    for s in 0..6 {
        for t in 0..6 {
            if !(active[s] && active[t]) {
                continue;
            }
            let (cs, ct) = (s % 3, t % 3);
            if cs == ct {
                l2[(s, t)] = inner(&val[cs], &val[ct]);
                h1[(s, t)] = (0..3).map(|e| inner(&grad[cs][e], &grad[ct][e])).sum();
            }
            divdiv[(s, t)] = inner(&grad[cs][cs], &grad[ct][ct]);
            let mut e2 = 0.0;
            for d in 0..3 {
                for e in 0..3 {
                    for a in strain(cs, d, e) {
                        for b in strain(ct, d, e) {
                            e2 += inner(&a, &b);
                        }
                    }
                }
            }
            eps[(s, t)] = e2;
        }
    }
    let mut mass = Matrix6::<f64>::zeros();
    let mut damp = Matrix6::<f64>::zeros();
    let mut stiff = Matrix6::<f64>::zeros();
    let mut v = Matrix6::<f64>::zeros();
    for s in 0..6 {
        for t in 0..6 {
            let (fs, ft) = (s >= 3, t >= 3);
            let (a, kk) = match (fs, ft) {
                (false, false) => (
                    mat.rho,
                    mat.lambda * divdiv[(s, t)] + 2.0 * mat.shear * eps[(s, t)],
                ),
                (true, true) => (mat.rho_e, mat.biot_m * divdiv[(s, t)]),
                _ => (mat.rho_f, mat.biot_c * divdiv[(s, t)]),
            };
            mass[(s, t)] = a * l2[(s, t)];
            stiff[(s, t)] = kk;
            if fs && ft {
                damp[(s, t)] = mat.damping * l2[(s, t)];
                v[(s, t)] = l2[(s, t)] + divdiv[(s, t)];
            } else if !fs && !ft {
                v[(s, t)] = l2[(s, t)] + h1[(s, t)];
            }
        }
    }
    Block {
        k,
        active,
        l2,
        mass,
        damp,
        stiff,
        v,
    }
}

fn restrict(a: &Matrix6<f64>, active: &[bool; 6]) -> DMatrix<f64> {
    let idx: Vec<usize> = (0..6).filter(|&s| active[s]).collect();
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

fn active_condition(v: &Matrix6<f64>, active: &[bool; 6]) -> f64 {
    let r = restrict(v, active);
    if r.nrows() == 0 {
        return 1.0;
    }
    let e = SymmetricEigen::new(r).eigenvalues;
    let (lo, hi) = e.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Smallest `𝓑(v,v)/|v|²_V` over the range of the V seminorm in one block.
fn korn_quotient(b: &Block) -> Option<f64> {
    let mut semi = b.v;
    for s in 0..6 {
        for t in 0..6 {
            if (s < 3) == (t < 3) {
                semi[(s, t)] -= b.l2[(s, t)];
            }
        }
    }
    let semi = restrict(&semi, &b.active);
    if semi.nrows() == 0 {
        return None;
    }
    let stiff = restrict(&b.stiff, &b.active);
    let e = SymmetricEigen::new(semi);
    let top = e.eigenvalues.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return None;
    }
    let keep: Vec<usize> = (0..e.eigenvalues.len())
        .filter(|&i| e.eigenvalues[i] > 1e-12 * top)
        .collect();
    let q = DMatrix::from_fn(stiff.nrows(), keep.len(), |r, c| {
        e.eigenvectors[(r, keep[c])] / e.eigenvalues[keep[c]].sqrt()
    });
    let reduced = q.transpose() * stiff * &q;
    let sym = 0.5 * (&reduced + reduced.transpose());
    SymmetricEigen::new(sym).eigenvalues.iter().copied().reduce(f64::min)
}

impl GalerkinBasis {
    pub fn block(&self, k: [usize; 3]) -> &Block {
        &self.blocks[block_index(self.m, k)]
    }

    fn factor(&self, axis: usize, kind: Kind, k: usize, x: f64) -> f64 {
        let a = std::f64::consts::PI * k as f64 * (x - self.lower[axis]) / self.extent[axis];
        match kind {
            Kind::Sin => a.sin(),
            Kind::Cos => a.cos(),
        }
    }

    /// Load vectors `(F, φ_i)` of a field `f(x) = (f_u, f_w)` that vanishes
    /// outside the box `region`. Tensor Gauss–Legendre on the box, doubled
    /// until two levels agree to `tol` relative or 512 points per axis.
    pub fn project<F>(&self, f: F, region: ([f64; 3], [f64; 3]), tol: f64) -> Vec<[f64; 6]>
    where
        F: Fn([f64; 3]) -> [f64; 6] + Sync + Send,
    {
        let mut q = 2 * self.m + 16;
        let mut cur = self.project_with(&f, region, q);
        while q < 512 {
            q *= 2;
            let next = self.project_with(&f, region, q);
            let scale = next.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            let diff = cur
                .iter()
                .flatten()
                .zip(next.iter().flatten())
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            cur = next;
            if diff <= tol * scale.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        cur
    }

    fn project_with<F>(&self, f: &F, region: ([f64; 3], [f64; 3]), q: usize) -> Vec<[f64; 6]>
    where
        F: Fn([f64; 3]) -> [f64; 6] + Sync + Send,
    {
        let rules: [Vec<(f64, f64)>; 3] = std::array::from_fn(|d| gauss_legendre(q, region.0[d], region.1[d]));
        let samples = par::map_range(q * q * q, |p| {
            let (i, j, k) = (p % q, (p / q) % q, p / (q * q));
            let x = [rules[0][i].0, rules[1][j].0, rules[2][k].0];
            let w = rules[0][i].1 * rules[1][j].1 * rules[2][k].1;
            f(x).map(|v| v * w)
        });
        let mut out = vec![[0.0; 6]; self.blocks.len()];
        for s in 0..6 {
            let data: Vec<f64> = samples.iter().map(|v| v[s]).collect();
            let coef = self.analysis(&data, &rules, s % 3);
            for (o, c) in out.iter_mut().zip(coef) {
                o[s] = c;
            }
        }
        for (o, b) in out.iter_mut().zip(&self.blocks) {
            for s in 0..6 {
                if !b.active[s] {
                    o[s] = 0.0;
                }
            }
        }
        out
    }

    /// `Σ_x data(x) Π_d f_d(k_d, x_d)` for all `k`, axis by axis.
    fn analysis(&self, data: &[f64], rules: &[Vec<(f64, f64)>; 3], comp: usize) -> Vec<f64> {
        let mk = self.m + 1;
        let kind = |d: usize| if d == comp { Kind::Cos } else { Kind::Sin };
        let mut cur = data.to_vec();
        let mut dims = [rules[0].len(), rules[1].len(), rules[2].len()];
        for axis in 0..3 {
            let table: Vec<Vec<f64>> = (0..mk)
                .map(|k| rules[axis].iter().map(|&(x, _)| self.factor(axis, kind(axis), k, x)).collect())
                .collect();
            cur = transform_axis(&cur, dims, axis, &table);
            dims[axis] = mk;
        }
        cur
    }

    /// Field values `[u; w]` of the coefficient set at the tensor points `xs`.
    pub fn synthesize(&self, coef: &[[f64; 6]], xs: &[Vec<f64>; 3]) -> [Field3; 6] {
        let mk = self.m + 1;
        std::array::from_fn(|s| {
            let comp = s % 3;
            let kind = |d: usize| if d == comp { Kind::Cos } else { Kind::Sin };
            let mut cur: Vec<f64> = coef.iter().map(|c| c[s]).collect();
            let mut dims = [mk; 3];
            for axis in 0..3 {
                let table: Vec<Vec<f64>> = xs[axis]
                    .iter()
                    .map(|&x| (0..mk).map(|k| self.factor(axis, kind(axis), k, x)).collect())
                    .collect();
                cur = transform_axis(&cur, dims, axis, &table);
                dims[axis] = xs[axis].len();
            }
            Field3::from_vec(dims, cur)
        })
    }

    /// `‖Π F‖²` of a load vector set (L² norm of the projection).
    pub fn load_norm_sq(&self, load: &[[f64; 6]]) -> f64 {
        par::sum_range(self.blocks.len(), |b| {
            let blk = &self.blocks[b];
            let f = Vector6::from_row_slice(&load[b]);
            (0..6)
                .filter(|&s| blk.active[s])
                .map(|s| f[s] * f[s] / blk.l2[(s, s)])
                .sum()
        })
    }
}

/// Applies `out[.., r, ..] = Σ_i table[r][i] · data[.., i, ..]` along `axis`.
fn transform_axis(data: &[f64], dims: [usize; 3], axis: usize, table: &[Vec<f64>]) -> Vec<f64> {
    let rows = table.len();
    let mut nd = dims;
    nd[axis] = rows;
    let stride = [1, dims[0], dims[0] * dims[1]];
    par::map_range(nd[0] * nd[1] * nd[2], |o| {
        let idx = [o % nd[0], (o / nd[0]) % nd[1], o / (nd[0] * nd[1])];
        let mut base = 0;
        for d in 0..3 {
            if d != axis {
                base += idx[d] * stride[d];
            }
        }
        let row = &table[idx[axis]];
        row.iter()
            .enumerate()
            .map(|(i, t)| t * data[base + i * stride[axis]])
            .sum()
    })
}

/// Coefficients sampled at `times`, with the energy diagnostics.
#[derive(Clone, Debug)]
pub struct GalerkinTrajectory {
    pub times: Vec<f64>,
    /// `coeffs[sample][block]`.
    pub coeffs: Vec<Vec<[f64; 6]>>,
    /// `‖A^{1/2} ṙ‖² + 𝓑_θ(r, r)`.
    pub energy: Vec<f64>,
    /// `‖r‖²_V + ‖ṙ‖²`.
    pub gronwall: Vec<f64>,
    /// `∫_0^t ‖Π F‖²`.
    pub forcing: Vec<f64>,
}

impl GalerkinTrajectory {
    /// Largest `energy(t) / forcing(t)` over samples with nonzero forcing.
    pub fn energy_constant(&self) -> f64 {
        self.energy
            .iter()
            .zip(&self.forcing)
            .filter(|(_, f)| **f > 0.0)
            .map(|(e, f)| e / f)
            .fold(0.0, f64::max)
    }

    pub fn gronwall_sup(&self) -> f64 {
        self.gronwall.iter().copied().fold(0.0, f64::max)
    }
}

/// Integrates `A r̈ + B ṙ + 𝓑 r = φ(t) F` from rest with classical RK4.
/// Coefficients are stored every `sample_every` steps, including `t = 0`.
pub fn solve_galerkin<P>(
    basis: &GalerkinBasis,
    load: &[[f64; 6]],
    modulation: P,
    dt_ode: f64,
    steps: usize,
    sample_every: usize,
) -> Result<GalerkinTrajectory>
where
    P: Fn(f64) -> f64 + Sync + Send,
{
    if load.len() != basis.blocks.len() {
        return Err(Error::Invalid("load vector does not match the basis".into()));
    }
    let every = sample_every.max(1);
    let n_samples = steps / every + 1;
    let theta = basis.theta;
    let per_block = par::map_range(basis.blocks.len(), |b| {
        let blk = &basis.blocks[b];
        let mut mass = blk.mass;
        for s in 0..6 {
            if !blk.active[s] {
                mass[(s, s)] = 1.0;
            }
        }
        let inv = mass.try_inverse().unwrap_or_else(Matrix6::zeros);
        let ak = inv * blk.stiff;
        let ab = inv * blk.damp;
        let af = inv * Vector6::from_row_slice(&load[b]);
        let kt = blk.stiff + theta * blk.l2;
        let rhs = |t: f64, x: &Vector6<f64>, v: &Vector6<f64>| af * modulation(t) - ab * v - ak * x;
        let mut x = Vector6::zeros();
        let mut v = Vector6::zeros();
        let mut out = Vec::with_capacity(n_samples);
        let record = |x: &Vector6<f64>, v: &Vector6<f64>, out: &mut Vec<([f64; 6], f64, f64)>| {
            let e = (v.transpose() * blk.mass * v)[0] + (x.transpose() * kt * x)[0];
            let g = (x.transpose() * blk.v * x)[0] + (v.transpose() * blk.l2 * v)[0];
            out.push(([x[0], x[1], x[2], x[3], x[4], x[5]], e, g));
        };
        record(&x, &v, &mut out);
        for step in 0..steps {
            let t = step as f64 * dt_ode;
            let h = dt_ode;
            let k1x = v;
            let k1v = rhs(t, &x, &v);
            let k2x = v + 0.5 * h * k1v;
            let k2v = rhs(t + 0.5 * h, &(x + 0.5 * h * k1x), &k2x);
            let k3x = v + 0.5 * h * k2v;
            let k3v = rhs(t + 0.5 * h, &(x + 0.5 * h * k2x), &k3x);
            let k4x = v + h * k3v;
            let k4v = rhs(t + h, &(x + h * k3x), &k4x);
            x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if (step + 1) % every == 0 {
                record(&x, &v, &mut out);
            }
        }
        out
    });
    let load_sq = basis.load_norm_sq(load);
    let mut times = Vec::with_capacity(n_samples);
    let mut coeffs = Vec::with_capacity(n_samples);
    let mut energy = Vec::with_capacity(n_samples);
    let mut gronwall = Vec::with_capacity(n_samples);
    let mut forcing = Vec::with_capacity(n_samples);
    let mut acc = 0.0;
    let mut last_step = 0;
    for i in 0..n_samples {
        let step = i * every;
        for s in last_step..step {
            // Simpson's rule for ∫ φ² over one ODE step.
            let t = s as f64 * dt_ode;
            let f = |t: f64| modulation(t).powi(2);
            acc += dt_ode / 6.0 * (f(t) + 4.0 * f(t + 0.5 * dt_ode) + f(t + dt_ode));
        }
        last_step = step;
        let c: Vec<[f64; 6]> = per_block.iter().map(|p| p[i].0).collect();
        if c.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step });
        }
        times.push(step as f64 * dt_ode);
        coeffs.push(c);
        energy.push(per_block.iter().map(|p| p[i].1).sum());
        gronwall.push(per_block.iter().map(|p| p[i].2).sum());
        forcing.push(acc * load_sq);
    }
    Ok(GalerkinTrajectory {
        times,
        coeffs,
        energy,
        gronwall,
        forcing,
    })
}

/// Fastest Biot wave speed of the material.
pub fn max_biot_speed(v: &UniformParams) -> Result<f64> {
    let p = ParameterFields::uniform([1, 1, 1], v)?;
    let s = wave_speed_fields(&p)?;
    Ok(s[1..].iter().map(|f| f.max()).fold(0.0, f64::max).sqrt())
}

/// Largest angular frequency of the block system, `max √eig(A⁻¹𝓑)`.
pub fn max_frequency(basis: &GalerkinBasis) -> f64 {
    basis
        .blocks
        .iter()
        .map(|b| {
            let a = restrict(&b.mass, &b.active);
            let k = restrict(&b.stiff, &b.active);
            if a.nrows() == 0 {
                return 0.0;
            }
            let l = a.cholesky().map(|c| c.l()).unwrap();
            let li = l.try_inverse().unwrap();
            let s = &li * k * li.transpose();
            let s = 0.5 * (&s + s.transpose());
            SymmetricEigen::new(s).eigenvalues.iter().copied().fold(0.0, f64::max).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Setup of the Galerkin / FD comparison on the unit cube.
#[derive(Clone, Debug)]
pub struct OracleSetup {
    pub material: UniformParams,
    /// FD cells per axis.
    pub n: usize,
    /// Galerkin modes per axis.
    pub m: usize,
    pub center: [f64; 3],
    pub radius: f64,
    /// Force direction on the solid and on the fluid equation.
    pub amp_u: [f64; 3],
    pub amp_w: [f64; 3],
    /// Window length as a fraction of the travel time from the support to
    /// the nearest face.
    pub window: f64,
}

impl Default for OracleSetup {
    fn default() -> Self {
        OracleSetup {
            material: UniformParams::default(),
            n: 32,
            m: 32,
            center: [0.5, 0.5, 0.5],
            radius: 0.3,
            amp_u: [1.0, -0.5, 0.25],
            amp_w: [0.5, 0.75, -1.0],
            window: 0.9,
        }
    }
}

impl OracleSetup {
    /// Smooth compact profile `(1 − r²/R²)⁶`.
    pub fn profile(&self, x: [f64; 3]) -> f64 {
        let r2: f64 = (0..3).map(|d| (x[d] - self.center[d]).powi(2)).sum();
        let s = 1.0 - r2 / (self.radius * self.radius);
        if s > 0.0 {
            s.powi(6)
        } else {
            0.0
        }
    }

    pub fn force(&self, x: [f64; 3]) -> [f64; 6] {
        let g = self.profile(x);
        [
            g * self.amp_u[0],
            g * self.amp_u[1],
            g * self.amp_u[2],
            g * self.amp_w[0],
            g * self.amp_w[1],
            g * self.amp_w[2],
        ]
    }

    /// Distance from the support to the nearest face of the unit cube.
    pub fn support_box(&self) -> ([f64; 3], [f64; 3]) {
        (self.center.map(|c| c - self.radius), self.center.map(|c| c + self.radius))
    }

    pub fn clearance(&self) -> f64 {
        self.center
            .iter()
            .map(|&c| c.min(1.0 - c))
            .fold(f64::INFINITY, f64::min)
            - self.radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub n: usize,
    pub m: usize,
    pub t_end: f64,
    pub levels: usize,
    /// Relative L²(Q) difference over all six components.
    pub rel_l2: f64,
    pub galerkin_norm: f64,
}

/// Runs both solvers on the same interior source, modulated by
/// `sin²(πt/T)`, and compares them at every FD level in `[0, T]`.
pub fn oracle_agreement(setup: &OracleSetup) -> Result<OracleReport> {
    let clearance = setup.clearance();
    if !(clearance > 0.0) {
        return Err(Error::Invalid("oracle source must lie strictly inside the cube".into()));
    }
    let material = Material::from_uniform(&setup.material)?;
    let t_end = setup.window * clearance / max_biot_speed(&setup.material)?;
    let (_, mut grid) = build_domain(
        Domain::unit_cube(0.25, t_end, 0.5 * t_end),
        Resolution {
            n: [setup.n; 3],
            dt_max: None,
        },
    )?;
    let params = ParameterFields::uniform(grid.node_dims(), &setup.material)?;
    let limit = cfl_limit(&grid, &params, DEFAULT_BIOT_CFL)?;
    grid.retime(t_end, limit);
    let solver = BiotSolver::new(&grid, &params, DEFAULT_BIOT_CFL)?;
    let modulation = |t: f64| (std::f64::consts::PI * t / t_end).sin().powi(2);

    let basis = assemble_galerkin(material, setup.m, [0.0; 3], [1.0; 3])?;
    let load = basis.project(|x| setup.force(x), setup.support_box(), 1e-8);
    let omega = max_frequency(&basis);
    // RK4 steps with ω·dt ≤ 1 keep the fastest mode accurate to ~1e-3.
    let sub = ((grid.dt * omega).ceil() as usize).max(1);
    let traj = solve_galerkin(&basis, &load, modulation, grid.dt / sub as f64, grid.n_t * sub, sub)?;

    let nd = grid.node_dims();
    let xs: [Vec<f64>; 3] = std::array::from_fn(|d| (0..nd[d]).map(|i| grid.lower[d] + i as f64 * grid.h[d]).collect());
    let base: [Field3; 6] = std::array::from_fn(|s| Field3::from_fn(nd, |i, j, k| setup.force(grid.node(i, j, k))[s]));
    let weights: Vec<f64> = (0..grid.node_count())
        .map(|n| {
            let [i, j, k] = base[0].ijk(n);
            grid.node_weight(i, j, k)
        })
        .collect();

    let mut state = BiotState::zero(&grid);
    let (mut diff, mut norm) = (0.0, 0.0);
    for level in 0..=grid.n_t {
        let g = basis.synthesize(&traj.coeffs[level], &xs);
        let fd: [&Field3; 6] = [&state.u[0], &state.u[1], &state.u[2], &state.w[0], &state.w[1], &state.w[2]];
        for s in 0..6 {
            for (n, (a, b)) in fd[s].data().iter().zip(g[s].data()).enumerate() {
                diff += weights[n] * (a - b).powi(2);
                norm += weights[n] * b * b;
            }
        }
        if level == grid.n_t {
            break;
        }
        let scale = modulation(grid.time(level));
        let fu: NodeVec = std::array::from_fn(|c| base[c].map(|v| v * scale));
        let fw: NodeVec = std::array::from_fn(|c| base[c + 3].map(|v| v * scale));
        solver.step(&mut state, None, Some((&fu, &fw)))?;
    }
    Ok(OracleReport {
        n: setup.n,
        m: setup.m,
        t_end,
        levels: grid.n_t,
        rel_l2: (diff / norm).sqrt(),
        galerkin_norm: (norm * grid.dt).sqrt(),
    })
}
