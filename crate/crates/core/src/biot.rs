//! Explicit time stepping of the damped Biot system
//!
//! ```text
//! ρ ∂ₜ²u + ρ_f ∂ₜ²w − div τ = f_u
//! ρ_f ∂ₜ²u + ρ_e ∂ₜ²w + ∇p + (η/κ) ∂ₜw = ξD + f_w
//! τ = (λ div u + C div w) I + G(∇u + ∇uᵀ),   p = −(C div u + M div w)
//! ```
//!
//! with traction-free, drained walls (`n·τ = 0`, `p = 0`). Displacements live
//! at grid nodes. The stiffness is the trilinear finite-element form with
//! 2×2×2 Gauss quadrature and a lumped (row-sum) mass, which is the
//! collocated second-order difference stencil whose natural boundary
//! conditions are exactly the traction-free/drained ones.

use crate::error::{Error, Result};
use crate::field::{node_vec_zeros, Field3, NodeVec};
use crate::grid::Grid;
use crate::par;
use crate::params::{wave_speed_fields, ParameterFields};

pub const DEFAULT_BIOT_CFL: f64 = 0.4;

/// Solid and relative fluid displacement at two consecutive levels, plus the
/// cached constitutive fields of the current level.
#[derive(Clone, Debug, PartialEq)]
pub struct BiotState {
    pub u: NodeVec,
    pub w: NodeVec,
    pub u_prev: NodeVec,
    pub w_prev: NodeVec,
    /// Stress components `xx, yy, zz, xy, xz, yz`.
    pub tau: [Field3; 6],
    pub p: Field3,
    pub level: usize,
    pub time: f64,
    initial_velocity: Option<Box<(NodeVec, NodeVec)>>,
}

impl BiotState {
    /// Zero displacements and velocities.
    pub fn zero(grid: &Grid) -> Self {
        let z = node_vec_zeros(grid.n);
        let d = grid.node_dims();
        BiotState {
            u: z.clone(),
            w: z.clone(),
            u_prev: z.clone(),
            w_prev: z,
            tau: std::array::from_fn(|_| Field3::zeros(d)),
            p: Field3::zeros(d),
            level: 0,
            time: 0.0,
            initial_velocity: None,
        }
    }

    /// Nonzero initial displacement and velocity (used by the energy and ODE
    /// checks; the coupled model always starts from rest).
    pub fn with_initial(
        solver: &BiotSolver,
        u0: NodeVec,
        w0: NodeVec,
        vu0: NodeVec,
        vw0: NodeVec,
    ) -> Self {
        let mut s = BiotState::zero(&solver.grid);
        s.u_prev = u0.clone();
        s.w_prev = w0.clone();
        s.u = u0;
        s.w = w0;
        s.initial_velocity = Some(Box::new((vu0, vw0)));
        solver.refresh_cache(&mut s);
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .chain(self.w.iter())
            .map(Field3::max_abs)
            .fold(0.0, f64::max)
    }
}

/// Symmetric 3×3 matrix from the packed `xx, yy, zz, xy, xz, yz` ordering.
pub fn tau_matrix(t: &[Field3; 6], n: usize) -> [[f64; 3]; 3] {
    let v = |c: usize| t[c].data()[n];
    [
        [v(0), v(3), v(4)],
        [v(3), v(1), v(5)],
        [v(4), v(5), v(2)],
    ]
}

/// Derivative of a node field along axis `d`: central in the interior,
/// second-order one-sided at the boundary.
#[inline]
pub fn node_derivative(f: &Field3, i: usize, j: usize, k: usize, d: usize, h: f64) -> f64 {
    let dims = f.dims();
    let p = [i, j, k];
    let at = |pos: usize| {
        let mut q = p;
        q[d] = pos;
        f.get(q[0], q[1], q[2])
    };
    let (m, last) = (p[d], dims[d] - 1);
    match last {
        0 => return 0.0,
        1 => return (at(1) - at(0)) / h,
        _ => {}
    }
    if m == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    } else if m == last {
        (3.0 * at(m) - 4.0 * at(m - 1) + at(m - 2)) / (2.0 * h)
    } else {
        (at(m + 1) - at(m - 1)) / (2.0 * h)
    }
}

/// Stress and pore pressure from nodal displacements by finite differences.
pub fn constitutive_with(
    grid: &Grid,
    u: &NodeVec,
    w: &NodeVec,
    lambda: &Field3,
    shear: &Field3,
    biot_c: &Field3,
    biot_m: &Field3,
) -> ([Field3; 6], Field3) {
    let dims = grid.node_dims();
    let h = grid.h;
    let vals = par::map_range(grid.node_count(), |n| {
        let [i, j, k] = lambda.ijk(n);
        let mut gu = [[0.0; 3]; 3];
        let mut divw = 0.0;
        for d in 0..3 {
            for c in 0..3 {
                gu[c][d] = node_derivative(&u[c], i, j, k, d, h[d]);
            }
            divw += node_derivative(&w[d], i, j, k, d, h[d]);
        }
        let divu = gu[0][0] + gu[1][1] + gu[2][2];
        let (la, g, c, m) = (
            lambda.data()[n],
            shear.data()[n],
            biot_c.data()[n],
            biot_m.data()[n],
        );
        let s = la * divu + c * divw;
        [
            s + 2.0 * g * gu[0][0],
            s + 2.0 * g * gu[1][1],
            s + 2.0 * g * gu[2][2],
            g * (gu[0][1] + gu[1][0]),
            g * (gu[0][2] + gu[2][0]),
            g * (gu[1][2] + gu[2][1]),
            -(c * divu + m * divw),
        ]
    });
    let tau = std::array::from_fn(|c| Field3::from_vec(dims, vals.iter().map(|v| v[c]).collect()));
    let p = Field3::from_vec(dims, vals.iter().map(|v| v[6]).collect());
    (tau, p)
}

pub fn constitutive(
    grid: &Grid,
    u: &NodeVec,
    w: &NodeVec,
    params: &ParameterFields,
) -> ([Field3; 6], Field3) {
    constitutive_with(
        grid,
        u,
        w,
        &params.lambda,
        &params.shear,
        &params.biot_c,
        &params.biot_m,
    )
}

/// Solves `[[a, b], [b, d]] x = r` in closed form.
#[inline]
pub fn solve_sym2(a: f64, b: f64, d: f64, r: [f64; 2]) -> [f64; 2] {
    let det = a * d - b * b;
    [(d * r[0] - b * r[1]) / det, (a * r[1] - b * r[0]) / det]
}

/// Reference-element tables for trilinear shape functions at the 2×2×2
/// Gauss points. Local node `a` has offsets `(a&1, (a>>1)&1, (a>>2)&1)`.
#[derive(Clone, Debug)]
struct Quadrature {
    /// `∂N_a/∂x_d` at Gauss point `g`, physical units.
    dn: [[[f64; 3]; 8]; 8],
    /// `N_a` at Gauss point `g`.
    n: [[f64; 8]; 8],
    /// Quadrature weight times Jacobian.
    wdet: f64,
}

impl Quadrature {
    fn new(h: [f64; 3]) -> Self {
        let r = 0.5 / 3f64.sqrt();
        let pts = [0.5 - r, 0.5 + r];
        let mut dn = [[[0.0; 3]; 8]; 8];
        let mut nn = [[0.0; 8]; 8];
        for g in 0..8 {
            let xi = [pts[g & 1], pts[(g >> 1) & 1], pts[(g >> 2) & 1]];
            for a in 0..8 {
                let off = [a & 1, (a >> 1) & 1, (a >> 2) & 1];
                let f: [f64; 3] = std::array::from_fn(|d| if off[d] == 1 { xi[d] } else { 1.0 - xi[d] });
                let s: [f64; 3] = std::array::from_fn(|d| if off[d] == 1 { 1.0 } else { -1.0 });
                nn[g][a] = f[0] * f[1] * f[2];
                dn[g][a] = [
                    s[0] * f[1] * f[2] / h[0],
                    f[0] * s[1] * f[2] / h[1],
                    f[0] * f[1] * s[2] / h[2],
                ];
            }
        }
        Quadrature {
            dn,
            n: nn,
            wdet: h[0] * h[1] * h[2] / 8.0,
        }
    }
}

/// Precomputed operator data for one parameter set and step size.
#[derive(Clone, Debug)]
pub struct BiotSolver {
    pub grid: Grid,
    pub dt: f64,
    quad: Quadrature,
    /// `(λ − C²/M, G)` at the Gauss points of each element.
    gauss_coef: Vec<[[f64; 2]; 8]>,
    rho: Vec<f64>,
    rho_f: Vec<f64>,
    rho_e: Vec<f64>,
    /// `η/κ` at nodes.
    damping: Vec<f64>,
    /// Lumped nodal mass (control volume).
    mass: Vec<f64>,
    lambda: Field3,
    shear: Field3,
    biot_c: Field3,
    biot_m: Field3,
    blowup: f64,
}

/// Largest stable step for the given coefficients: `cfl·h_min/√(max c²)`
/// over the four speed-squared fields.
pub fn cfl_limit(grid: &Grid, params: &ParameterFields, cfl: f64) -> Result<f64> {
    let speeds = wave_speed_fields(params)?;
    let max = speeds.iter().map(Field3::max).fold(0.0, f64::max);
    Ok(cfl * grid.h_min() / max.sqrt())
}

impl BiotSolver {
    /// Checks admissibility and the CFL bound for `grid.dt`, then
    /// precomputes the operator.
    pub fn new(grid: &Grid, params: &ParameterFields, cfl: f64) -> Result<Self> {
        let limit = cfl_limit(grid, params, cfl)?;
        if grid.dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl {
                dt: grid.dt,
                limit,
            });
        }
        Ok(Self::build(grid, params))
    }

    fn build(grid: &Grid, params: &ParameterFields) -> Self {
        let quad = Quadrature::new(grid.h);
        let [n1, n2, n3] = grid.n;
        let nd = grid.node_dims();
        let nidx = |i: usize, j: usize, k: usize| i + nd[0] * (j + nd[1] * k);
        let coef_fields = [&params.lambda, &params.shear, &params.biot_c, &params.biot_m];
        let gauss_coef = par::map_range(n1 * n2 * n3, |e| {
            let (i, j, k) = (e % n1, (e / n1) % n2, e / (n1 * n2));
            let mut out = [[0.0; 2]; 8];
            for (g, og) in out.iter_mut().enumerate() {
                let mut v = [0.0; 4];
                for a in 0..8 {
                    let n = nidx(i + (a & 1), j + ((a >> 1) & 1), k + ((a >> 2) & 1));
                    for (q, f) in coef_fields.iter().enumerate() {
                        v[q] += quad.n[g][a] * f.data()[n];
                    }
                }
                *og = [v[0] - v[2] * v[2] / v[3], v[1]];
            }
            out
        });
        let mass = (0..grid.node_count())
            .map(|n| {
                let [i, j, k] = params.rho.ijk(n);
                let cnt = |p: usize, m: usize| if p == 0 || p == m { 1.0 } else { 2.0 };
                cnt(i, n1) * cnt(j, n2) * cnt(k, n3) * quad.wdet
            })
            .collect();
        let damping = params
            .viscosity
            .data()
            .iter()
            .zip(params.permeability.data())
            .map(|(e, k)| e / k)
            .collect();
        BiotSolver {
            grid: grid.clone(),
            dt: grid.dt,
            quad,
            gauss_coef,
            rho: params.rho.data().to_vec(),
            rho_f: params.rho_f.data().to_vec(),
            rho_e: params.rho_e.data().to_vec(),
            damping,
            mass,
            lambda: params.lambda.clone(),
            shear: params.shear.clone(),
            biot_c: params.biot_c.clone(),
            biot_m: params.biot_m.clone(),
            blowup: crate::em::DEFAULT_BLOWUP,
        }
    }

    pub fn with_blowup_threshold(mut self, threshold: f64) -> Self {
        self.blowup = threshold;
        self
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Gauss-point drained stresses `(λ − C²/M) div u I + 2G ε(u)` per element.
    fn element_stresses(&self, u: &NodeVec) -> Vec<[[f64; 6]; 8]> {
        let [n1, n2, n3] = self.grid.n;
        let nd = self.grid.node_dims();
        let q = &self.quad;
        par::map_range(n1 * n2 * n3, |e| {
            let (i, j, k) = (e % n1, (e / n1) % n2, e / (n1 * n2));
            let mut xu = [[0.0; 8]; 3];
            for a in 0..8 {
                let n = (i + (a & 1)) + nd[0] * ((j + ((a >> 1) & 1)) + nd[1] * (k + ((a >> 2) & 1)));
                for c in 0..3 {
                    xu[c][a] = u[c].data()[n];
                }
            }
            let mut out = [[0.0; 6]; 8];
            for g in 0..8 {
                let mut gu = [[0.0; 3]; 3];
                for a in 0..8 {
                    let dn = q.dn[g][a];
                    for d in 0..3 {
                        gu[0][d] += xu[0][a] * dn[d];
                        gu[1][d] += xu[1][a] * dn[d];
                        gu[2][d] += xu[2][a] * dn[d];
                    }
                }
                let divu = gu[0][0] + gu[1][1] + gu[2][2];
                let [la, sh] = self.gauss_coef[e][g];
                let s = la * divu;
                out[g] = [
                    s + 2.0 * sh * gu[0][0],
                    s + 2.0 * sh * gu[1][1],
                    s + 2.0 * sh * gu[2][2],
                    sh * (gu[0][1] + gu[1][0]),
                    sh * (gu[0][2] + gu[2][0]),
                    sh * (gu[1][2] + gu[2][1]),
                ];
            }
            out
        })
    }

    /// Nodal `m q / M` with `q = C div u + M div w` from central differences.
    /// Boundary nodes carry zero, which imposes `p = 0` there.
    fn pressure_weights(&self, u: &NodeVec, w: &NodeVec) -> Vec<f64> {
        let nd = self.grid.node_dims();
        let h = self.grid.h;
        par::map_range(self.grid.node_count(), |n| {
            let ijk = [n % nd[0], (n / nd[0]) % nd[1], n / (nd[0] * nd[1])];
            if (0..3).any(|d| ijk[d] == 0 || ijk[d] + 1 == nd[d]) {
                return 0.0;
            }
            let stride = [1, nd[0], nd[0] * nd[1]];
            let (mut du, mut dw) = (0.0, 0.0);
            for d in 0..3 {
                let (p, m) = (n + stride[d], n - stride[d]);
                du += (u[d].data()[p] - u[d].data()[m]) / (2.0 * h[d]);
                dw += (w[d].data()[p] - w[d].data()[m]) / (2.0 * h[d]);
            }
            let (c, mm) = (self.biot_c.data()[n], self.biot_m.data()[n]);
            self.mass[n] * (c * du + mm * dw) / mm
        })
    }

    /// Internal force `K x` at node `(i,j,k)`: `[u-part; w-part]`.
    #[inline]
    fn gather(&self, st: &[[[f64; 6]; 8]], r: &[f64], i: usize, j: usize, k: usize) -> [f64; 6] {
        let [n1, n2, n3] = self.grid.n;
        let nd = self.grid.node_dims();
        let q = &self.quad;
        let mut f = [0.0; 6];
        for a in 0..8 {
            let (a0, a1, a2) = (a & 1, (a >> 1) & 1, (a >> 2) & 1);
            if i < a0 || j < a1 || k < a2 {
                continue;
            }
            let (ei, ej, ek) = (i - a0, j - a1, k - a2);
            if ei >= n1 || ej >= n2 || ek >= n3 {
                continue;
            }
            let e = ei + n1 * (ej + n2 * ek);
            for g in 0..8 {
                let t = &st[e][g];
                let dn = q.dn[g][a];
                f[0] += t[0] * dn[0] + t[3] * dn[1] + t[4] * dn[2];
                f[1] += t[3] * dn[0] + t[1] * dn[1] + t[5] * dn[2];
                f[2] += t[4] * dn[0] + t[5] * dn[1] + t[2] * dn[2];
            }
        }
        for v in &mut f[..3] {
            *v *= q.wdet;
        }
        // Transpose of the central divergence applied to the nodal pressure term.
        let ijk = [i, j, k];
        let n = i + nd[0] * (j + nd[1] * k);
        let stride = [1, nd[0], nd[0] * nd[1]];
        for d in 0..3 {
            let mut term = |m: usize, sign: f64| {
                let s = sign * r[m] / (2.0 * self.grid.h[d]);
                f[d] += s * self.biot_c.data()[m];
                f[3 + d] += s * self.biot_m.data()[m];
            };
            if ijk[d] > 0 {
                term(n - stride[d], 1.0);
            }
            if ijk[d] + 1 < nd[d] {
                term(n + stride[d], -1.0);
            }
        }
        f
    }

    /// `K x` for all nodes.
    pub fn internal_force(&self, u: &NodeVec, w: &NodeVec) -> Vec<[f64; 6]> {
        let st = self.element_stresses(u);
        let r = self.pressure_weights(u, w);
        let nd = self.grid.node_dims();
        par::map_range(self.grid.node_count(), |n| {
            let (i, j, k) = (n % nd[0], (n / nd[0]) % nd[1], n / (nd[0] * nd[1]));
            self.gather(&st, &r, i, j, k)
        })
    }

    /// Recomputes the cached τ and p of the current level.
    pub fn refresh_cache(&self, s: &mut BiotState) {
        let (tau, p) = constitutive_with(
            &self.grid,
            &s.u,
            &s.w,
            &self.lambda,
            &self.shear,
            &self.biot_c,
            &self.biot_m,
        );
        s.tau = tau;
        s.p = p;
    }

    /// Advances one level. `source` is the force density ξD acting on the
    /// fluid equation; `body` is an additional `(f_u, f_w)` force density.
    /// Both are evaluated at the current level.
    pub fn step(
        &self,
        s: &mut BiotState,
        source: Option<&NodeVec>,
        body: Option<(&NodeVec, &NodeVec)>,
    ) -> Result<()> {
        let kx = self.internal_force(&s.u, &s.w);
        let dt = self.dt;
        let first = s.level == 0;
        let vel = s.initial_velocity.take();
        let next = par::map_range(self.grid.node_count(), |n| {
            let m = self.mass[n];
            let mut r = [0.0; 6];
            for c in 0..3 {
                let mut fu = 0.0;
                let mut fw = 0.0;
                if let Some(src) = source {
                    fw += src[c].data()[n];
                }
                if let Some((bu, bw)) = body {
                    fu += bu[c].data()[n];
                    fw += bw[c].data()[n];
                }
                r[c] = fu - kx[n][c] / m;
                r[c + 3] = fw - kx[n][c + 3] / m;
            }
            let (rho, rf, re, b) = (self.rho[n], self.rho_f[n], self.rho_e[n], self.damping[n]);
            let mut out = [0.0; 6];
            for c in 0..3 {
                let (u, w) = (s.u[c].data()[n], s.w[c].data()[n]);
                if first {
                    let (vu, vw) = match &vel {
                        Some(v) => (v.0[c].data()[n], v.1[c].data()[n]),
                        None => (0.0, 0.0),
                    };
                    let a = solve_sym2(rho, rf, re, [r[c], r[c + 3] - b * vw]);
                    out[c] = u + dt * vu + 0.5 * dt * dt * a[0];
                    out[c + 3] = w + dt * vw + 0.5 * dt * dt * a[1];
                } else {
                    let (up, wp) = (s.u_prev[c].data()[n], s.w_prev[c].data()[n]);
                    let half = 0.5 * dt * b;
                    // Unknowns are second differences X = u⁺−2u+u⁻, Y = w⁺−2w+w⁻.
                    let rhs = [dt * dt * r[c], dt * dt * r[c + 3] - 2.0 * half * (w - wp)];
                    let xy = solve_sym2(rho, rf, re + half, rhs);
                    out[c] = 2.0 * u - up + xy[0];
                    out[c + 3] = 2.0 * w - wp + xy[1];
                }
            }
            out
        });
        for c in 0..3 {
            std::mem::swap(&mut s.u_prev[c], &mut s.u[c]);
            std::mem::swap(&mut s.w_prev[c], &mut s.w[c]);
            let (ud, wd) = (s.u[c].data_mut(), s.w[c].data_mut());
            for (n, v) in next.iter().enumerate() {
                ud[n] = v[c];
                wd[n] = v[c + 3];
            }
        }
        s.level += 1;
        s.time = s.level as f64 * dt;
        let m = s.max_abs();
        if !m.is_finite() || m > self.blowup {
            return Err(Error::BlowUp { step: s.level });
        }
        self.refresh_cache(s);
        Ok(())
    }

    /// `‖A^{1/2} v‖² + 𝓑(xⁿ, xⁿ⁻¹)` with `v = (xⁿ − xⁿ⁻¹)/dt`, lumped mass.
    /// Exactly conserved by the scheme without damping and non-increasing
    /// with damping and no forcing. At level 0, `x⁻¹` is the virtual level
    /// that makes the Taylor start a regular step.
    pub fn energy(&self, s: &BiotState) -> f64 {
        let kx = self.internal_force(&s.u, &s.w);
        let dt = self.dt;
        let vel = s.initial_velocity.as_deref();
        par::sum_range(self.grid.node_count(), |n| {
            let (rho, rf, re) = (self.rho[n], self.rho_f[n], self.rho_e[n]);
            let half = 0.5 * dt * self.damping[n];
            let m = self.mass[n];
            let mut e = 0.0;
            for c in 0..3 {
                let (u, w) = (s.u[c].data()[n], s.w[c].data()[n]);
                let (up, wp) = if s.level == 0 {
                    let (vu, vw) = vel.map_or((0.0, 0.0), |v| (v.0[c].data()[n], v.1[c].data()[n]));
                    let (ru, rw) = (-kx[n][c] / m, -kx[n][c + 3] / m);
                    let a = solve_sym2(rho, rf, re, [ru, rw - 2.0 * half / dt * vw]);
                    let (u1, w1) = (u + dt * vu + 0.5 * dt * dt * a[0], w + dt * vw + 0.5 * dt * dt * a[1]);
                    let (su, sw) = (u1 - 2.0 * u, w1 - 2.0 * w);
                    let rhs = [
                        dt * dt * ru - rho * su - rf * sw,
                        dt * dt * rw - rf * su - re * sw - half * w1,
                    ];
                    let p = solve_sym2(rho, rf, re - half, rhs);
                    (p[0], p[1])
                } else {
                    (s.u_prev[c].data()[n], s.w_prev[c].data()[n])
                };
                let (vu, vw) = ((u - up) / dt, (w - wp) / dt);
                e += m * (rho * vu * vu + 2.0 * rf * vu * vw + re * vw * vw);
                e += kx[n][c] * up + kx[n][c + 3] * wp;
            }
            e
        })
    }

    /// `𝓑(x, x)` at the current level.
    pub fn strain_energy(&self, u: &NodeVec, w: &NodeVec) -> f64 {
        let kx = self.internal_force(u, w);
        par::sum_range(self.grid.node_count(), |n| {
            (0..3)
                .map(|c| kx[n][c] * u[c].data()[n] + kx[n][c + 3] * w[c].data()[n])
                .sum::<f64>()
        })
    }
}

/// Runs `n_t` steps from rest with the source sequence `source(level)`.
pub fn run_biot<S, F>(
    solver: &BiotSolver,
    mut state: BiotState,
    n_t: usize,
    mut source: S,
    mut sink: F,
) -> Result<BiotState>
where
    S: FnMut(usize) -> Result<Option<NodeVec>>,
    F: FnMut(&BiotState) -> Result<()>,
{
    sink(&state)?;
    for _ in 0..n_t {
        let src = source(state.level)?;
        solver.step(&mut state, src.as_ref(), None)?;
        sink(&state)?;
    }
    Ok(state)
}
