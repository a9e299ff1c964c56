//! Discrete versions of the stability quantities: the parameter-difference
//! integrals `Λ̃`, `Λ`, the measurement norms `𝔒⁽ʲ⁾` on the shell, and an
//! empirical Hölder fit over a family of scaled perturbations.

use crate::em::SnapshotPolicy;
use crate::field::{Field3, VecField};
use crate::grid::{Grid, Region};
use crate::ops;
use crate::par;
use crate::params::ParameterFields;
use crate::pipeline::{run_twin, SolverSettings};
use crate::{Error, Result};

/// Samples on a tensor grid `nx × ny × nz × nt`, x fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub dims: [usize; 4],
    /// Spacing along each axis; the last one is the time step.
    pub h: [f64; 4],
    pub data: Vec<f64>,
}

impl Samples {
    pub fn from_field(f: &Field3, h: [f64; 3]) -> Self {
        let d = f.dims();
        Samples {
            dims: [d[0], d[1], d[2], 1],
            h: [h[0], h[1], h[2], 1.0],
            data: f.data().to_vec(),
        }
    }

    /// Stacks node fields of consecutive levels.
    pub fn from_levels(levels: &[Field3], h: [f64; 3], dt: f64) -> Self {
        let d = levels[0].dims();
        let mut data = Vec::with_capacity(levels.len() * levels[0].len());
        for l in levels {
            data.extend_from_slice(l.data());
        }
        Samples {
            dims: [d[0], d[1], d[2], levels.len()],
            h: [h[0], h[1], h[2], dt],
            data,
        }
    }

    fn stride(&self, axis: usize) -> usize {
        self.dims[..axis].iter().product()
    }

    /// Second-order difference along `axis`: central inside, one-sided
    /// three-point at both ends.
    pub fn diff(&self, axis: usize) -> Samples {
        let n = self.dims[axis];
        assert!(n >= 3, "axis {axis} has {n} < 3 samples");
        let s = self.stride(axis);
        let inv = 1.0 / self.h[axis];
        let plane = s * n;
        let mut out = vec![0.0; self.data.len()];
        let src = &self.data;
        par::for_each_chunk(&mut out, plane, |p, chunk| {
            let base = p * plane;
            for (q, o) in chunk.iter_mut().enumerate() {
                let i = q / s;
                let at = |m: usize| src[base + m * s + q % s];
                *o = inv
                    * if i == 0 {
                        -1.5 * at(0) + 2.0 * at(1) - 0.5 * at(2)
                    } else if i == n - 1 {
                        1.5 * at(n - 1) - 2.0 * at(n - 2) + 0.5 * at(n - 3)
                    } else {
                        0.5 * (at(i + 1) - at(i - 1))
                    };
            }
        });
        Samples {
            dims: self.dims,
            h: self.h,
            data: out,
        }
    }

    /// Compact second difference along `axis`, one-sided four-point at the
    /// ends.
    pub fn diff2(&self, axis: usize) -> Samples {
        let n = self.dims[axis];
        assert!(n >= 4, "axis {axis} has {n} < 4 samples");
        let s = self.stride(axis);
        let inv = 1.0 / (self.h[axis] * self.h[axis]);
        let plane = s * n;
        let mut out = vec![0.0; self.data.len()];
        let src = &self.data;
        par::for_each_chunk(&mut out, plane, |p, chunk| {
            let base = p * plane;
            for (q, o) in chunk.iter_mut().enumerate() {
                let i = q / s;
                let at = |m: usize| src[base + m * s + q % s];
                *o = inv
                    * if i == 0 {
                        2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)
                    } else if i == n - 1 {
                        2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)
                    } else {
                        at(i + 1) - 2.0 * at(i) + at(i - 1)
                    };
            }
        });
        Samples {
            dims: self.dims,
            h: self.h,
            data: out,
        }
    }

    /// `Σ_l time[l] Σ_n space[n] f²`.
    fn weighted_sq(&self, space: &[f64], time: &[f64]) -> f64 {
        let m = space.len();
        par::sum_range(self.dims[3], |l| {
            time[l] * self.data[l * m..(l + 1) * m].iter().zip(space).map(|(v, w)| w * v * v).sum::<f64>()
        })
    }
}

/// Trapezoidal node weights of the union of cells with the given label.
pub fn region_weights(grid: &Grid, region: Region) -> Vec<f64> {
    let nd = grid.node_dims();
    let q = grid.cell_volume() / 8.0;
    let mut w = vec![0.0; grid.node_count()];
    for k in 0..grid.n[2] {
        for j in 0..grid.n[1] {
            for i in 0..grid.n[0] {
                if grid.cell_region(i, j, k) != region {
                    continue;
                }
                for c in 0..8 {
                    let (a, b, e) = (i + (c & 1), j + ((c >> 1) & 1), k + (c >> 2));
                    w[a + nd[0] * (b + nd[1] * e)] += q;
                }
            }
        }
    }
    w
}

/// Trapezoidal weights on the whole box.
pub fn full_weights(grid: &Grid) -> Vec<f64> {
    let nd = grid.node_dims();
    (0..grid.node_count())
        .map(|n| grid.node_weight(n % nd[0], (n / nd[0]) % nd[1], n / (nd[0] * nd[1])))
        .collect()
}

fn time_weights(nt: usize, dt: f64) -> Vec<f64> {
    (0..nt)
        .map(|l| if nt > 1 && (l == 0 || l == nt - 1) { 0.5 * dt } else { dt })
        .collect()
}

/// `Σ_{|a| ≤ m} ‖∂ᵃf‖²` over all space-time multi-indices, with the given
/// spatial node weights and trapezoidal weights in time.
pub fn sobolev_sq(f: &Samples, order: usize, space_weights: &[f64]) -> Result<f64> {
    let nt = f.dims[3];
    if nt < order + 1 || nt < 3 {
        return Err(Error::Invalid(format!(
            "{nt} snapshots are not enough for order-{order} time differences"
        )));
    }
    if f.dims[..3].iter().any(|&d| d < 3) {
        return Err(Error::Invalid("fewer than 3 nodes along an axis".into()));
    }
    let tw = time_weights(nt, f.h[3]);
    Ok(tree_sum(f, 0, order, space_weights, &tw))
}

fn tree_sum(f: &Samples, axis: usize, budget: usize, sw: &[f64], tw: &[f64]) -> f64 {
    if axis == 4 {
        return f.weighted_sq(sw, tw);
    }
    let mut total = tree_sum(f, axis + 1, budget, sw, tw);
    let mut cur = f.clone();
    for used in 1..=budget {
        cur = cur.diff(axis);
        total += tree_sum(&cur, axis + 1, budget - used, sw, tw);
    }
    total
}

/// Spatial analogue of [`sobolev_sq`] restricted to orders `≤ 2` for one
/// node field: returns `(∫f², ∫|∇f|², ∫|∇∇f|²)`.
pub fn derivative_integrals(grid: &Grid, f: &Field3, weights: &[f64]) -> [f64; 3] {
    let s = Samples::from_field(f, grid.h);
    let d1: Vec<Samples> = (0..3).map(|k| s.diff(k)).collect();
    let w = |f: &Samples| f.weighted_sq(weights, &[1.0]);
    let mut out = [w(&s), 0.0, 0.0];
    for (k, dk) in d1.iter().enumerate() {
        out[1] += w(dk);
        out[2] += w(&s.diff2(k));
        // The Hessian is symmetric; mixed entries appear twice.
        for l in k + 1..3 {
            out[2] += 2.0 * w(&dk.diff(l));
        }
    }
    out
}

/// Integrals of `Λ̃` and `Λ` for parameter differences on the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaIntegrals {
    pub tilde: f64,
    pub full: f64,
}

/// `Λ̃ = |α|²+|β|²+|γ|²+|∇α|²+|∇β|²+|∇γ|²+|∇∇α|²+|∇∇β|²` and
/// `Λ = Λ̃ + |ξ|² + |∇ξ|²`, integrated over the box.
pub fn compute_lambda(grid: &Grid, alpha: &Field3, beta: &Field3, gamma: &Field3, xi: &Field3) -> LambdaIntegrals {
    let w = full_weights(grid);
    let a = derivative_integrals(grid, alpha, &w);
    let b = derivative_integrals(grid, beta, &w);
    let g = derivative_integrals(grid, gamma, &w);
    let x = derivative_integrals(grid, xi, &w);
    let tilde = a.iter().sum::<f64>() + b.iter().sum::<f64>() + g[0] + g[1];
    LambdaIntegrals {
        tilde,
        full: tilde + x[0] + x[1],
    }
}

/// `‖D‖²_{H⁴} + ‖B‖²_{H⁴} + ‖u‖²_{H⁵} + ‖w‖²_{H⁵}` on `Q_ω` from difference
/// levels at nodes.
#[derive(Clone, Debug, Default)]
pub struct ShellRecord {
    d: [Vec<Field3>; 3],
    b: [Vec<Field3>; 3],
    u: [Vec<Field3>; 3],
    w: [Vec<Field3>; 3],
}

impl ShellRecord {
    pub fn push(&mut self, grid: &Grid, d: &VecField, b: &VecField, u: &[Field3; 3], w: &[Field3; 3]) {
        let dn = ops::edge_to_nodes(grid, d);
        let bn = ops::face_to_nodes(grid, b);
        for c in 0..3 {
            self.d[c].push(dn[c].clone());
            self.b[c].push(bn[c].clone());
            self.u[c].push(u[c].clone());
            self.w[c].push(w[c].clone());
        }
    }

    pub fn levels(&self) -> usize {
        self.d[0].len()
    }

    pub fn norm(&self, grid: &Grid, dt: f64) -> Result<f64> {
        let w = region_weights(grid, Region::Shell);
        let mut total = 0.0;
        for (set, order) in [(&self.d, 4), (&self.b, 4), (&self.u, 5), (&self.w, 5)] {
            for comp in set.iter() {
                total += sobolev_sq(&Samples::from_levels(comp, grid.h, dt), order, &w)?;
            }
        }
        Ok(total)
    }
}

/// One perturbation scale of the sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub s: f64,
    pub lambda_tilde: f64,
    pub lambda: f64,
    pub data: [f64; 2],
}

impl SweepPoint {
    pub fn data_sum(&self) -> f64 {
        self.data[0] + self.data[1]
    }
}

/// Least-squares fit of `log ∫Λ = log Ĉ₀ + ĉ₀ log 𝔒`.
#[derive(Clone, Debug, PartialEq)]
pub struct HolderFit {
    pub exponent: f64,
    pub constant: f64,
    pub r2: f64,
    pub safety: f64,
    /// `∫Λ / (safety·Ĉ₀ 𝔒^ĉ₀)` per point; the bound holds where this is ≤ 1.
    pub bound_ratio: Vec<f64>,
}

impl HolderFit {
    pub fn bound_holds(&self) -> bool {
        self.bound_ratio.iter().all(|&r| r <= 1.0)
    }

    pub fn pass(&self, max_exponent: f64, min_r2: f64) -> bool {
        self.exponent > 0.0 && self.exponent <= max_exponent && self.r2 >= min_r2 && self.bound_holds()
    }
}

pub const DEFAULT_SAFETY: f64 = 1.5;

/// Fits the points with `∫Λ > 0` and `𝔒 > 0`.
pub fn fit_holder(points: &[SweepPoint], safety: f64) -> Result<HolderFit> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.lambda > 0.0 && p.data_sum() > 0.0)
        .map(|p| (p.data_sum().ln(), p.lambda.ln()))
        .collect();
    if used.len() < 2 {
        return Err(Error::Invalid("a fit needs at least two nonzero sweep points".into()));
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = used.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("all sweep points have the same data norm".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = used.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let constant = intercept.exp();
    let bound_ratio = points
        .iter()
        .map(|p| {
            if p.lambda == 0.0 {
                0.0
            } else {
                p.lambda / (safety * constant * p.data_sum().powf(slope))
            }
        })
        .collect();
    Ok(HolderFit {
        exponent: slope,
        constant,
        r2,
        safety,
        bound_ratio,
    })
}

/// Geometric scales `2⁻⁶ … 2⁻¹`.
pub fn default_scales() -> Vec<f64> {
    (1..=6).rev().map(|k| 0.5f64.powi(k)).collect()
}

/// Sweep setup shared by all scales.
#[derive(Clone, Debug)]
pub struct SweepSetup<'a> {
    pub grid: &'a Grid,
    pub base: &'a ParameterFields,
    /// Unit-amplitude differences of `(α, β, γ, ξ)`.
    pub perturbation: [&'a Field3; 4],
    pub initial: [(&'a VecField, &'a VecField); 2],
    /// Keep every `stride`-th level for the data norms.
    pub stride: usize,
    pub settings: SolverSettings,
}

/// Parameter differences at scale `s`.
pub fn scaled_increments(p: [&Field3; 4], s: f64) -> [Field3; 4] {
    p.map(|f| f.map(|v| s * v))
}

/// Runs both experiments for one scale.
pub fn sweep_point(setup: &SweepSetup, s: f64) -> Result<SweepPoint> {
    let g = setup.grid;
    let [da, db, dg, dx] = scaled_increments(setup.perturbation, s);
    let p2 = setup.base.with_em_increments(&da, &db, &dg, &dx)?;
    let lam = compute_lambda(g, &da, &db, &dg, &dx);
    let mut data = [0.0; 2];
    for (j, (d0, b0)) in setup.initial.iter().enumerate() {
        let mut rec = ShellRecord::default();
        run_twin(
            g,
            setup.base,
            &p2,
            d0,
            b0,
            g.n_t,
            SnapshotPolicy::every(setup.stride.max(1)),
            &setup.settings,
            |f| {
                rec.push(g, &f.d, &f.b, &f.u, &f.w);
                Ok(())
            },
        )?;
        data[j] = rec.norm(g, g.dt * setup.stride.max(1) as f64)?;
    }
    Ok(SweepPoint {
        s,
        lambda_tilde: lam.tilde,
        lambda: lam.full,
        data,
    })
}

/// Evaluates every scale; points are independent and run in parallel.
pub fn holder_sweep(setup: &SweepSetup, scales: &[f64]) -> Result<Vec<SweepPoint>> {
    par::map_range(scales.len(), |i| sweep_point(setup, scales[i]))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, Domain, Resolution};

    fn grid(n: usize) -> Grid {
        build_domain(
            Domain::unit_cube(0.25, 1.0, 0.2),
            Resolution {
                n: [n; 3],
                dt_max: None,
            },
        )
        .unwrap()
        .1
    }

    #[test]
    fn differences_are_exact_on_quadratics() {
        let g = grid(6);
        let f = Field3::from_fn(g.node_dims(), |i, j, k| {
            let x = g.node(i, j, k);
            x[0] * x[0] + 3.0 * x[1] * x[2]
        });
        let s = Samples::from_field(&f, g.h);
        let dx = s.diff(0);
        let dxx = dx.diff(0);
        for (n, v) in dx.data.iter().enumerate() {
            let [i, j, k] = f.ijk(n);
            assert!((v - 2.0 * g.node(i, j, k)[0]).abs() < 1e-12);
            assert!((dxx.data[n] - 2.0).abs() < 1e-9);
        }
        let dyz = s.diff(1).diff(2);
        assert!(dyz.data.iter().all(|v| (v - 3.0).abs() < 1e-10));
    }

    #[test]
    fn shell_weights_add_up_to_the_shell_volume() {
        let g = grid(8);
        let w: f64 = region_weights(&g, Region::Shell).iter().sum();
        assert!((w - (1.0 - 0.125)).abs() < 1e-12);
        let all: f64 = full_weights(&g).iter().sum();
        assert!((all - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_a_power_law() {
        let pts: Vec<SweepPoint> = default_scales()
            .into_iter()
            .map(|s| SweepPoint {
                s,
                lambda_tilde: 3.0 * s * s,
                lambda: 3.0 * s * s,
                data: [0.5 * s.powf(2.5), 0.5 * s.powf(2.5)],
            })
            .collect();
        let fit = fit_holder(&pts, DEFAULT_SAFETY).unwrap();
        assert!((fit.exponent - 0.8).abs() < 1e-12);
        assert!((fit.constant - 3.0).abs() < 1e-10);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(fit.pass(1.2, 0.95));
    }

    #[test]
    fn too_few_snapshots_are_rejected() {
        let g = grid(4);
        let lv = vec![Field3::zeros(g.node_dims()); 4];
        let w = full_weights(&g);
        assert!(sobolev_sq(&Samples::from_levels(&lv, g.h, 0.1), 5, &w).is_err());
        assert!(sobolev_sq(&Samples::from_levels(&lv, g.h, 0.1), 3, &w).is_ok());
    }
}
