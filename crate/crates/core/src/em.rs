//! Yee-staggered time stepping of the damped Maxwell subsystem
//! `∂ₜD − curl(αB) + γD = 0`, `∂ₜB + curl(βD) = 0` with perfectly
//! conducting walls.

use crate::error::{Error, Result};
use crate::field::{Field3, Stagger, VecField};
use crate::grid::Grid;
use crate::ops;
use crate::params::ParameterFields;

pub const DEFAULT_EM_CFL: f64 = 0.5;
pub const DEFAULT_BLOWUP: f64 = 1e12;

/// Electric flux on edges, magnetic flux on faces, at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct EmState {
    pub d: VecField,
    pub b: VecField,
    pub level: usize,
    pub time: f64,
}

/// Discrete divergence residuals, relative to field magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivergenceReport {
    pub div_d: f64,
    pub div_b: f64,
}

/// Relative residual `h·max|div|/max|field|` (zero for a zero field).
fn relative(div: &Field3, field: &VecField, h: f64) -> f64 {
    let m = field.max_abs();
    if m == 0.0 {
        0.0
    } else {
        div.max_abs() * h / m
    }
}

pub fn divergence_report(grid: &Grid, state: &EmState) -> DivergenceReport {
    let h = grid.h_min();
    DivergenceReport {
        div_d: relative(&ops::div_edge_at_nodes(grid, &state.d), &state.d, h),
        div_b: relative(&ops::div_face_at_cells(grid, &state.b), &state.b, h),
    }
}

pub const DIV_TOLERANCE: f64 = 1e-10;

/// Validates and projects initial data. Tangential `D` on the boundary is
/// zeroed; `B` is taken as given (normal components are never updated).
pub fn init_em(grid: &Grid, d0: VecField, b0: VecField) -> Result<(EmState, DivergenceReport)> {
    if d0.stagger != Stagger::Edge || b0.stagger != Stagger::Face {
        return Err(Error::Invalid("D must be edge-staggered and B face-staggered".into()));
    }
    if d0.comps[0].dims() != Stagger::Edge.dims(grid.n, 0)
        || b0.comps[0].dims() != Stagger::Face.dims(grid.n, 0)
    {
        return Err(Error::Invalid("initial field dimensions do not match the grid".into()));
    }
    let mut d = d0;
    ops::zero_tangential_edges(grid, &mut d);
    let state = EmState {
        d,
        b: b0,
        level: 0,
        time: 0.0,
    };
    let rep = divergence_report(grid, &state);
    let worst = rep.div_d.max(rep.div_b);
    if !(worst <= DIV_TOLERANCE) {
        return Err(Error::Divergence { residual: worst });
    }
    Ok((state, rep))
}

/// Largest stable step for the given coefficients.
pub fn cfl_limit(grid: &Grid, params: &ParameterFields, cfl: f64) -> f64 {
    let max_speed2 = params
        .alpha
        .data()
        .iter()
        .zip(params.beta.data())
        .map(|(a, b)| a * b)
        .fold(0.0, f64::max);
    cfl * grid.h_min() / max_speed2.sqrt()
}

/// Coefficients interpolated to staggered positions plus the step size.
#[derive(Clone, Debug)]
pub struct EmSolver {
    pub grid: Grid,
    pub dt: f64,
    alpha_f: [Field3; 3],
    beta_e: [Field3; 3],
    gamma_e: [Field3; 3],
    blowup: f64,
}

impl EmSolver {
    /// Uses `grid.dt`; fails if it exceeds the CFL limit for factor `cfl`.
    pub fn new(grid: &Grid, params: &ParameterFields, cfl: f64) -> Result<Self> {
        let limit = cfl_limit(grid, params, cfl);
        if grid.dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl {
                dt: grid.dt,
                limit,
            });
        }
        let alpha_f: [Field3; 3] = std::array::from_fn(|c| ops::node_to_face_cubic(&params.alpha, c));
        let beta_e: [Field3; 3] = std::array::from_fn(|c| ops::node_to_edge_cubic(&params.beta, c));
        // The cubic rule can undershoot near sharp features.
        let gamma_e = std::array::from_fn(|c| ops::node_to_edge_cubic(&params.gamma, c).map(|g| g.max(0.0)));
        for (name, f) in [("alpha", &alpha_f), ("beta", &beta_e)] {
            if let Some(m) = f.iter().map(Field3::min).reduce(f64::min).filter(|m| !(*m > 0.0)) {
                return Err(Error::Inadmissible(format!(
                    "{name} interpolated to the staggered grid is not positive (min {m:e})"
                )));
            }
        }
        Ok(EmSolver {
            grid: grid.clone(),
            dt: grid.dt,
            alpha_f,
            beta_e,
            gamma_e,
            blowup: DEFAULT_BLOWUP,
        })
    }

    pub fn with_blowup_threshold(mut self, threshold: f64) -> Self {
        self.blowup = threshold;
        self
    }

    /// One velocity-Verlet form leapfrog step: half kick of `B`, damped
    /// update of `D`, half kick of `B`.
    pub fn step(&self, state: &mut EmState) -> Result<()> {
        let g = &self.grid;
        let dt = self.dt;
        let q = ops::curl_edge_to_face(g, &state.d, Some(&self.beta_e));
        state.b.axpy(-0.5 * dt, &q);
        let r = ops::curl_face_to_edge(g, &state.b, Some(&self.alpha_f));
        for c in 0..3 {
            let gam = self.gamma_e[c].data();
            let rc = r.comps[c].data();
            let dc = state.d.comps[c].data_mut();
            for n in 0..dc.len() {
                let s = 0.5 * dt * gam[n];
                dc[n] = (dc[n] * (1.0 - s) + dt * rc[n]) / (1.0 + s);
            }
        }
        let q = ops::curl_edge_to_face(g, &state.d, Some(&self.beta_e));
        state.b.axpy(-0.5 * dt, &q);
        state.level += 1;
        state.time = state.level as f64 * dt;
        let m = state.d.max_abs().max(state.b.max_abs());
        if !m.is_finite() || m > self.blowup || !state.d.all_finite() || !state.b.all_finite() {
            return Err(Error::BlowUp { step: state.level });
        }
        Ok(())
    }

    /// `Σ β|D|² + α|B|²` times the cell volume.
    pub fn plain_energy(&self, state: &EmState) -> f64 {
        ops::inner(&self.grid, &state.d, &state.d, Some(&self.beta_e))
            + ops::inner(&self.grid, &state.b, &state.b, Some(&self.alpha_f))
    }

    /// Energy exactly conserved by the lossless scheme:
    /// `⟨βD,D⟩ + ⟨αB⁻,B⁺⟩` with `B^± = B ∓ (dt/2) curl(βD)`.
    pub fn discrete_energy(&self, state: &EmState) -> f64 {
        let q = ops::curl_edge_to_face(&self.grid, &state.d, Some(&self.beta_e));
        self.plain_energy(state)
            - 0.25 * self.dt * self.dt * ops::inner(&self.grid, &q, &q, Some(&self.alpha_f))
    }
}

/// Which levels `run_em` keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SnapshotPolicy {
    /// Keep every `stride`-th level.
    pub stride: usize,
    /// Additionally keep every level below this one.
    pub dense_prefix: usize,
}

impl SnapshotPolicy {
    pub fn every(stride: usize) -> Self {
        SnapshotPolicy {
            stride: stride.max(1),
            dense_prefix: 0,
        }
    }

    pub fn keeps(&self, level: usize) -> bool {
        level < self.dense_prefix || level % self.stride.max(1) == 0
    }
}

/// Applies `n_t` steps, passing kept levels (including level 0) to `sink`.
pub fn run_em_with<F>(
    solver: &EmSolver,
    mut state: EmState,
    n_t: usize,
    policy: SnapshotPolicy,
    mut sink: F,
) -> Result<EmState>
where
    F: FnMut(&EmState) -> Result<()>,
{
    if policy.keeps(state.level) {
        sink(&state)?;
    }
    for _ in 0..n_t {
        solver.step(&mut state)?;
        if policy.keeps(state.level) {
            sink(&state)?;
        }
    }
    Ok(state)
}

pub fn run_em(
    solver: &EmSolver,
    state: EmState,
    n_t: usize,
    policy: SnapshotPolicy,
) -> Result<Vec<EmState>> {
    let mut out = Vec::new();
    run_em_with(solver, state, n_t, policy, |s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Analytic initial data for the electromagnetic fields.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialField {
    Constant([f64; 3]),
    /// Discrete curl of `amp·bump(x)·e_axis`, with the compact polynomial bump
    /// `(1−|x−c|²/r²)⁴`; exactly divergence-free on the grid.
    Vortex {
        amp: f64,
        center: [f64; 3],
        radius: f64,
        axis: usize,
    },
}

impl InitialField {
    fn potential(amp: f64, center: [f64; 3], radius: f64) -> impl Fn([f64; 3]) -> f64 + Sync + Send {
        move |x| {
            let s = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2) + (x[2] - center[2]).powi(2))
                / (radius * radius);
            if s >= 1.0 {
                0.0
            } else {
                amp * (1.0 - s).powi(4)
            }
        }
    }

    /// Samples the field as an electric flux on edges.
    pub fn edge_field(&self, grid: &Grid) -> VecField {
        match *self {
            InitialField::Constant(v) => ops::sample(grid, Stagger::Edge, |c, _| v[c]),
            InitialField::Vortex {
                amp,
                center,
                radius,
                axis,
            } => {
                let psi = Self::potential(amp, center, radius);
                let a = ops::sample(grid, Stagger::Face, |c, x| if c == axis { psi(x) } else { 0.0 });
                ops::curl_face_to_edge(grid, &a, None)
            }
        }
    }

    /// Samples the field as a magnetic flux on faces.
    pub fn face_field(&self, grid: &Grid) -> VecField {
        match *self {
            InitialField::Constant(v) => ops::sample(grid, Stagger::Face, |c, _| v[c]),
            InitialField::Vortex {
                amp,
                center,
                radius,
                axis,
            } => {
                let psi = Self::potential(amp, center, radius);
                let mut a = ops::sample(grid, Stagger::Edge, |c, x| if c == axis { psi(x) } else { 0.0 });
                ops::zero_tangential_edges(grid, &mut a);
                ops::curl_edge_to_face(grid, &a, None)
            }
        }
    }
}
