//! One-way coupled forward runs: the Maxwell fields drive the Biot system
//! through the source `ξD`, on a shared time step. Twin runs with two
//! parameter sets are stepped in lockstep so that difference fields are
//! available level by level without storing either trajectory.

use crate::biot::{self, BiotSolver, BiotState};
use crate::em::{self, init_em, EmSolver, EmState, SnapshotPolicy};
use crate::field::{Field3, NodeVec, VecField};
use crate::grid::Grid;
use crate::ops;
use crate::params::{check_admissibility, ParameterFields};
use crate::{Error, Result};

/// Full field state at one level.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub level: usize,
    pub time: f64,
    pub d: VecField,
    pub b: VecField,
    pub u: NodeVec,
    pub w: NodeVec,
}

fn sub_field(a: &Field3, b: &Field3) -> Field3 {
    a.zip_map(b, |x, y| x - y)
}

impl Frame {
    /// `self − other` componentwise.
    pub fn minus(&self, other: &Frame) -> Frame {
        let vf = |a: &VecField, b: &VecField| VecField {
            stagger: a.stagger,
            comps: std::array::from_fn(|c| sub_field(&a.comps[c], &b.comps[c])),
        };
        Frame {
            level: self.level,
            time: self.time,
            d: vf(&self.d, &other.d),
            b: vf(&self.b, &other.b),
            u: std::array::from_fn(|c| sub_field(&self.u[c], &other.u[c])),
            w: std::array::from_fn(|c| sub_field(&self.w[c], &other.w[c])),
        }
    }
}

/// Largest time step allowed by both solvers for every parameter set.
pub fn common_dt(grid: &Grid, sets: &[&ParameterFields], em_cfl: f64, biot_cfl: f64) -> Result<f64> {
    let mut dt = f64::INFINITY;
    for p in sets {
        dt = dt.min(em::cfl_limit(grid, p, em_cfl));
        dt = dt.min(biot::cfl_limit(grid, p, biot_cfl)?);
    }
    Ok(dt)
}

/// Solver settings shared by the coupled runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub em_cfl: f64,
    pub biot_cfl: f64,
    pub blowup: f64,
    /// Threshold for the admissibility margins.
    pub admissibility: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            em_cfl: em::DEFAULT_EM_CFL,
            biot_cfl: biot::DEFAULT_BIOT_CFL,
            blowup: em::DEFAULT_BLOWUP,
            admissibility: 0.0,
        }
    }
}

/// Returns a copy of `grid` whose step satisfies both CFL limits for all
/// the given parameter sets, with the final time kept.
pub fn shared_grid(grid: &Grid, final_time: f64, sets: &[&ParameterFields], s: &SolverSettings) -> Result<Grid> {
    let dt = common_dt(grid, sets, s.em_cfl, s.biot_cfl)?.min(grid.dt);
    let mut g = grid.clone();
    g.retime(final_time, dt);
    Ok(g)
}

/// Coupled solver pair with its current state.
pub struct CoupledRun {
    em: EmSolver,
    biot: BiotSolver,
    xi: Field3,
    em_state: EmState,
    biot_state: BiotState,
}

impl CoupledRun {
    /// Validates the parameters and initial data before any stepping.
    pub fn new(grid: &Grid, params: &ParameterFields, d0: VecField, b0: VecField, s: &SolverSettings) -> Result<Self> {
        let report = check_admissibility(params, s.admissibility);
        if !report.all_pass() {
            let names: Vec<String> = report
                .failures()
                .iter()
                .map(|c| format!("{} (margin {:e} at {:?})", c.name, c.margin, c.worst_node))
                .collect();
            return Err(Error::Inadmissible(names.join(", ")));
        }
        let em = EmSolver::new(grid, params, s.em_cfl)?.with_blowup_threshold(s.blowup);
        let biot = BiotSolver::new(grid, params, s.biot_cfl)?.with_blowup_threshold(s.blowup);
        let (em_state, _) = init_em(grid, d0, b0)?;
        Ok(CoupledRun {
            em,
            biot,
            xi: params.xi.clone(),
            biot_state: BiotState::zero(grid),
            em_state,
        })
    }

    pub fn level(&self) -> usize {
        self.em_state.level
    }

    pub fn frame(&self) -> Frame {
        Frame {
            level: self.em_state.level,
            time: self.em_state.time,
            d: self.em_state.d.clone(),
            b: self.em_state.b.clone(),
            u: self.biot_state.u.clone(),
            w: self.biot_state.w.clone(),
        }
    }

    /// The Biot source `ξD` of the current level at nodes.
    pub fn source(&self) -> NodeVec {
        let d = ops::edge_to_nodes(&self.em.grid, &self.em_state.d);
        d.map(|c| c.zip_map(&self.xi, |a, x| a * x))
    }

    pub fn step(&mut self) -> Result<()> {
        let src = self.source();
        self.biot.step(&mut self.biot_state, Some(&src), None)?;
        self.em.step(&mut self.em_state)
    }

    pub fn em_energy(&self) -> f64 {
        self.em.discrete_energy(&self.em_state)
    }
}

/// Runs `n_t` coupled steps and passes the kept levels to `sink`.
pub fn run_coupled<F>(
    grid: &Grid,
    params: &ParameterFields,
    d0: VecField,
    b0: VecField,
    n_t: usize,
    policy: SnapshotPolicy,
    s: &SolverSettings,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(&Frame) -> Result<()>,
{
    let mut run = CoupledRun::new(grid, params, d0, b0, s)?;
    if policy.keeps(0) {
        sink(&run.frame())?;
    }
    for _ in 0..n_t {
        run.step()?;
        if policy.keeps(run.level()) {
            sink(&run.frame())?;
        }
    }
    Ok(())
}

/// Runs both parameter sets from the same initial data and passes the
/// difference `run(p2) − run(p1)` of every kept level to `sink`.
#[allow(clippy::too_many_arguments)]
pub fn run_twin<F>(
    grid: &Grid,
    p1: &ParameterFields,
    p2: &ParameterFields,
    d0: &VecField,
    b0: &VecField,
    n_t: usize,
    policy: SnapshotPolicy,
    s: &SolverSettings,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(&Frame) -> Result<()>,
{
    let mut a = CoupledRun::new(grid, p1, d0.clone(), b0.clone(), s)?;
    let mut b = CoupledRun::new(grid, p2, d0.clone(), b0.clone(), s)?;
    if policy.keeps(0) {
        sink(&b.frame().minus(&a.frame()))?;
    }
    for _ in 0..n_t {
        a.step()?;
        b.step()?;
        if policy.keeps(a.level()) {
            sink(&b.frame().minus(&a.frame()))?;
        }
    }
    Ok(())
}
