//! Box domain, measurement shell, tensor grid and the smooth space-time cutoff.

use crate::error::{Error, Result};
use crate::field::Field3;

/// Axis-aligned box with a boundary shell of uniform width.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    /// Width of the measurement shell adjacent to the boundary.
    pub shell_width: f64,
    /// Final time `T`; the model time interval is `(-T, T)`.
    pub final_time: f64,
    /// Width of the temporal transition band of the cutoff.
    pub transition: f64,
}

impl Domain {
    pub fn unit_cube(shell_width: f64, final_time: f64, transition: f64) -> Self {
        Domain {
            lower: [0.0; 3],
            upper: [1.0; 3],
            shell_width,
            final_time,
            transition,
        }
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.upper[0] - self.lower[0],
            self.upper[1] - self.lower[1],
            self.upper[2] - self.lower[2],
        ]
    }

    /// Distance from `x` to the box boundary (non-negative inside the box).
    pub fn dist_to_boundary(&self, x: [f64; 3]) -> f64 {
        (0..3)
            .map(|a| (x[a] - self.lower[a]).min(self.upper[a] - x[a]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains_closed(&self, x: [f64; 3]) -> bool {
        (0..3).all(|a| x[a] >= self.lower[a] && x[a] <= self.upper[a])
    }

    /// Interior box `Ω₀` as (lower, upper) corners.
    pub fn interior_box(&self) -> ([f64; 3], [f64; 3]) {
        let w = self.shell_width;
        (
            [self.lower[0] + w, self.lower[1] + w, self.lower[2] + w],
            [self.upper[0] - w, self.upper[1] - w, self.upper[2] - w],
        )
    }

    pub fn volume(&self) -> f64 {
        self.extent().iter().product()
    }

    fn validate(&self) -> Result<()> {
        let ext = self.extent();
        if ext.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Domain("upper corner must exceed lower corner".into()));
        }
        if !(self.shell_width > 0.0) {
            return Err(Error::Domain("shell width must be positive".into()));
        }
        let min_ext = ext.iter().copied().fold(f64::INFINITY, f64::min);
        if 2.0 * self.shell_width >= min_ext {
            return Err(Error::Domain(format!(
                "empty interior: shell width {} leaves nothing of extent {}",
                self.shell_width, min_ext
            )));
        }
        if !(self.final_time > 0.0) {
            return Err(Error::Domain("final time must be positive".into()));
        }
        if !(self.transition > 0.0 && self.transition < self.final_time) {
            return Err(Error::Domain(
                "transition width must lie strictly between 0 and T".into(),
            ));
        }
        Ok(())
    }
}

/// Region label of a cell or node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// Measurement shell next to the boundary.
    Shell,
    /// Interior set where the parameters may differ.
    Interior,
}

/// Uniform tensor grid over the domain box.
#[derive(Clone, Debug)]
pub struct Grid {
    pub n: [usize; 3],
    pub h: [f64; 3],
    pub lower: [f64; 3],
    pub dt: f64,
    pub n_t: usize,
    cell_labels: Vec<Region>,
    node_labels: Vec<Region>,
}

/// Resolution part of the experiment setup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resolution {
    pub n: [usize; 3],
    /// Requested upper bound on the time step; `None` lets the solvers pick.
    pub dt_max: Option<f64>,
}

pub fn build_domain(domain: Domain, res: Resolution) -> Result<(Domain, Grid)> {
    domain.validate()?;
    if res.n.iter().any(|&n| n == 0) {
        return Err(Error::Domain("nonpositive spacing: cell counts must be positive".into()));
    }
    let ext = domain.extent();
    let h = [
        ext[0] / res.n[0] as f64,
        ext[1] / res.n[1] as f64,
        ext[2] / res.n[2] as f64,
    ];
    if h.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("nonpositive spacing".into()));
    }
    let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);
    let dt_req = res.dt_max.unwrap_or(0.5 * h_min);
    if !(dt_req > 0.0) {
        return Err(Error::Domain("time step must be positive".into()));
    }
    let mut grid = Grid {
        n: res.n,
        h,
        lower: domain.lower,
        dt: dt_req,
        n_t: 0,
        cell_labels: Vec::new(),
        node_labels: Vec::new(),
    };
    grid.retime(domain.final_time, dt_req);

    let tol = 1e-9 * h_min;
    let w = domain.shell_width;
    grid.cell_labels = (0..res.n[0] * res.n[1] * res.n[2])
        .map(|c| {
            let [i, j, k] = unflatten(c, res.n);
            let x = grid.cell_center(i, j, k);
            if domain.dist_to_boundary(x) < w {
                Region::Shell
            } else {
                Region::Interior
            }
        })
        .collect();
    let nd = grid.node_dims();
    grid.node_labels = (0..nd[0] * nd[1] * nd[2])
        .map(|c| {
            let [i, j, k] = unflatten(c, nd);
            if domain.dist_to_boundary(grid.node(i, j, k)) > w + tol {
                Region::Interior
            } else {
                Region::Shell
            }
        })
        .collect();
    if !grid.cell_labels.contains(&Region::Interior) {
        return Err(Error::Domain("empty interior: no cell lies in the interior set".into()));
    }
    Ok((domain, grid))
}

fn unflatten(c: usize, d: [usize; 3]) -> [usize; 3] {
    [c % d[0], (c / d[0]) % d[1], c / (d[0] * d[1])]
}

impl Grid {
    /// Chooses the largest step `<= dt_max` that divides `final_time` evenly.
    pub fn retime(&mut self, final_time: f64, dt_max: f64) {
        let n_t = (final_time / dt_max - 1e-9).ceil().max(1.0) as usize;
        self.n_t = n_t;
        self.dt = final_time / n_t as f64;
    }

    pub fn node_dims(&self) -> [usize; 3] {
        [self.n[0] + 1, self.n[1] + 1, self.n[2] + 1]
    }

    pub fn node_count(&self) -> usize {
        let d = self.node_dims();
        d[0] * d[1] * d[2]
    }

    pub fn h_min(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.lower[0] + i as f64 * self.h[0],
            self.lower[1] + j as f64 * self.h[1],
            self.lower[2] + k as f64 * self.h[2],
        ]
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.lower[0] + (i as f64 + 0.5) * self.h[0],
            self.lower[1] + (j as f64 + 0.5) * self.h[1],
            self.lower[2] + (k as f64 + 0.5) * self.h[2],
        ]
    }

    /// Position of entry `(i,j,k)` for a component with the given offset in cells.
    #[inline]
    pub fn point(&self, i: usize, j: usize, k: usize, offset: [f64; 3]) -> [f64; 3] {
        [
            self.lower[0] + (i as f64 + offset[0]) * self.h[0],
            self.lower[1] + (j as f64 + offset[1]) * self.h[1],
            self.lower[2] + (k as f64 + offset[2]) * self.h[2],
        ]
    }

    pub fn cell_region(&self, i: usize, j: usize, k: usize) -> Region {
        self.cell_labels[i + self.n[0] * (j + self.n[1] * k)]
    }

    pub fn node_region(&self, i: usize, j: usize, k: usize) -> Region {
        let d = self.node_dims();
        self.node_labels[i + d[0] * (j + d[1] * k)]
    }

    pub fn cell_labels(&self) -> &[Region] {
        &self.cell_labels
    }

    pub fn node_labels(&self) -> &[Region] {
        &self.node_labels
    }

    pub fn is_boundary_node(&self, i: usize, j: usize, k: usize) -> bool {
        i == 0 || j == 0 || k == 0 || i == self.n[0] || j == self.n[1] || k == self.n[2]
    }

    /// Time of level `l` on the forward interval `[0, T]`.
    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }

    /// Node-centred control volume weight (half and quarter cells on the boundary).
    pub fn node_weight(&self, i: usize, j: usize, k: usize) -> f64 {
        let f = |idx: usize, n: usize| if idx == 0 || idx == n { 0.5 } else { 1.0 };
        f(i, self.n[0]) * f(j, self.n[1]) * f(k, self.n[2]) * self.cell_volume()
    }
}

/// Quintic smoothstep `6s⁵ − 15s⁴ + 10s³` clamped to `[0, 1]`.
#[inline]
pub fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

/// Smooth cutoff `χ(x, t) = χ₁(x) χ₂(t)`.
#[derive(Clone, Debug)]
pub struct Cutoff {
    /// `χ₁` sampled at grid nodes.
    pub spatial: Field3,
    /// `χ₂` sampled at time levels `0..=n_t` of `[0, T]`.
    pub temporal: Vec<f64>,
    domain: Domain,
    h: [f64; 3],
}

impl Cutoff {
    /// One-dimensional factor for axis `a`: zero within one cell of either
    /// face, one at depth `>= w`.
    fn axis_factor(&self, a: usize, x: f64) -> f64 {
        let d = &self.domain;
        let band = d.shell_width - self.h[a];
        let lo = (x - d.lower[a] - self.h[a]) / band;
        let hi = (d.upper[a] - self.h[a] - x) / band;
        smoothstep(lo) * smoothstep(hi)
    }

    pub fn chi1(&self, x: [f64; 3]) -> f64 {
        (0..3).map(|a| self.axis_factor(a, x[a])).product()
    }

    pub fn chi2(&self, t: f64) -> f64 {
        let d = &self.domain;
        smoothstep((d.final_time - t.abs()) / d.transition)
    }

    pub fn chi(&self, x: [f64; 3], t: f64) -> f64 {
        self.chi1(x) * self.chi2(t)
    }
}

pub fn build_cutoff(domain: &Domain, grid: &Grid) -> Result<Cutoff> {
    for a in 0..3 {
        let band = domain.shell_width - grid.h[a];
        if band < 3.0 * grid.h[a] - 1e-12 {
            return Err(Error::Domain(format!(
                "spatial transition band along axis {} spans {:.3} cells, need at least 3",
                a + 1,
                band / grid.h[a]
            )));
        }
    }
    if domain.transition < 3.0 * grid.dt - 1e-12 {
        return Err(Error::Domain(format!(
            "temporal transition band spans {:.3} steps, need at least 3",
            domain.transition / grid.dt
        )));
    }
    let mut cut = Cutoff {
        spatial: Field3::zeros(grid.node_dims()),
        temporal: Vec::new(),
        domain: domain.clone(),
        h: grid.h,
    };
    let spatial = Field3::from_fn(grid.node_dims(), |i, j, k| cut.chi1(grid.node(i, j, k)));
    cut.spatial = spatial;
    cut.temporal = (0..=grid.n_t).map(|l| cut.chi2(grid.time(l))).collect();
    Ok(cut)
}
