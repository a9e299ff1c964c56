//! Dense 3-D arrays and staggered vector fields.

use crate::par;

/// Scalar array on a 3-D index box, x-fastest layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Field3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Field3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self::filled(dims, 0.0)
    }

    pub fn filled(dims: [usize; 3], value: f64) -> Self {
        Field3 {
            dims,
            data: vec![value; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dims[0] * dims[1] * dims[2], "length mismatch");
        Field3 { dims, data }
    }

    /// Fills every entry from `f(i, j, k)`; slabs of constant `k` run in parallel.
    pub fn from_fn<F>(dims: [usize; 3], f: F) -> Self
    where
        F: Fn(usize, usize, usize) -> f64 + Sync + Send,
    {
        let mut out = Self::zeros(dims);
        out.fill_with(f);
        out
    }

    pub fn fill_with<F>(&mut self, f: F)
    where
        F: Fn(usize, usize, usize) -> f64 + Sync + Send,
    {
        let [nx, ny, _] = self.dims;
        par::for_each_chunk(&mut self.data, nx * ny, |k, slab| {
            for j in 0..ny {
                for i in 0..nx {
                    slab[i + nx * j] = f(i, j, k);
                }
            }
        });
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    /// Inverse of [`Field3::idx`].
    #[inline]
    pub fn ijk(&self, n: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [n % nx, (n / nx) % ny, n / (nx * ny)]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.idx(i, j, k);
        self.data[n] = v;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map<F: Fn(f64) -> f64 + Sync + Send>(&self, f: F) -> Self {
        let data = par::map_range(self.data.len(), |n| f(self.data[n]));
        Field3 {
            dims: self.dims,
            data,
        }
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64 + Sync + Send>(&self, other: &Field3, f: F) -> Self {
        assert_eq!(self.dims, other.dims);
        let data = par::map_range(self.data.len(), |n| f(self.data[n], other.data[n]));
        Field3 {
            dims: self.dims,
            data,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Field3) {
        assert_eq!(self.dims, other.dims);
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }
}

/// Placement of a field's components on the cell complex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stagger {
    Node,
    /// Component `c` lives on edges parallel to axis `c`.
    Edge,
    /// Component `c` lives on faces normal to axis `c`.
    Face,
    Cell,
}

impl Stagger {
    pub fn code(self) -> u32 {
        match self {
            Stagger::Node => 0,
            Stagger::Edge => 1,
            Stagger::Face => 2,
            Stagger::Cell => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Stagger::Node),
            1 => Some(Stagger::Edge),
            2 => Some(Stagger::Face),
            3 => Some(Stagger::Cell),
            _ => None,
        }
    }

    /// Array dimensions of component `comp` for a grid of `n` cells per axis.
    pub fn dims(self, n: [usize; 3], comp: usize) -> [usize; 3] {
        let mut d = [0; 3];
        for a in 0..3 {
            let cell_like = match self {
                Stagger::Node => false,
                Stagger::Cell => true,
                Stagger::Edge => a == comp,
                Stagger::Face => a != comp,
            };
            d[a] = if cell_like { n[a] } else { n[a] + 1 };
        }
        d
    }

    /// Offset of entry `(0,0,0)` of component `comp` in units of cells.
    pub fn offset(self, comp: usize) -> [f64; 3] {
        let mut o = [0.0; 3];
        for (a, oa) in o.iter_mut().enumerate() {
            let half = match self {
                Stagger::Node => false,
                Stagger::Cell => true,
                Stagger::Edge => a == comp,
                Stagger::Face => a != comp,
            };
            if half {
                *oa = 0.5;
            }
        }
        o
    }
}

/// Three-component field with a fixed staggering.
#[derive(Clone, Debug, PartialEq)]
pub struct VecField {
    pub stagger: Stagger,
    pub comps: [Field3; 3],
}

impl VecField {
    pub fn zeros(stagger: Stagger, n: [usize; 3]) -> Self {
        VecField {
            stagger,
            comps: [
                Field3::zeros(stagger.dims(n, 0)),
                Field3::zeros(stagger.dims(n, 1)),
                Field3::zeros(stagger.dims(n, 2)),
            ],
        }
    }

    pub fn all_finite(&self) -> bool {
        self.comps.iter().all(Field3::all_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(Field3::max_abs).fold(0.0, f64::max)
    }

    pub fn axpy(&mut self, a: f64, other: &VecField) {
        for c in 0..3 {
            self.comps[c].axpy(a, &other.comps[c]);
        }
    }
}

/// Three scalar fields on grid nodes.
pub type NodeVec = [Field3; 3];

pub fn node_vec_zeros(n: [usize; 3]) -> NodeVec {
    let d = [n[0] + 1, n[1] + 1, n[2] + 1];
    [Field3::zeros(d), Field3::zeros(d), Field3::zeros(d)]
}
