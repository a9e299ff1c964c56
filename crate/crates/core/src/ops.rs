//! Staggered difference operators and interpolation between grid locations.
//!
//! Edge component `c` index `(i,j,k)` sits at node `(i,j,k)` shifted half a
//! cell along `c`; face component `c` sits at the node shifted half a cell
//! along both other axes.

use crate::field::{node_vec_zeros, Field3, NodeVec, Stagger, VecField};
use crate::grid::Grid;

/// `curl(w ⊙ e)` from edges to faces. `w` is an optional edge weight.
pub fn curl_edge_to_face(grid: &Grid, e: &VecField, w: Option<&[Field3; 3]>) -> VecField {
    debug_assert_eq!(e.stagger, Stagger::Edge);
    let [hx, hy, hz] = grid.h;
    let [ex, ey, ez] = &e.comps;
    let v = |c: usize, f: &Field3, i: usize, j: usize, k: usize| -> f64 {
        let n = f.idx(i, j, k);
        match w {
            Some(w) => w[c].data()[n] * f.data()[n],
            None => f.data()[n],
        }
    };
    let mut out = VecField::zeros(Stagger::Face, grid.n);
    out.comps[0].fill_with(|i, j, k| {
        (v(2, ez, i, j + 1, k) - v(2, ez, i, j, k)) / hy - (v(1, ey, i, j, k + 1) - v(1, ey, i, j, k)) / hz
    });
    out.comps[1].fill_with(|i, j, k| {
        (v(0, ex, i, j, k + 1) - v(0, ex, i, j, k)) / hz - (v(2, ez, i + 1, j, k) - v(2, ez, i, j, k)) / hx
    });
    out.comps[2].fill_with(|i, j, k| {
        (v(1, ey, i + 1, j, k) - v(1, ey, i, j, k)) / hx - (v(0, ex, i, j + 1, k) - v(0, ex, i, j, k)) / hy
    });
    out
}

/// `curl(w ⊙ f)` from faces to edges; zero on edges tangential to the boundary.
pub fn curl_face_to_edge(grid: &Grid, f: &VecField, w: Option<&[Field3; 3]>) -> VecField {
    debug_assert_eq!(f.stagger, Stagger::Face);
    let [hx, hy, hz] = grid.h;
    let [n1, n2, n3] = grid.n;
    let [fx, fy, fz] = &f.comps;
    let v = |c: usize, g: &Field3, i: usize, j: usize, k: usize| -> f64 {
        let n = g.idx(i, j, k);
        match w {
            Some(w) => w[c].data()[n] * g.data()[n],
            None => g.data()[n],
        }
    };
    let mut out = VecField::zeros(Stagger::Edge, grid.n);
    out.comps[0].fill_with(|i, j, k| {
        if j == 0 || j == n2 || k == 0 || k == n3 {
            return 0.0;
        }
        (v(2, fz, i, j, k) - v(2, fz, i, j - 1, k)) / hy - (v(1, fy, i, j, k) - v(1, fy, i, j, k - 1)) / hz
    });
    out.comps[1].fill_with(|i, j, k| {
        if i == 0 || i == n1 || k == 0 || k == n3 {
            return 0.0;
        }
        (v(0, fx, i, j, k) - v(0, fx, i, j, k - 1)) / hz - (v(2, fz, i, j, k) - v(2, fz, i - 1, j, k)) / hx
    });
    out.comps[2].fill_with(|i, j, k| {
        if i == 0 || i == n1 || j == 0 || j == n2 {
            return 0.0;
        }
        (v(1, fy, i, j, k) - v(1, fy, i - 1, j, k)) / hx - (v(0, fx, i, j, k) - v(0, fx, i, j - 1, k)) / hy
    });
    out
}

/// Divergence of an edge field at nodes; boundary nodes are left at zero.
pub fn div_edge_at_nodes(grid: &Grid, e: &VecField) -> Field3 {
    let [hx, hy, hz] = grid.h;
    let [n1, n2, n3] = grid.n;
    let [ex, ey, ez] = &e.comps;
    Field3::from_fn(grid.node_dims(), |i, j, k| {
        if i == 0 || j == 0 || k == 0 || i == n1 || j == n2 || k == n3 {
            return 0.0;
        }
        (ex.get(i, j, k) - ex.get(i - 1, j, k)) / hx
            + (ey.get(i, j, k) - ey.get(i, j - 1, k)) / hy
            + (ez.get(i, j, k) - ez.get(i, j, k - 1)) / hz
    })
}

/// Divergence of a face field at cell centres.
pub fn div_face_at_cells(grid: &Grid, f: &VecField) -> Field3 {
    let [hx, hy, hz] = grid.h;
    let [fx, fy, fz] = &f.comps;
    Field3::from_fn(grid.n, |i, j, k| {
        (fx.get(i + 1, j, k) - fx.get(i, j, k)) / hx
            + (fy.get(i, j + 1, k) - fy.get(i, j, k)) / hy
            + (fz.get(i, j, k + 1) - fz.get(i, j, k)) / hz
    })
}

/// Interpolates integer-position values along axis `a` to the midpoints
/// with `(−1, 9, 9, −1)/16`, or the two-point mean where the stencil does
/// not fit.
fn nodes_to_midpoints(f: &Field3, a: usize) -> Field3 {
    let mut dims = f.dims();
    let m = dims[a] - 1;
    dims[a] = m;
    Field3::from_fn(dims, |i, j, k| {
        let p = [i, j, k];
        let at = |q: usize| {
            let mut r = p;
            r[a] = q;
            f.get(r[0], r[1], r[2])
        };
        let x = p[a];
        if x >= 1 && x + 2 <= m {
            (-at(x - 1) + 9.0 * at(x) + 9.0 * at(x + 1) - at(x + 2)) / 16.0
        } else {
            0.5 * (at(x) + at(x + 1))
        }
    })
}

/// Fourth-order interpolation of a node coefficient to the edges of
/// direction `c`.
pub fn node_to_edge_cubic(node: &Field3, c: usize) -> Field3 {
    nodes_to_midpoints(node, c)
}

/// Fourth-order interpolation of a node coefficient to the faces normal
/// to `c`.
pub fn node_to_face_cubic(node: &Field3, c: usize) -> Field3 {
    let mut f = node.clone();
    for a in (0..3).filter(|&a| a != c) {
        f = nodes_to_midpoints(&f, a);
    }
    f
}

/// Node coefficient averaged onto the edges of direction `c` (two nodes).
pub fn node_to_edge(node: &Field3, c: usize, n: [usize; 3]) -> Field3 {
    let mut s = [0usize; 3];
    s[c] = 1;
    Field3::from_fn(Stagger::Edge.dims(n, c), |i, j, k| {
        0.5 * (node.get(i, j, k) + node.get(i + s[0], j + s[1], k + s[2]))
    })
}

/// Node coefficient averaged onto the faces normal to `c` (four nodes).
pub fn node_to_face(node: &Field3, c: usize, n: [usize; 3]) -> Field3 {
    let (a, b) = match c {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    Field3::from_fn(Stagger::Face.dims(n, c), |i, j, k| {
        let mut acc = 0.0;
        for da in 0..2 {
            for db in 0..2 {
                let mut p = [i, j, k];
                p[a] += da;
                p[b] += db;
                acc += node.get(p[0], p[1], p[2]);
            }
        }
        0.25 * acc
    })
}

pub fn node_to_edges(node: &Field3, n: [usize; 3]) -> [Field3; 3] {
    [node_to_edge(node, 0, n), node_to_edge(node, 1, n), node_to_edge(node, 2, n)]
}

pub fn node_to_faces(node: &Field3, n: [usize; 3]) -> [Field3; 3] {
    [node_to_face(node, 0, n), node_to_face(node, 1, n), node_to_face(node, 2, n)]
}

/// Averages an edge field to nodes using the two collinear edges adjacent to
/// each node (one at the boundary).
pub fn edge_to_nodes(grid: &Grid, e: &VecField) -> NodeVec {
    let mut out = node_vec_zeros(grid.n);
    for (c, o) in out.iter_mut().enumerate() {
        let src = &e.comps[c];
        let nc = grid.n[c];
        o.fill_with(|i, j, k| {
            let p = [i, j, k];
            let mut acc = 0.0;
            let mut cnt = 0.0;
            if p[c] > 0 {
                let mut q = p;
                q[c] -= 1;
                acc += src.get(q[0], q[1], q[2]);
                cnt += 1.0;
            }
            if p[c] < nc {
                acc += src.get(i, j, k);
                cnt += 1.0;
            }
            acc / cnt
        });
    }
    out
}

/// Averages a face field to nodes over the (up to four) coplanar faces
/// sharing each node.
pub fn face_to_nodes(grid: &Grid, f: &VecField) -> NodeVec {
    let mut out = node_vec_zeros(grid.n);
    for (c, o) in out.iter_mut().enumerate() {
        let src = &f.comps[c];
        let (a, b) = match c {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let n = grid.n;
        o.fill_with(|i, j, k| {
            let p = [i, j, k];
            let mut acc = 0.0;
            let mut cnt = 0.0;
            for da in 0..2usize {
                for db in 0..2usize {
                    if (da == 1 && p[a] == 0) || (da == 0 && p[a] == n[a]) {
                        continue;
                    }
                    if (db == 1 && p[b] == 0) || (db == 0 && p[b] == n[b]) {
                        continue;
                    }
                    let mut q = p;
                    q[a] -= da;
                    q[b] -= db;
                    acc += src.get(q[0], q[1], q[2]);
                    cnt += 1.0;
                }
            }
            acc / cnt
        });
    }
    out
}

/// Interpolates a field whose entries sit at half-integer positions along
/// axis `a` to the integer positions 0..=m, with the four-point cubic rule
/// `(−1, 9, 9, −1)/16` where the stencil fits, the two-point mean next to the
/// ends and the nearest value at the ends.
fn midpoints_to_nodes(f: &Field3, a: usize) -> Field3 {
    let mut dims = f.dims();
    let m = dims[a];
    dims[a] = m + 1;
    Field3::from_fn(dims, |i, j, k| {
        let p = [i, j, k];
        let at = |q: usize| {
            let mut r = p;
            r[a] = q;
            f.get(r[0], r[1], r[2])
        };
        let x = p[a];
        if x == 0 {
            at(0)
        } else if x == m {
            at(m - 1)
        } else if x >= 2 && x + 1 < m {
            (-at(x - 2) + 9.0 * at(x - 1) + 9.0 * at(x) - at(x + 1)) / 16.0
        } else {
            0.5 * (at(x - 1) + at(x))
        }
    })
}

/// Fourth-order interpolation of an edge or face field to nodes.
pub fn staggered_to_nodes_cubic(e: &VecField) -> NodeVec {
    std::array::from_fn(|c| {
        let mut f = e.comps[c].clone();
        for a in 0..3 {
            let half = match e.stagger {
                Stagger::Edge => a == c,
                Stagger::Face => a != c,
                Stagger::Cell => true,
                Stagger::Node => false,
            };
            if half {
                f = midpoints_to_nodes(&f, a);
            }
        }
        f
    })
}

/// Samples `f(component, x)` at the staggered positions.
pub fn sample<F>(grid: &Grid, stagger: Stagger, f: F) -> VecField
where
    F: Fn(usize, [f64; 3]) -> f64 + Sync + Send,
{
    let mut out = VecField::zeros(stagger, grid.n);
    for (c, comp) in out.comps.iter_mut().enumerate() {
        let off = stagger.offset(c);
        comp.fill_with(|i, j, k| f(c, grid.point(i, j, k, off)));
    }
    out
}

/// Zeroes edge values tangential to the boundary.
pub fn zero_tangential_edges(grid: &Grid, e: &mut VecField) {
    let n = grid.n;
    for c in 0..3 {
        let dims = e.comps[c].dims();
        let f = &mut e.comps[c];
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = [i, j, k];
                    let on_boundary = (0..3).any(|a| a != c && (p[a] == 0 || p[a] == n[a]));
                    if on_boundary {
                        f.set(i, j, k, 0.0);
                    }
                }
            }
        }
    }
}

/// Weighted inner product `Σ w·a·b·h³` of two staggered fields.
pub fn inner(grid: &Grid, a: &VecField, b: &VecField, w: Option<&[Field3; 3]>) -> f64 {
    let mut s = 0.0;
    for c in 0..3 {
        let (x, y) = (a.comps[c].data(), b.comps[c].data());
        s += match w {
            Some(w) => crate::par::sum_range(x.len(), |n| w[c].data()[n] * x[n] * y[n]),
            None => crate::par::sum_range(x.len(), |n| x[n] * y[n]),
        };
    }
    s * grid.cell_volume()
}
