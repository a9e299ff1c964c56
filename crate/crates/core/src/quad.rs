//! Gauss–Legendre rules mapped to intervals.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// `(node, weight)` pairs of the `n`-point rule on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut out: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect();
    out.sort_by(|p, q| p.0.total_cmp(&q.0));
    out
}

/// Composite rule: `panels` equal sub-intervals with `n` points each.
pub fn composite(panels: usize, n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|p| gauss_legendre(n, a + p as f64 * h, a + (p + 1) as f64 * h))
        .collect()
}
