//! Carleman weight `φ = e^{θψ}`, `ψ = |x − x*|² − ς t²`, the pseudoconvexity
//! check on wave-speed fields, and numerical probes of the weighted
//! inequalities on manufactured fields.
//!
//! Weighted integrals use `e^{2τ(φ − S)}` with `S` the largest `φ` over the
//! quadrature points. The factor `e^{2τS}` is common to both sides and
//! cancels in every ratio.

use crate::biot::node_derivative;
use crate::field::Field3;
use crate::grid::{Domain, Grid};
use crate::quad::composite;
use crate::{par, Error, Result};

/// Pointwise pseudoconvexity margin `(1 − c₀) − ∇c·(x − x*)/(2c)`.
#[derive(Clone, Debug)]
pub struct MarginReport {
    pub margin: Field3,
    pub min_margin: f64,
    pub worst_node: [usize; 3],
}

impl MarginReport {
    pub fn pass(&self) -> bool {
        self.min_margin > 0.0
    }
}

/// Evaluates the margin on the grid nodes with central differences
/// (second-order one-sided on the boundary).
pub fn check_pseudoconvexity(grid: &Grid, c: &Field3, x_star: [f64; 3], c0: f64) -> Result<MarginReport> {
    if let Some(n) = c.data().iter().position(|&v| !(v > 0.0)) {
        let [i, j, k] = c.ijk(n);
        return Err(Error::NonPositive {
            field: "wave speed",
            node: [i, j, k],
            value: c.data()[n],
        });
    }
    let margin = Field3::from_fn(grid.node_dims(), |i, j, k| {
        let x = grid.node(i, j, k);
        let cv = c.get(i, j, k);
        let g: f64 = (0..3)
            .map(|d| node_derivative(c, i, j, k, d, grid.h[d]) * (x[d] - x_star[d]))
            .sum();
        (1.0 - c0) - g / (2.0 * cv)
    });
    let (mut worst, mut min) = (0, f64::INFINITY);
    for (n, &v) in margin.data().iter().enumerate() {
        if v < min {
            min = v;
            worst = n;
        }
    }
    Ok(MarginReport {
        worst_node: margin.ijk(worst),
        min_margin: min,
        margin,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CarlemanWeight {
    pub x_star: [f64; 3],
    pub varsigma: f64,
    pub theta: f64,
    pub c0: f64,
    pub domain: Domain,
    /// `Φ = max φ` over the closure of `Q`, attained at `t = 0` on a corner.
    pub phi_max: f64,
    pub eps: f64,
    pub delta: f64,
}

/// Squared distance from `p` to the closed box, and the largest squared
/// distance to any of its points.
fn box_distances(lower: [f64; 3], upper: [f64; 3], p: [f64; 3]) -> (f64, f64) {
    let mut near = 0.0;
    let mut far = 0.0;
    for d in 0..3 {
        let c = p[d].clamp(lower[d], upper[d]);
        near += (p[d] - c).powi(2);
        far += (p[d] - lower[d]).abs().max((p[d] - upper[d]).abs()).powi(2);
    }
    (near, far)
}

impl CarlemanWeight {
    pub fn psi(&self, x: [f64; 3], t: f64) -> f64 {
        let r2: f64 = (0..3).map(|d| (x[d] - self.x_star[d]).powi(2)).sum();
        r2 - self.varsigma * t * t
    }

    pub fn phi(&self, x: [f64; 3], t: f64) -> f64 {
        (self.theta * self.psi(x, t)).exp()
    }

    pub fn phi0(&self, x: [f64; 3]) -> f64 {
        self.phi(x, 0.0)
    }

    pub fn final_time(&self) -> f64 {
        self.domain.final_time
    }

    /// `Q₀(δ) = Ω₀ × (−T + δ, T − δ)` as (space box, time interval).
    pub fn q0(&self) -> (([f64; 3], [f64; 3]), (f64, f64)) {
        let t = self.final_time() - self.delta;
        (self.domain.interior_box(), (-t, t))
    }
}

/// Derives `Φ`, `ε` and `δ` for given `(ς, θ)` and checks the sign
/// conditions `ψ(x, ±T) < 0 ≤ ψ(x, 0)` over the closed box.
///
/// `ε = (1 − max_x φ(x, T))/4`, so that `1 − 2ε` lies strictly between
/// `φ(·, ±T)` and 1. `δ` is 0.99 times the largest band that satisfies both
/// `φ > 1 − ε` for `|t| < δ` and `φ < 1 − 2ε` for `|t| > T − δ`.
fn realize(domain: &Domain, x_star: [f64; 3], c0: f64, varsigma: f64, theta: f64) -> Result<CarlemanWeight> {
    if !(varsigma > 0.0 && theta > 0.0) {
        return Err(Error::Invalid("ς and θ must be positive".into()));
    }
    let t = domain.final_time;
    let (near, far) = box_distances(domain.lower, domain.upper, x_star);
    if far - varsigma * t * t >= 0.0 {
        return Err(Error::Invalid(format!(
            "ψ(x, ±T) < 0 fails: ς T² = {} must exceed max |x − x*|² = {far}",
            varsigma * t * t
        )));
    }
    let phi_t = (theta * (far - varsigma * t * t)).exp();
    let eps = 0.25 * (1.0 - phi_t);
    let d1 = ((near - (1.0 - eps).ln() / theta) / varsigma).sqrt();
    let d2 = t - ((far - (1.0 - 2.0 * eps).ln() / theta) / varsigma).sqrt();
    let delta = 0.99 * d1.min(d2).min(0.5 * t);
    if !(delta > 0.0) {
        return Err(Error::Invalid(format!("no admissible time band: δ = {delta}")));
    }
    Ok(CarlemanWeight {
        x_star,
        varsigma,
        theta,
        c0,
        domain: domain.clone(),
        phi_max: (theta * far).exp(),
        eps,
        delta,
    })
}

/// Builds the weight after checking that `x*` lies outside the closed box
/// and that every speed field satisfies the pseudoconvexity condition.
pub fn build_weight(
    domain: &Domain,
    grid: &Grid,
    speeds: &[Field3],
    x_star: [f64; 3],
    c0: f64,
    varsigma: f64,
    theta: f64,
) -> Result<CarlemanWeight> {
    if domain.contains_closed(x_star) {
        return Err(Error::Invalid(format!("x* = {x_star:?} lies in the closed domain")));
    }
    if !(c0 > 0.0 && c0 < 1.0) {
        return Err(Error::Invalid(format!("c0 must lie in (0, 1), got {c0}")));
    }
    for (i, c) in speeds.iter().enumerate() {
        let r = check_pseudoconvexity(grid, c, x_star, c0)?;
        if !r.pass() {
            return Err(Error::Inadmissible(format!(
                "pseudoconvexity fails for speed field {i}: margin {:e} at node {:?}",
                r.min_margin, r.worst_node
            )));
        }
    }
    realize(domain, x_star, c0, varsigma, theta)
}

/// All `(ς, θ)` on the log grids `[ς_lo, ς_hi] × [θ_lo, θ_hi]` (`n` points
/// each) for which the weight invariants hold.
pub fn scan_weights(
    domain: &Domain,
    x_star: [f64; 3],
    c0: f64,
    varsigma: (f64, f64),
    theta: (f64, f64),
    n: usize,
) -> Vec<(f64, f64)> {
    let grid = |(a, b): (f64, f64), i: usize| {
        if n <= 1 {
            a
        } else {
            a * (b / a).powf(i as f64 / (n - 1) as f64)
        }
    };
    let mut out = Vec::new();
    for i in 0..n.max(1) {
        for j in 0..n.max(1) {
            let (s, t) = (grid(varsigma, i), grid(theta, j));
            if realize(domain, x_star, c0, s, t).is_ok() {
                out.push((s, t));
            }
        }
    }
    out
}

/// Default probe grid: 16 log-spaced values in `[1, 64]`.
pub fn default_taus() -> Vec<f64> {
    (0..16).map(|i| 64f64.powf(i as f64 / 15.0)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub taus: Vec<f64>,
    /// Left side at each τ, up to the common factor `e^{2τS}`.
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub ratio: Vec<f64>,
    /// First index whose log-log slope to the next point is `≤ 1/2`.
    /// `None` when the ratio keeps growing over the whole grid.
    pub knee: Option<usize>,
    pub max_ratio: f64,
    pub pass: bool,
}

impl ProbeReport {
    fn from_sides(taus: &[f64], lhs: Vec<f64>, rhs: Vec<f64>) -> Self {
        let ratio: Vec<f64> = lhs
            .iter()
            .zip(&rhs)
            .map(|(&l, &r)| if l == 0.0 && r == 0.0 { 0.0 } else { l / r })
            .collect();
        let knee = (0..ratio.len().saturating_sub(1))
            .find(|&i| {
                let (a, b) = (ratio[i], ratio[i + 1]);
                a > 0.0 && b > 0.0 && (b / a).ln() / (taus[i + 1] / taus[i]).ln() <= 0.5
            });
        let max_ratio = ratio.iter().copied().fold(0.0, f64::max);
        let finite = ratio.iter().all(|r| r.is_finite()) && lhs.iter().chain(&rhs).all(|v| *v >= 0.0);
        let pass = finite
            && (max_ratio == 0.0 || knee.is_some_and(|k| max_ratio <= 2.0 * ratio[k]));
        ProbeReport {
            taus: taus.to_vec(),
            lhs,
            rhs,
            ratio,
            knee,
            max_ratio,
            pass,
        }
    }
}

/// Quadrature resolution: `panels` Gauss panels of `points` nodes per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resolution {
    pub panels: usize,
    pub points: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { panels: 4, points: 8 }
    }
}

/// Compact radial bump `(1 − s)^p`, `s = |x − c|²/R²`, with its gradient and
/// Hessian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub center: [f64; 3],
    pub radius: f64,
    pub power: i32,
}

impl Bump {
    pub fn derivs(&self, x: [f64; 3]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
        let r2 = self.radius * self.radius;
        let dx: [f64; 3] = std::array::from_fn(|d| x[d] - self.center[d]);
        let s = (dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]) / r2;
        if s >= 1.0 {
            return (0.0, [0.0; 3], [[0.0; 3]; 3]);
        }
        let p = self.power as f64;
        let b = (1.0 - s).powi(self.power);
        let b1 = -p * (1.0 - s).powi(self.power - 1);
        let b2 = p * (p - 1.0) * (1.0 - s).powi(self.power - 2);
        let grad = dx.map(|v| b1 * 2.0 * v / r2);
        let hess = std::array::from_fn(|i| {
            std::array::from_fn(|j| b2 * 4.0 * dx[i] * dx[j] / (r2 * r2) + if i == j { b1 * 2.0 / r2 } else { 0.0 })
        });
        (b, grad, hess)
    }

    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        (self.center.map(|c| c - self.radius), self.center.map(|c| c + self.radius))
    }
}

/// 1-D version of the bump in time, `(1 − (t − t_c)²/R_t²)^p`, with first and
/// second derivatives.
fn time_bump(t: f64, tc: f64, rt: f64, p: i32) -> (f64, f64, f64) {
    let s = ((t - tc) / rt).powi(2);
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let pf = p as f64;
    let b1 = -pf * (1.0 - s).powi(p - 1);
    let b2 = pf * (pf - 1.0) * (1.0 - s).powi(p - 2);
    let ds = 2.0 * (t - tc) / (rt * rt);
    ((1.0 - s).powi(p), b1 * ds, b2 * ds * ds + b1 * 2.0 / (rt * rt))
}

/// Space-time bump `u = amp · b(x) · b_t(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTimeBump {
    pub amp: f64,
    pub space: Bump,
    pub t_center: f64,
    pub t_radius: f64,
}

/// Values of a scalar test field needed by the wave probe.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WaveSample {
    pub u: f64,
    pub grad: [f64; 3],
    pub ut: f64,
    pub utt: f64,
    pub lap: f64,
}

impl SpaceTimeBump {
    pub fn eval(&self, x: [f64; 3], t: f64) -> WaveSample {
        let (b, g, h) = self.space.derivs(x);
        let (bt, bt1, bt2) = time_bump(t, self.t_center, self.t_radius, self.space.power);
        let a = self.amp;
        WaveSample {
            u: a * b * bt,
            grad: g.map(|v| a * v * bt),
            ut: a * b * bt1,
            utt: a * b * bt2,
            lap: a * (h[0][0] + h[1][1] + h[2][2]) * bt,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        SpaceTimeBump { amp: self.amp * k, ..*self }
    }
}

fn tensor_points(boxes: &[(f64, f64)], res: Resolution) -> (Vec<Vec<(f64, f64)>>, usize) {
    let rules: Vec<Vec<(f64, f64)>> = boxes
        .iter()
        .map(|&(a, b)| composite(res.panels, res.points, a, b))
        .collect();
    let n = rules.iter().map(Vec::len).product();
    (rules, n)
}

fn unflatten(mut p: usize, rules: &[Vec<(f64, f64)>]) -> (Vec<f64>, f64) {
    let mut x = Vec::with_capacity(rules.len());
    let mut w = 1.0;
    for r in rules {
        let (xi, wi) = r[p % r.len()];
        p /= r.len();
        x.push(xi);
        w *= wi;
    }
    (x, w)
}

/// Sums `w·e^{2τ(φ − S)}·(τ^a·A + τ^b·B)` and `w·e^{2τ(φ − S)}·R` for all τ.
/// Each sample is `(weight, φ, A, B, R)`.
fn weighted_sums(samples: &[(f64, f64, f64, f64, f64)], taus: &[f64], pa: i32, pb: i32) -> (Vec<f64>, Vec<f64>) {
    let shift = samples
        .iter()
        .filter(|s| s.2 != 0.0 || s.3 != 0.0 || s.4 != 0.0)
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return (vec![0.0; taus.len()], vec![0.0; taus.len()]);
    }
    let mut lhs = Vec::with_capacity(taus.len());
    let mut rhs = Vec::with_capacity(taus.len());
    for &tau in taus {
        let parts = par::map_range(samples.len(), |i| {
            let (w, phi, a, b, r) = samples[i];
            let e = w * (2.0 * tau * (phi - shift)).exp();
            (e * (tau.powi(pa) * a + tau.powi(pb) * b), e * r)
        });
        lhs.push(parts.iter().map(|p| p.0).sum());
        rhs.push(parts.iter().map(|p| p.1).sum());
    }
    (lhs, rhs)
}

fn inside(inner: ([f64; 3], [f64; 3]), outer: ([f64; 3], [f64; 3])) -> bool {
    (0..3).all(|d| inner.0[d] > outer.0[d] && inner.1[d] < outer.1[d])
}

/// Ratio `∫e^{2τφ}(τ³u² + τ|∇_{x,t}u|²) / ∫e^{2τφ}|∂ₜ²u − cΔu|²`.
pub fn probe_wave_carleman<C>(
    weight: &CarlemanWeight,
    u: &SpaceTimeBump,
    c: C,
    taus: &[f64],
    res: Resolution,
) -> Result<ProbeReport>
where
    C: Fn([f64; 3]) -> f64 + Sync + Send,
{
    let t_end = weight.final_time();
    let (lo, hi) = u.space.bounding_box();
    if !inside((lo, hi), (weight.domain.lower, weight.domain.upper))
        || u.t_center - u.t_radius <= -t_end
        || u.t_center + u.t_radius >= t_end
    {
        return Err(Error::Invalid("test field support touches the boundary of Q".into()));
    }
    let axes = [
        (lo[0], hi[0]),
        (lo[1], hi[1]),
        (lo[2], hi[2]),
        (u.t_center - u.t_radius, u.t_center + u.t_radius),
    ];
    let (rules, n) = tensor_points(&axes, res);
    let samples = par::map_range(n, |p| {
        let (pt, w) = unflatten(p, &rules);
        let (x, t) = ([pt[0], pt[1], pt[2]], pt[3]);
        let s = u.eval(x, t);
        let f = s.utt - c(x) * s.lap;
        let g2 = s.grad.iter().map(|v| v * v).sum::<f64>() + s.ut * s.ut;
        (w, weight.phi(x, t), s.u * s.u, g2, f * f)
    });
    let (lhs, rhs) = weighted_sums(&samples, taus, 3, 1);
    Ok(ProbeReport::from_sides(taus, lhs, rhs))
}

/// A spatial vector field with its curl and divergence.
pub trait DivCurlField: Sync {
    fn eval(&self, x: [f64; 3]) -> ([f64; 3], [f64; 3], f64);
    fn bounding_box(&self) -> ([f64; 3], [f64; 3]);
}

/// `v = a·∇b + s·curl(e₃ b)` for a bump `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpVectorField {
    pub bump: Bump,
    pub gradient: f64,
    pub swirl: f64,
}

impl BumpVectorField {
    pub fn scaled(&self, k: f64) -> Self {
        BumpVectorField {
            gradient: self.gradient * k,
            swirl: self.swirl * k,
            ..*self
        }
    }
}

impl DivCurlField for BumpVectorField {
    fn eval(&self, x: [f64; 3]) -> ([f64; 3], [f64; 3], f64) {
        let (_, g, h) = self.bump.derivs(x);
        let (a, s) = (self.gradient, self.swirl);
        let v = [a * g[0] + s * g[1], a * g[1] - s * g[0], a * g[2]];
        let curl = [s * h[2][0], s * h[2][1], -s * (h[0][0] + h[1][1])];
        let div = a * (h[0][0] + h[1][1] + h[2][2]);
        (v, curl, div)
    }

    fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        self.bump.bounding_box()
    }
}

/// Ratio `τ∫e^{2τφ₀}|v|² / ∫e^{2τφ₀}(|curl v|² + |div v|²)`.
pub fn probe_div_curl(
    weight: &CarlemanWeight,
    v: &dyn DivCurlField,
    taus: &[f64],
    res: Resolution,
) -> Result<ProbeReport> {
    let (lo, hi) = v.bounding_box();
    if !inside((lo, hi), (weight.domain.lower, weight.domain.upper)) {
        return Err(Error::Invalid("test field must vanish on the boundary".into()));
    }
    let axes = [(lo[0], hi[0]), (lo[1], hi[1]), (lo[2], hi[2])];
    let (rules, n) = tensor_points(&axes, res);
    let samples = par::map_range(n, |p| {
        let (pt, w) = unflatten(p, &rules);
        let x = [pt[0], pt[1], pt[2]];
        let (f, c, d) = v.eval(x);
        let v2: f64 = f.iter().map(|a| a * a).sum();
        let r: f64 = c.iter().map(|a| a * a).sum::<f64>() + d * d;
        (w, weight.phi0(x), v2, 0.0, r)
    });
    let (lhs, rhs) = weighted_sums(&samples, taus, 1, 0);
    Ok(ProbeReport::from_sides(taus, lhs, rhs))
}

/// Ratio `∫_{Ω₀}|v(x,0)|² / (τ∫_{Q₀(δ)}|v|² + τ⁻¹∫_{Q₀(δ)}|∂ₜv|²)`.
/// `v(x, t)` returns the field and its time derivative.
pub fn probe_time_trace<V>(weight: &CarlemanWeight, v: V, taus: &[f64], res: Resolution) -> Result<ProbeReport>
where
    V: Fn([f64; 3], f64) -> ([f64; 3], [f64; 3]) + Sync + Send,
{
    let ((lo, hi), (t0, t1)) = weight.q0();
    let space = [(lo[0], hi[0]), (lo[1], hi[1]), (lo[2], hi[2])];
    let (srules, ns) = tensor_points(&space, res);
    let trace: f64 = par::sum_range(ns, |p| {
        let (pt, w) = unflatten(p, &srules);
        let (f, _) = v([pt[0], pt[1], pt[2]], 0.0);
        w * f.iter().map(|a| a * a).sum::<f64>()
    });
    let mut axes = space.to_vec();
    axes.push((t0, t1));
    let (rules, n) = tensor_points(&axes, res);
    let parts = par::map_range(n, |p| {
        let (pt, w) = unflatten(p, &rules);
        let (f, ft) = v([pt[0], pt[1], pt[2]], pt[3]);
        (
            w * f.iter().map(|a| a * a).sum::<f64>(),
            w * ft.iter().map(|a| a * a).sum::<f64>(),
        )
    });
    let a: f64 = parts.iter().map(|p| p.0).sum();
    let b: f64 = parts.iter().map(|p| p.1).sum();
    let lhs = vec![trace; taus.len()];
    let rhs = taus.iter().map(|&t| t * a + b / t).collect();
    Ok(ProbeReport::from_sides(taus, lhs, rhs))
}
