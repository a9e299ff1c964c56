//! Material coefficient fields, derived electromagnetic parameters and the
//! admissibility / diagonalization algebra of the Biot operator.

use crate::error::{Error, Result};
use crate::field::Field3;
use crate::grid::Grid;
use crate::par;

/// Localized perturbation added on top of a base profile.
#[derive(Clone, Debug, PartialEq)]
pub enum Bump {
    /// `amp (1 − |x−c|²/r²)⁴` inside the ball of radius `r`, zero outside.
    Compact {
        amp: f64,
        center: [f64; 3],
        radius: f64,
    },
    /// `amp exp(−|x−c|²/(2s²))`.
    Gauss {
        amp: f64,
        center: [f64; 3],
        sigma: f64,
    },
}

impl Bump {
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        match *self {
            Bump::Compact {
                amp,
                center,
                radius,
            } => {
                let s = dist2(x, center) / (radius * radius);
                if s >= 1.0 {
                    0.0
                } else {
                    amp * (1.0 - s).powi(4)
                }
            }
            Bump::Gauss { amp, center, sigma } => {
                amp * (-dist2(x, center) / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Bump {
        let mut b = self.clone();
        match &mut b {
            Bump::Compact { amp, .. } | Bump::Gauss { amp, .. } => *amp *= s,
        }
        b
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Analytic scalar profile: affine base plus a sum of bumps.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSpec {
    pub base: f64,
    pub gradient: [f64; 3],
    pub bumps: Vec<Bump>,
}

impl ScalarSpec {
    pub fn constant(v: f64) -> Self {
        ScalarSpec {
            base: v,
            gradient: [0.0; 3],
            bumps: Vec::new(),
        }
    }

    pub fn affine(v: f64, gradient: [f64; 3]) -> Self {
        ScalarSpec {
            base: v,
            gradient,
            bumps: Vec::new(),
        }
    }

    pub fn with_bump(mut self, b: Bump) -> Self {
        self.bumps.push(b);
        self
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let mut v = self.base
            + self.gradient[0] * x[0]
            + self.gradient[1] * x[1]
            + self.gradient[2] * x[2];
        for b in &self.bumps {
            v += b.eval(x);
        }
        v
    }

    pub fn sample(&self, grid: &Grid) -> Field3 {
        Field3::from_fn(grid.node_dims(), |i, j, k| self.eval(grid.node(i, j, k)))
    }
}

/// Analytic description of all thirteen primary coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialSpec {
    pub mu: ScalarSpec,
    pub epsilon: ScalarSpec,
    pub sigma: ScalarSpec,
    pub electrokinetic: ScalarSpec,
    pub viscosity: ScalarSpec,
    pub permeability: ScalarSpec,
    pub lambda: ScalarSpec,
    pub shear: ScalarSpec,
    pub biot_c: ScalarSpec,
    pub biot_m: ScalarSpec,
    pub rho: ScalarSpec,
    pub rho_f: ScalarSpec,
    pub rho_e: ScalarSpec,
}

impl Default for MaterialSpec {
    /// Unit electromagnetic medium with a weak coupling and the reference
    /// poroelastic moduli (ρ, ρ_f, ρ_e) = (2, 1, 3), (λ, G, C, M) = (2, 1, 1, 3).
    fn default() -> Self {
        let c = ScalarSpec::constant;
        MaterialSpec {
            mu: c(1.0),
            epsilon: c(1.0),
            sigma: c(0.0),
            electrokinetic: c(0.0),
            viscosity: c(1.0),
            permeability: c(1.0),
            lambda: c(2.0),
            shear: c(1.0),
            biot_c: c(1.0),
            biot_m: c(3.0),
            rho: c(2.0),
            rho_f: c(1.0),
            rho_e: c(3.0),
        }
    }
}

/// Node-sampled coefficient fields plus the derived electromagnetic set.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterFields {
    pub mu: Field3,
    pub epsilon: Field3,
    pub sigma: Field3,
    pub electrokinetic: Field3,
    pub viscosity: Field3,
    pub permeability: Field3,
    pub lambda: Field3,
    pub shear: Field3,
    pub biot_c: Field3,
    pub biot_m: Field3,
    pub rho: Field3,
    pub rho_f: Field3,
    pub rho_e: Field3,
    /// `1/μ`
    pub alpha: Field3,
    /// `1/ε`
    pub beta: Field3,
    /// `σ/ε`
    pub gamma: Field3,
    /// `Lη/(κε)`
    pub xi: Field3,
}

impl ParameterFields {
    /// Samples the spec at nodes and derives α, β, γ, ξ.
    pub fn from_spec(grid: &Grid, spec: &MaterialSpec) -> Result<Self> {
        let dims = grid.node_dims();
        let mut f = ParameterFields {
            mu: spec.mu.sample(grid),
            epsilon: spec.epsilon.sample(grid),
            sigma: spec.sigma.sample(grid),
            electrokinetic: spec.electrokinetic.sample(grid),
            viscosity: spec.viscosity.sample(grid),
            permeability: spec.permeability.sample(grid),
            lambda: spec.lambda.sample(grid),
            shear: spec.shear.sample(grid),
            biot_c: spec.biot_c.sample(grid),
            biot_m: spec.biot_m.sample(grid),
            rho: spec.rho.sample(grid),
            rho_f: spec.rho_f.sample(grid),
            rho_e: spec.rho_e.sample(grid),
            alpha: Field3::zeros(dims),
            beta: Field3::zeros(dims),
            gamma: Field3::zeros(dims),
            xi: Field3::zeros(dims),
        };
        f.derive_em_parameters()?;
        Ok(f)
    }

    /// Uniform fields of the given node dimensions, derived.
    pub fn uniform(dims: [usize; 3], v: &UniformParams) -> Result<Self> {
        let c = |x: f64| Field3::filled(dims, x);
        let mut f = ParameterFields {
            mu: c(v.mu),
            epsilon: c(v.epsilon),
            sigma: c(v.sigma),
            electrokinetic: c(v.electrokinetic),
            viscosity: c(v.viscosity),
            permeability: c(v.permeability),
            lambda: c(v.lambda),
            shear: c(v.shear),
            biot_c: c(v.biot_c),
            biot_m: c(v.biot_m),
            rho: c(v.rho),
            rho_f: c(v.rho_f),
            rho_e: c(v.rho_e),
            alpha: c(0.0),
            beta: c(0.0),
            gamma: c(0.0),
            xi: c(0.0),
        };
        f.derive_em_parameters()?;
        Ok(f)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.mu.dims()
    }

    /// Fills α = 1/μ, β = 1/ε, γ = σ/ε, ξ = Lη/(κε).
    pub fn derive_em_parameters(&mut self) -> Result<()> {
        for (name, f) in [
            ("mu", &self.mu),
            ("epsilon", &self.epsilon),
            ("permeability", &self.permeability),
            ("viscosity", &self.viscosity),
        ] {
            require_positive(name, f)?;
        }
        for (name, f) in [("sigma", &self.sigma), ("electrokinetic", &self.electrokinetic)] {
            require_nonnegative(name, f)?;
        }
        self.alpha = self.mu.map(|m| 1.0 / m);
        self.beta = self.epsilon.map(|e| 1.0 / e);
        self.gamma = self.sigma.zip_map(&self.epsilon, |s, e| s / e);
        let dims = self.dims();
        let xi = par::map_range(self.mu.len(), |n| {
            self.electrokinetic.data()[n] * self.viscosity.data()[n]
                / (self.permeability.data()[n] * self.epsilon.data()[n])
        });
        self.xi = Field3::from_vec(dims, xi);
        Ok(())
    }

    /// Returns the parameter set whose derived fields are shifted by the
    /// given increments; μ, ε, σ, L are recomputed so that derivation is
    /// consistent.
    pub fn with_em_increments(
        &self,
        d_alpha: &Field3,
        d_beta: &Field3,
        d_gamma: &Field3,
        d_xi: &Field3,
    ) -> Result<Self> {
        let mut out = self.clone();
        let alpha = self.alpha.zip_map(d_alpha, |a, d| a + d);
        let beta = self.beta.zip_map(d_beta, |a, d| a + d);
        require_positive("alpha", &alpha)?;
        require_positive("beta", &beta)?;
        out.mu = alpha.map(|a| 1.0 / a);
        out.epsilon = beta.map(|b| 1.0 / b);
        let gamma = self.gamma.zip_map(d_gamma, |a, d| a + d);
        out.sigma = gamma.zip_map(&out.epsilon, |g, e| g * e);
        let xi = self.xi.zip_map(d_xi, |a, d| a + d);
        let dims = self.dims();
        let el = par::map_range(xi.len(), |n| {
            xi.data()[n] * self.permeability.data()[n] * out.epsilon.data()[n]
                / self.viscosity.data()[n]
        });
        out.electrokinetic = Field3::from_vec(dims, el);
        out.derive_em_parameters()?;
        // Keep the requested derived values exactly.
        out.alpha = alpha;
        out.beta = beta;
        out.gamma = gamma;
        out.xi = xi;
        Ok(out)
    }

    /// Poroelastic coefficients at node `n` (flat index).
    pub fn poro_at(&self, n: usize) -> PoroCoefficients {
        PoroCoefficients {
            rho: self.rho.data()[n],
            rho_f: self.rho_f.data()[n],
            rho_e: self.rho_e.data()[n],
            lambda: self.lambda.data()[n],
            shear: self.shear.data()[n],
            biot_c: self.biot_c.data()[n],
            biot_m: self.biot_m.data()[n],
        }
    }
}

/// Constant coefficient values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformParams {
    pub mu: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub electrokinetic: f64,
    pub viscosity: f64,
    pub permeability: f64,
    pub lambda: f64,
    pub shear: f64,
    pub biot_c: f64,
    pub biot_m: f64,
    pub rho: f64,
    pub rho_f: f64,
    pub rho_e: f64,
}

impl Default for UniformParams {
    fn default() -> Self {
        UniformParams {
            mu: 1.0,
            epsilon: 1.0,
            sigma: 0.0,
            electrokinetic: 0.0,
            viscosity: 1.0,
            permeability: 1.0,
            lambda: 2.0,
            shear: 1.0,
            biot_c: 1.0,
            biot_m: 3.0,
            rho: 2.0,
            rho_f: 1.0,
            rho_e: 3.0,
        }
    }
}

fn require_positive(name: &'static str, f: &Field3) -> Result<()> {
    check_sign(name, f, |v| v > 0.0)
}

fn require_nonnegative(name: &'static str, f: &Field3) -> Result<()> {
    check_sign(name, f, |v| v >= 0.0)
}

fn check_sign(name: &'static str, f: &Field3, ok: impl Fn(f64) -> bool) -> Result<()> {
    match f.data().iter().position(|&v| !ok(v)) {
        None => Ok(()),
        Some(n) => Err(Error::NonPositive {
            field: name,
            node: f.ijk(n),
            value: f.data()[n],
        }),
    }
}

/// The seven poroelastic coefficients at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoroCoefficients {
    pub rho: f64,
    pub rho_f: f64,
    pub rho_e: f64,
    pub lambda: f64,
    pub shear: f64,
    pub biot_c: f64,
    pub biot_m: f64,
}

/// Diagonalization quantities at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeDiag {
    pub rho0: f64,
    pub rho1: f64,
    /// Row-major `a = [[a11, a12], [a21, a22]]`.
    pub a: [[f64; 2]; 2],
    pub c: f64,
    pub a_tilde: [[f64; 2]; 2],
    /// Eigenvalues of `ã`, larger first.
    pub eig: [f64; 2],
}

impl NodeDiag {
    pub fn det_a_tilde(&self) -> f64 {
        self.a_tilde[0][0] * self.a_tilde[1][1] - self.a_tilde[0][1] * self.a_tilde[1][0]
    }

    pub fn trace_a_tilde(&self) -> f64 {
        self.a_tilde[0][0] + self.a_tilde[1][1]
    }
}

/// Builds ρ₀, ρ₁, a, c, ã and the eigenvalues of ã at a point.
pub fn diagonalize(p: &PoroCoefficients) -> Result<NodeDiag> {
    let PoroCoefficients {
        rho,
        rho_f,
        rho_e,
        lambda,
        shear,
        biot_c,
        biot_m,
    } = *p;
    let rho0 = rho * rho_e - rho_f * rho_f;
    if !(rho0 > 0.0) {
        return Err(Error::Inadmissible(format!(
            "rho0 = rho*rho_e - rho_f^2 = {rho0} must be positive"
        )));
    }
    let rho1 = rho0 / rho_f;
    let r = rho_f / rho_e;
    let a11 = (rho_e / rho0) * (lambda + shear - r * biot_c) - (rho_f / rho0) * (biot_c - r * biot_m);
    let a12 = (rho_e / rho0) * biot_c - (rho_f / rho0) * biot_m;
    let a21 = (biot_c - r * biot_m) / rho_e;
    let a22 = biot_m / rho_e;
    let c = rho_e * shear / rho0;
    let t11 = c + a11;
    let sum = t11 + a22;
    let det = t11 * a22 - a12 * a21;
    let disc = ((t11 - a22).powi(2) + 4.0 * a12 * a21).max(0.0);
    let big = 0.5 * (sum + sum.signum() * disc.sqrt());
    let small = if big != 0.0 { det / big } else { 0.5 * (sum - disc.sqrt()) };
    Ok(NodeDiag {
        rho0,
        rho1,
        a: [[a11, a12], [a21, a22]],
        c,
        a_tilde: [[t11, a12], [a21, a22]],
        eig: [big.max(small), big.min(small)],
    })
}

/// Per-node diagonalization data.
#[derive(Clone, Debug)]
pub struct DiagonalizationData {
    pub dims: [usize; 3],
    pub nodes: Vec<NodeDiag>,
}

impl DiagonalizationData {
    pub fn field(&self, f: impl Fn(&NodeDiag) -> f64 + Sync + Send) -> Field3 {
        Field3::from_vec(self.dims, par::map_range(self.nodes.len(), |n| f(&self.nodes[n])))
    }
}

pub fn compute_diagonalization(fields: &ParameterFields) -> Result<DiagonalizationData> {
    let n = fields.rho.len();
    let res: Vec<Result<NodeDiag>> = par::map_range(n, |i| {
        diagonalize(&fields.poro_at(i)).map_err(|e| match e {
            Error::Inadmissible(msg) => {
                Error::Inadmissible(format!("{msg} (node {:?})", fields.rho.ijk(i)))
            }
            other => other,
        })
    });
    let nodes = res.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DiagonalizationData {
        dims: fields.dims(),
        nodes,
    })
}

/// Outcome of one admissibility condition over the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    /// Minimum margin over all nodes.
    pub margin: f64,
    pub worst_node: [usize; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibilityReport {
    pub threshold: f64,
    pub checks: Vec<Check>,
}

impl AdmissibilityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

pub const DEFAULT_MARGIN_THRESHOLD: f64 = 1e-10;

/// Smallest-eigenvalue surrogate for a symmetric 2×2 matrix: its
/// determinant when the leading entry is positive, otherwise the most
/// negative of the two. Positive exactly when the matrix is SPD.
fn spd2_margin(a: f64, b: f64, d: f64) -> f64 {
    let det = a * d - b * b;
    if a > 0.0 {
        det
    } else {
        a.min(det)
    }
}

pub const CHECK_NAMES: [&str; 8] = [
    "density_spd",
    "moduli_spd",
    "rho_e_gt_rho_f",
    "rho_gt_rho_f",
    "rho0_positive",
    "det_a_tilde_positive",
    "trace_a_tilde_positive",
    "eig_a_tilde_positive",
];

/// Margins of the eight conditions at one node, in `CHECK_NAMES` order.
/// Diagonalization-derived margins are `-inf` when ρ₀ ≤ 0.
pub fn node_margins(p: &PoroCoefficients) -> [f64; 8] {
    let density = spd2_margin(p.rho, p.rho_f, p.rho_e);
    let moduli = spd2_margin(p.lambda, p.biot_c, p.biot_m);
    let rho0 = p.rho * p.rho_e - p.rho_f * p.rho_f;
    let (det, tr, eig) = match diagonalize(p) {
        Ok(d) => (d.det_a_tilde(), d.trace_a_tilde(), d.eig[1]),
        Err(_) => (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
    };
    [
        density,
        moduli,
        p.rho_e - p.rho_f,
        p.rho - p.rho_f,
        rho0,
        det,
        tr,
        eig,
    ]
}

/// Evaluates every condition at every node; never fails.
pub fn check_admissibility(fields: &ParameterFields, threshold: f64) -> AdmissibilityReport {
    let n = fields.rho.len();
    let margins = par::map_range(n, |i| node_margins(&fields.poro_at(i)));
    let checks = (0..CHECK_NAMES.len())
        .map(|c| {
            let mut worst = f64::INFINITY;
            let mut at = 0;
            for (i, m) in margins.iter().enumerate() {
                if m[c] < worst || m[c].is_nan() {
                    worst = m[c];
                    at = i;
                    if worst.is_nan() {
                        break;
                    }
                }
            }
            Check {
                name: CHECK_NAMES[c],
                pass: worst > threshold,
                margin: worst,
                worst_node: fields.rho.ijk(at),
            }
        })
        .collect();
    AdmissibilityReport { threshold, checks }
}

/// Speed-squared fields `[αβ, ρ_e G/ρ₀, λ̃₁, λ̃₂]` whose pseudoconvexity
/// must be checked.
pub fn wave_speed_fields(fields: &ParameterFields) -> Result<[Field3; 4]> {
    let report = check_admissibility(fields, DEFAULT_MARGIN_THRESHOLD);
    if !report.all_pass() {
        let names: Vec<String> = report
            .failures()
            .iter()
            .map(|c| format!("{} (margin {:e} at {:?})", c.name, c.margin, c.worst_node))
            .collect();
        return Err(Error::Inadmissible(names.join(", ")));
    }
    let diag = compute_diagonalization(fields)?;
    Ok([
        fields.alpha.zip_map(&fields.beta, |a, b| a * b),
        diag.field(|d| d.c),
        diag.field(|d| d.eig[0]),
        diag.field(|d| d.eig[1]),
    ])
}

/// Maximum relative second difference `h²|Δ²f|/max|f|` per coefficient, for
/// smoothness warnings.
pub fn roughness(f: &Field3) -> f64 {
    let [nx, ny, nz] = f.dims();
    let scale = f.max_abs().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let c = f.get(i, j, k);
                if i > 0 && i + 1 < nx {
                    worst = worst.max((f.get(i - 1, j, k) - 2.0 * c + f.get(i + 1, j, k)).abs());
                }
                if j > 0 && j + 1 < ny {
                    worst = worst.max((f.get(i, j - 1, k) - 2.0 * c + f.get(i, j + 1, k)).abs());
                }
                if k > 0 && k + 1 < nz {
                    worst = worst.max((f.get(i, j, k - 1) - 2.0 * c + f.get(i, j, k + 1)).abs());
                }
            }
        }
    }
    worst / scale
}
