use electroseis::field::Field3;
use electroseis::params::{check_admissibility, diagonalize, ParameterFields, PoroCoefficients, UniformParams, CHECK_NAMES};
use nalgebra::{Matrix2, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference quantities at one node, built from the matrix definitions.
#[derive(Clone, Copy, Debug)]
pub struct Brute {
    pub density_min_eig: f64,
    pub moduli_min_eig: f64,
    pub rho0: f64,
    /// `None` when ρ₀ ≤ 0 and ã is undefined.
    pub a_tilde: Option<Matrix2<f64>>,
    /// Real parts sorted descending, and the largest imaginary part.
    pub eig: Option<([f64; 2], f64)>,
}

pub fn brute(p: &PoroCoefficients) -> Brute {
    let density = Matrix2::new(p.rho, p.rho_f, p.rho_f, p.rho_e);
    let moduli = Matrix2::new(p.lambda, p.biot_c, p.biot_c, p.biot_m);
    let min_eig = |m: Matrix2<f64>| SymmetricEigen::new(m).eigenvalues.min();
    let rho0 = density.determinant();
    let (a_tilde, eig) = if rho0 > 0.0 {
        let left = Matrix2::new(rho0 / p.rho_e, p.rho_f, 0.0, p.rho_e);
        let right = Matrix2::new(
            p.lambda + p.shear - p.rho_f / p.rho_e * p.biot_c,
            p.biot_c,
            p.biot_c - p.rho_f / p.rho_e * p.biot_m,
            p.biot_m,
        );
        let mut a = left.try_inverse().unwrap() * right;
        a[(0, 0)] += p.rho_e * p.shear / rho0;
        let ev = a.complex_eigenvalues();
        let mut re = [ev[0].re, ev[1].re];
        re.sort_by(|x, y| y.total_cmp(x));
        (Some(a), Some((re, ev[0].im.abs().max(ev[1].im.abs()))))
    } else {
        (None, None)
    };
    Brute {
        density_min_eig: min_eig(density),
        moduli_min_eig: min_eig(moduli),
        rho0,
        a_tilde,
        eig,
    }
}

/// Sign of each condition at one node from the reference quantities, in
/// `CHECK_NAMES` order.
pub fn brute_pass(p: &PoroCoefficients) -> [bool; 8] {
    let b = brute(p);
    let (det, tr, small) = match (b.a_tilde, b.eig) {
        (Some(a), Some((e, _))) => (a.determinant(), a.trace(), e[1]),
        _ => (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
    };
    [
        b.density_min_eig > 0.0,
        b.moduli_min_eig > 0.0,
        p.rho_e > p.rho_f,
        p.rho > p.rho_f,
        b.rho0 > 0.0,
        det > 0.0,
        tr > 0.0,
        small > 0.0,
    ]
}

/// `(λM − C² + 2GM)/ρ₀` and the size of its terms.
pub fn det_closed_form(p: &PoroCoefficients) -> (f64, f64) {
    let rho0 = p.rho * p.rho_e - p.rho_f * p.rho_f;
    let terms = [p.lambda * p.biot_m, -p.biot_c * p.biot_c, 2.0 * p.shear * p.biot_m];
    (terms.iter().sum::<f64>() / rho0, terms.iter().map(|t| t.abs()).sum::<f64>() / rho0.abs())
}

/// Random poroelastic fields on a `3×3×3` node block: a random base point
/// with ±10% node-to-node variation, so that whole sets land on both sides
/// of every condition.
pub fn random_set(rng: &mut ChaCha8Rng) -> ParameterFields {
    let dims = [3, 3, 3];
    let mut p = ParameterFields::uniform(dims, &UniformParams::default()).unwrap();
    let mut field = |lo: f64, hi: f64| {
        let base = rng.random_range(lo..hi);
        let data = (0..27).map(|_| base * (1.0 + 0.1 * rng.random_range(-1.0..1.0))).collect();
        Field3::from_vec(dims, data)
    };
    p.rho = field(0.5, 3.0);
    p.rho_f = field(0.2, 2.0);
    p.rho_e = field(0.5, 4.0);
    p.lambda = field(-0.5, 3.0);
    p.shear = field(0.1, 2.0);
    p.biot_c = field(0.0, 3.0);
    p.biot_m = field(0.3, 4.0);
    p
}

#[derive(Debug, Default)]
pub struct SuiteSummary {
    pub sets: usize,
    pub admissible_sets: usize,
    pub flag_mismatches: usize,
    pub worst_det_rel: f64,
    pub worst_eig_rel: f64,
    pub worst_imag: f64,
    pub trace_bound_violations: usize,
}

impl SuiteSummary {
    pub fn pass(&self) -> bool {
        self.flag_mismatches == 0
            && self.worst_det_rel <= 1e-12
            && self.worst_eig_rel <= 1e-12
            && self.trace_bound_violations == 0
    }
}

/// Runs `check_admissibility` on `sets` random sets and compares every flag
/// and every node's ã quantities with the reference.
pub fn admissibility_suite(seed: u64, sets: usize) -> SuiteSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = SuiteSummary {
        sets,
        ..Default::default()
    };
    for _ in 0..sets {
        let p = random_set(&mut rng);
        let report = check_admissibility(&p, 0.0);
        let mut want = [true; 8];
        for n in 0..p.rho.len() {
            let c = p.poro_at(n);
            for (w, b) in want.iter_mut().zip(brute_pass(&c)) {
                *w &= b;
            }
            let Ok(d) = diagonalize(&c) else { continue };
            let b = brute(&c);
            let (closed, scale) = det_closed_form(&c);
            s.worst_det_rel = s.worst_det_rel.max((d.det_a_tilde() - closed).abs() / scale);
            s.worst_det_rel = s.worst_det_rel.max((b.a_tilde.unwrap().determinant() - closed).abs() / scale);
            let (e, imag) = b.eig.unwrap();
            let size = e[0].abs().max(e[1].abs());
            s.worst_imag = s.worst_imag.max(imag / size);
            for k in 0..2 {
                s.worst_eig_rel = s.worst_eig_rel.max((d.eig[k] - e[k]).abs() / size);
            }
            if !brute_pass(&c).iter().all(|&b| b) {
                continue;
            }
            let bound = c.rho_f / d.rho0 * (c.lambda + 2.0 * c.shear + c.biot_m - 2.0 * c.biot_c);
            if d.trace_a_tilde() < bound - 1e-12 * d.trace_a_tilde().abs() {
                s.trace_bound_violations += 1;
            }
        }
        for (k, name) in CHECK_NAMES.iter().enumerate() {
            if report.get(name).unwrap().pass != want[k] {
                s.flag_mismatches += 1;
            }
        }
        if report.all_pass() {
            s.admissible_sets += 1;
        }
    }
    s
}
