//! Experiment configuration, binary field snapshots and CSV output.
//!
//! The configuration is a flat list of `section.key = value` lines; `#`
//! starts a comment. Values are numbers, comma separated vectors, words, or
//! for scalar profiles a `;` separated list of terms:
//!
//! ```text
//! base.mu = 1.0                                  # constant
//! base.sigma = 0.2 ; compact 0.1 0.5,0.5,0.5 0.2  # constant plus a bump
//! base.rho = affine 2.0 0.1,0,0                   # value and gradient
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::carleman::Resolution as ProbeResolution;
use crate::em::InitialField;
use crate::field::{Field3, Stagger, VecField};
use crate::grid::{Domain, Resolution};
use crate::inverse::{self, StencilOrder};
use crate::params::{Bump, MaterialSpec, ScalarSpec, UniformParams};
use crate::pipeline::SolverSettings;
use crate::stability;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: String,
    line: usize,
    used: bool,
}

/// Raw `section.key → value` table with line numbers.
#[derive(Clone, Debug, Default)]
struct Table {
    entries: BTreeMap<String, Entry>,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("line {line}: expected `section.key = value`")))?;
            let key = key.trim();
            let value = value.trim();
            let valid = key.split_once('.').is_some_and(|(s, k)| {
                !s.is_empty()
                    && !k.is_empty()
                    && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
            });
            if !valid {
                return Err(cfg_err(format!("line {line}: malformed key `{key}`")));
            }
            if value.is_empty() {
                return Err(cfg_err(format!("line {line}: `{key}` has no value")));
            }
            if let Some(prev) = entries.get(key) {
                return Err(cfg_err(format!(
                    "duplicate key `{key}` on lines {} and {line}",
                    prev.line
                )));
            }
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                    used: false,
                },
            );
        }
        Ok(Table { entries })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn has_section(&self, section: &str) -> bool {
        self.entries.keys().any(|k| k.split('.').next() == Some(section))
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            Some((v, line)) => parse_f64(&v).map_err(|e| cfg_err(format!("line {line}: `{key}`: {e}"))),
            None => Ok(default),
        }
    }

    fn f64_req(&mut self, key: &str) -> Result<f64> {
        match self.take(key) {
            Some((v, line)) => parse_f64(&v).map_err(|e| cfg_err(format!("line {line}: `{key}`: {e}"))),
            None => Err(cfg_err(format!("missing mandatory key `{key}`"))),
        }
    }

    fn positive_int(&mut self, key: &str, default: Option<usize>) -> Result<usize> {
        match self.take(key) {
            Some((v, line)) => match v.parse::<i64>() {
                Ok(n) if n > 0 => Ok(n as usize),
                _ => Err(cfg_err(format!("line {line}: `{key}`: positive integer required, got `{v}`"))),
            },
            None => default.ok_or_else(|| cfg_err(format!("missing mandatory key `{key}`"))),
        }
    }

    fn vec3_or(&mut self, key: &str, default: [f64; 3]) -> Result<[f64; 3]> {
        match self.take(key) {
            Some((v, line)) => parse_vec3(&v).map_err(|e| cfg_err(format!("line {line}: `{key}`: {e}"))),
            None => Ok(default),
        }
    }

    fn with<T>(&mut self, key: &str, default: T, f: impl Fn(&str) -> std::result::Result<T, String>) -> Result<T> {
        match self.take(key) {
            Some((v, line)) => f(&v).map_err(|e| cfg_err(format!("line {line}: `{key}`: {e}"))),
            None => Ok(default),
        }
    }

    fn finish(&self) -> Result<()> {
        let unknown: Vec<String> = self
            .entries
            .iter()
            .filter(|(_, e)| !e.used)
            .map(|(k, e)| format!("`{k}` (line {})", e.line))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(cfg_err(format!("unknown key {}", unknown.join(", "))))
        }
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("expected a finite number, got `{}`", s.trim()))
}

fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma separated numbers, got `{s}`"));
    }
    Ok([parse_f64(parts[0])?, parse_f64(parts[1])?, parse_f64(parts[2])?])
}

fn parse_bump(words: &[&str]) -> std::result::Result<Bump, String> {
    match words {
        ["compact", amp, c, r] => Ok(Bump::Compact {
            amp: parse_f64(amp)?,
            center: parse_vec3(c)?,
            radius: parse_f64(r)?,
        }),
        ["gauss", amp, c, s] => Ok(Bump::Gauss {
            amp: parse_f64(amp)?,
            center: parse_vec3(c)?,
            sigma: parse_f64(s)?,
        }),
        _ => Err(format!("expected `compact AMP X,Y,Z R` or `gauss AMP X,Y,Z S`, got `{}`", words.join(" "))),
    }
}

/// Parses a scalar profile. Without a leading constant term the base is 0.
pub fn parse_scalar(s: &str) -> std::result::Result<ScalarSpec, String> {
    let mut spec = ScalarSpec::constant(0.0);
    for (i, term) in s.split(';').enumerate() {
        let words: Vec<&str> = term.split_whitespace().collect();
        match words.as_slice() {
            [v] if i == 0 => spec.base = parse_f64(v)?,
            ["affine", v, g] if i == 0 => {
                spec.base = parse_f64(v)?;
                spec.gradient = parse_vec3(g)?;
            }
            w => spec.bumps.push(parse_bump(w)?),
        }
    }
    Ok(spec)
}

fn parse_initial(s: &str) -> std::result::Result<InitialField, String> {
    let words: Vec<&str> = s.split_whitespace().collect();
    match words.as_slice() {
        ["constant", v] => Ok(InitialField::Constant(parse_vec3(v)?)),
        ["vortex", amp, c, r, axis] => {
            let axis = axis.parse::<usize>().ok().filter(|a| *a < 3).ok_or("axis must be 0, 1 or 2")?;
            Ok(InitialField::Vortex {
                amp: parse_f64(amp)?,
                center: parse_vec3(c)?,
                radius: parse_f64(r)?,
                axis,
            })
        }
        _ => Err(format!("expected `constant X,Y,Z` or `vortex AMP X,Y,Z R AXIS`, got `{s}`")),
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(parse_f64).collect()
}

/// Either a fixed weight parameter or a scan over a range.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightChoice {
    Fixed { varsigma: f64, theta: f64 },
    Scan { varsigma: (f64, f64), theta: (f64, f64), points: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightBlock {
    pub x_star: [f64; 3],
    pub c0: f64,
    pub choice: WeightChoice,
    pub resolution: ProbeResolution,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverBlock {
    pub settings: SolverSettings,
    /// Keep every `stride`-th level of forward runs.
    pub snapshot_stride: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InverseBlock {
    pub sigma_min: f64,
    pub tol_fp: f64,
    pub max_iter: usize,
    pub levels: usize,
    pub order: StencilOrder,
    /// Standard deviation of Gaussian noise added to the difference data.
    pub noise: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepBlock {
    pub scales: Vec<f64>,
    pub stride: usize,
    pub safety: f64,
    pub max_exponent: f64,
    pub min_r2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleBlock {
    pub modes: usize,
    pub cells: usize,
    pub radius: f64,
}

/// Increments of `(α, β, γ, ξ)` that define the second parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub alpha: ScalarSpec,
    pub beta: ScalarSpec,
    pub gamma: ScalarSpec,
    pub xi: ScalarSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub domain: Domain,
    pub resolution: Resolution,
    pub base: MaterialSpec,
    pub perturbation: Option<Perturbation>,
    pub experiments: [(InitialField, InitialField); 2],
    pub solver: SolverBlock,
    pub weight: WeightBlock,
    pub inverse: InverseBlock,
    pub sweep: SweepBlock,
    pub oracle: OracleBlock,
    pub output: PathBuf,
    pub seed: u64,
}

const MATERIAL_KEYS: [&str; 13] = [
    "mu",
    "epsilon",
    "sigma",
    "electrokinetic",
    "viscosity",
    "permeability",
    "lambda",
    "shear",
    "biot_c",
    "biot_m",
    "rho",
    "rho_f",
    "rho_e",
];

fn material_slot<'a>(m: &'a mut MaterialSpec, key: &str) -> &'a mut ScalarSpec {
    match key {
        "mu" => &mut m.mu,
        "epsilon" => &mut m.epsilon,
        "sigma" => &mut m.sigma,
        "electrokinetic" => &mut m.electrokinetic,
        "viscosity" => &mut m.viscosity,
        "permeability" => &mut m.permeability,
        "lambda" => &mut m.lambda,
        "shear" => &mut m.shear,
        "biot_c" => &mut m.biot_c,
        "biot_m" => &mut m.biot_m,
        "rho" => &mut m.rho,
        "rho_f" => &mut m.rho_f,
        _ => &mut m.rho_e,
    }
}

/// The canonical initial data: `(D₀, B₀) = (e₂, e₁)` and `(e₃, e₃)`.
pub fn default_experiments() -> [(InitialField, InitialField); 2] {
    let c = InitialField::Constant;
    [(c([0.0, 1.0, 0.0]), c([1.0, 0.0, 0.0])), (c([0.0, 0.0, 1.0]), c([0.0, 0.0, 1.0]))]
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = Table::parse(text)?;
        if !t.has_section("base") {
            return Err(cfg_err("missing parameter set: no `base.*` key"));
        }
        let final_time = t.f64_req("domain.final_time")?;
        let domain = Domain {
            lower: t.vec3_or("domain.lower", [0.0; 3])?,
            upper: t.vec3_or("domain.upper", [1.0; 3])?,
            shell_width: t.f64_or("domain.shell_width", 0.25)?,
            final_time,
            transition: t.f64_or("domain.transition", 0.2 * final_time)?,
        };
        let resolution = Resolution {
            n: [
                t.positive_int("grid.n1", None)?,
                t.positive_int("grid.n2", None)?,
                t.positive_int("grid.n3", None)?,
            ],
            dt_max: t.with("grid.dt_max", None, |v| parse_f64(v).map(Some))?,
        };
        let mut base = MaterialSpec::default();
        for key in MATERIAL_KEYS {
            if let Some((v, line)) = t.take(&format!("base.{key}")) {
                *material_slot(&mut base, key) =
                    parse_scalar(&v).map_err(|e| cfg_err(format!("line {line}: `base.{key}`: {e}")))?;
            }
        }
        let perturbation = if t.has_section("perturb") {
            let zero = ScalarSpec::constant(0.0);
            Some(Perturbation {
                alpha: t.with("perturb.alpha", zero.clone(), parse_scalar)?,
                beta: t.with("perturb.beta", zero.clone(), parse_scalar)?,
                gamma: t.with("perturb.gamma", zero.clone(), parse_scalar)?,
                xi: t.with("perturb.xi", zero, parse_scalar)?,
            })
        } else {
            None
        };
        let [(d1, b1), (d2, b2)] = default_experiments();
        let experiments = [
            (t.with("experiment1.d0", d1, parse_initial)?, t.with("experiment1.b0", b1, parse_initial)?),
            (t.with("experiment2.d0", d2, parse_initial)?, t.with("experiment2.b0", b2, parse_initial)?),
        ];
        let d = SolverSettings::default();
        let solver = SolverBlock {
            settings: SolverSettings {
                em_cfl: t.f64_or("solver.em_cfl", d.em_cfl)?,
                biot_cfl: t.f64_or("solver.biot_cfl", d.biot_cfl)?,
                blowup: t.f64_or("solver.blowup", d.blowup)?,
                admissibility: t.f64_or("solver.admissibility", d.admissibility)?,
            },
            snapshot_stride: t.positive_int("solver.snapshot_stride", Some(1))?,
        };
        let x_star = t.vec3_or("weight.x_star", [-2.0, 0.5, 0.5])?;
        let c0 = t.f64_or("weight.c0", 0.1)?;
        let choice = match t.take("weight.varsigma") {
            Some((v, _)) if v == "scan" => WeightChoice::Scan {
                varsigma: t.with("weight.varsigma_range", (1.0, 100.0), pair)?,
                theta: t.with("weight.theta_range", (0.01, 1.0), pair)?,
                points: t.positive_int("weight.scan_points", Some(9))?,
            },
            Some((v, line)) => WeightChoice::Fixed {
                varsigma: parse_f64(&v).map_err(|e| cfg_err(format!("line {line}: `weight.varsigma`: {e}")))?,
                theta: t.f64_or("weight.theta", 0.1)?,
            },
            None => WeightChoice::Fixed {
                varsigma: 12.0,
                theta: t.f64_or("weight.theta", 0.1)?,
            },
        };
        let pr = ProbeResolution::default();
        let weight = WeightBlock {
            x_star,
            c0,
            choice,
            resolution: ProbeResolution {
                panels: t.positive_int("weight.panels", Some(pr.panels))?,
                points: t.positive_int("weight.points", Some(pr.points))?,
            },
        };
        let inverse = InverseBlock {
            sigma_min: t.f64_or("inverse.sigma_min", inverse::DEFAULT_SIGMA_MIN)?,
            tol_fp: t.f64_or("inverse.tol_fp", inverse::DEFAULT_TOL_FP)?,
            max_iter: t.positive_int("inverse.max_iter", Some(inverse::DEFAULT_MAX_ITER))?,
            levels: t.positive_int("inverse.levels", Some(inverse::MIN_LEVELS))?,
            order: t.with("inverse.poisson_order", StencilOrder::Fourth, |v| match v {
                "2" | "second" => Ok(StencilOrder::Second),
                "4" | "fourth" => Ok(StencilOrder::Fourth),
                _ => Err(format!("expected `second` or `fourth`, got `{v}`")),
            })?,
            noise: t.f64_or("inverse.noise", 0.0)?,
        };
        let sweep = SweepBlock {
            scales: t.with("sweep.scales", stability::default_scales(), parse_list)?,
            stride: t.positive_int("sweep.stride", Some(1))?,
            safety: t.f64_or("sweep.safety", stability::DEFAULT_SAFETY)?,
            max_exponent: t.f64_or("sweep.max_exponent", 1.2)?,
            min_r2: t.f64_or("sweep.min_r2", 0.95)?,
        };
        let oracle = OracleBlock {
            modes: t.positive_int("oracle.modes", Some(32))?,
            cells: t.positive_int("oracle.cells", Some(32))?,
            radius: t.f64_or("oracle.radius", 0.3)?,
        };
        let output = t.with("output.dir", PathBuf::from("out"), |v| Ok(PathBuf::from(v)))?;
        let seed = t.with("output.seed", 0u64, |v| v.parse::<u64>().map_err(|_| format!("expected an unsigned integer, got `{v}`")))?;
        t.finish()?;
        if resolution.dt_max.is_some_and(|v| !(v > 0.0)) {
            return Err(cfg_err("`grid.dt_max` must be positive"));
        }
        Ok(ExperimentConfig {
            domain,
            resolution,
            base,
            perturbation,
            experiments,
            solver,
            weight,
            inverse,
            sweep,
            oracle,
            output,
            seed,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Constant values of the base material, if every coefficient is constant.
    pub fn uniform_base(&self) -> Option<UniformParams> {
        let m = &self.base;
        let all = [
            &m.mu,
            &m.epsilon,
            &m.sigma,
            &m.electrokinetic,
            &m.viscosity,
            &m.permeability,
            &m.lambda,
            &m.shear,
            &m.biot_c,
            &m.biot_m,
            &m.rho,
            &m.rho_f,
            &m.rho_e,
        ];
        if all.iter().any(|s| !s.bumps.is_empty() || s.gradient != [0.0; 3]) {
            return None;
        }
        Some(UniformParams {
            mu: m.mu.base,
            epsilon: m.epsilon.base,
            sigma: m.sigma.base,
            electrokinetic: m.electrokinetic.base,
            viscosity: m.viscosity.base,
            permeability: m.permeability.base,
            lambda: m.lambda.base,
            shear: m.shear.base,
            biot_c: m.biot_c.base,
            biot_m: m.biot_m.base,
            rho: m.rho.base,
            rho_f: m.rho_f.base,
            rho_e: m.rho_e.base,
        })
    }
}

fn pair(s: &str) -> std::result::Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        [a, b] if *a > 0.0 && b > a => Ok((*a, *b)),
        _ => Err(format!("expected `LO,HI` with 0 < LO < HI, got `{s}`")),
    }
}

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"ESNP";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 3 * 8 + 4 + 4 + 8;

/// One field at one time level, as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    /// Cells per axis.
    pub n: [usize; 3],
    pub stagger: Stagger,
    pub time: f64,
    pub comps: Vec<Field3>,
}

impl Snapshot {
    pub fn vector(n: [usize; 3], field: &VecField, time: f64) -> Self {
        Snapshot {
            n,
            stagger: field.stagger,
            time,
            comps: field.comps.to_vec(),
        }
    }

    pub fn nodes(n: [usize; 3], comps: &[Field3], time: f64) -> Self {
        Snapshot {
            n,
            stagger: Stagger::Node,
            time,
            comps: comps.to_vec(),
        }
    }

    pub fn to_vec_field(&self) -> Result<VecField> {
        let comps: [Field3; 3] = self
            .comps
            .clone()
            .try_into()
            .map_err(|_| Error::Snapshot(format!("expected 3 components, found {}", self.comps.len())))?;
        Ok(VecField {
            stagger: self.stagger,
            comps,
        })
    }

    fn component_dims(&self, c: usize) -> [usize; 3] {
        match self.stagger {
            Stagger::Edge | Stagger::Face => self.stagger.dims(self.n, c % 3),
            s => s.dims(self.n, 0),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        for (c, f) in self.comps.iter().enumerate() {
            if f.dims() != self.component_dims(c) {
                return Err(Error::Snapshot(format!(
                    "component {c} has dims {:?}, expected {:?}",
                    f.dims(),
                    self.component_dims(c)
                )));
            }
        }
        let payload_len: usize = self.comps.iter().map(|f| f.len() * 8).sum();
        let mut out = Vec::with_capacity(HEADER_LEN + payload_len + 8);
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        for d in self.n {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.stagger.code().to_le_bytes());
        out.extend_from_slice(&(self.comps.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        let start = out.len();
        for f in &self.comps {
            for v in f.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sum = checksum(&out[start..]);
        out.extend_from_slice(&sum.to_le_bytes());
        Ok(out)
    }

    /// Decodes and verifies a snapshot; `expected` cell counts are checked
    /// when given.
    pub fn from_bytes(bytes: &[u8], expected: Option<[usize; 3]>) -> Result<Self> {
        let err = |m: String| Error::Snapshot(m);
        if bytes.len() < HEADER_LEN + 8 {
            return Err(err(format!("truncated file: {} bytes", bytes.len())));
        }
        if &bytes[..4] != SNAPSHOT_MAGIC {
            return Err(err("bad magic tag".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != SNAPSHOT_VERSION {
            return Err(err(format!("unsupported version {version}")));
        }
        let n = [u64_at(8) as usize, u64_at(16) as usize, u64_at(24) as usize];
        let stagger = Stagger::from_code(u32_at(32)).ok_or_else(|| err(format!("unknown stagger code {}", u32_at(32))))?;
        let ncomp = u32_at(36) as usize;
        let time = f64::from_le_bytes(bytes[40..48].try_into().unwrap());
        if let Some(e) = expected {
            if e != n {
                return Err(err(format!("dimension mismatch: file has {n:?} cells, expected {e:?}")));
            }
        }
        let mut snap = Snapshot {
            n,
            stagger,
            time,
            comps: Vec::with_capacity(ncomp),
        };
        let lens: Vec<usize> = (0..ncomp)
            .map(|c| snap.component_dims(c).iter().try_fold(1usize, |a, &d| a.checked_mul(d)))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| err("dimensions overflow".into()))?;
        let payload: usize = lens.iter().sum::<usize>() * 8;
        if bytes.len() != HEADER_LEN + payload + 8 {
            return Err(err(format!(
                "truncated file: payload needs {} bytes, file has {}",
                HEADER_LEN + payload + 8,
                bytes.len()
            )));
        }
        let body = &bytes[HEADER_LEN..HEADER_LEN + payload];
        let stored = u64_at(HEADER_LEN + payload);
        if checksum(body) != stored {
            return Err(err("checksum mismatch".into()));
        }
        let mut off = 0;
        for (c, len) in lens.iter().enumerate() {
            let data = body[off..off + len * 8]
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            off += len * 8;
            snap.comps.push(Field3::from_vec(snap.component_dims(c), data));
        }
        Ok(snap)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn read(path: &Path, expected: Option<[usize; 3]>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes, expected)
    }
}

/// Sum of all bytes modulo 2⁶⁴.
pub fn checksum(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0u64, |a, &b| a.wrapping_add(b as u64))
}

/// Fixed-width rendering used in every CSV file: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV table with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}
