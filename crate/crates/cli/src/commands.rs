use std::path::{Path, PathBuf};

use electroseis::carleman::{
    build_weight, check_pseudoconvexity, default_taus, probe_div_curl, probe_time_trace, probe_wave_carleman, scan_weights,
    Bump as ProbeBump, BumpVectorField, CarlemanWeight, ProbeReport, SpaceTimeBump,
};
use electroseis::em::SnapshotPolicy;
use electroseis::field::Field3;
use electroseis::galerkin::{oracle_agreement, OracleSetup};
use electroseis::grid::{build_domain, Domain, Grid};
use electroseis::inverse::{
    add_noise, assemble_system, collect_measurement, estimate_initial_derivatives, FixedPointOptions,
};
use electroseis::io::{fmt_f64, Csv, ExperimentConfig, Snapshot, WeightChoice};
use electroseis::params::{check_admissibility, wave_speed_fields, ParameterFields, CHECK_NAMES};
use electroseis::pipeline::{shared_grid, CoupledRun};
use electroseis::stability::{fit_holder, holder_sweep, SweepSetup};
use electroseis::{Error, Result};

pub struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub domain: Domain,
    pub grid: Grid,
}

impl Context {
    pub fn load(path: &Path, out: Option<&Path>) -> Result<Self> {
        let config = ExperimentConfig::load(path)?;
        let out = match out {
            Some(o) => o.to_path_buf(),
            None if config.output.is_absolute() => config.output.clone(),
            None => path.parent().unwrap_or(Path::new(".")).join(&config.output),
        };
        let (domain, grid) = build_domain(config.domain.clone(), config.resolution)?;
        Ok(Context {
            config,
            out,
            domain,
            grid,
        })
    }

    fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = if name.is_empty() { self.out.clone() } else { self.out.join(name) };
        std::fs::create_dir_all(&d)?;
        Ok(d)
    }

    fn base(&self) -> Result<ParameterFields> {
        ParameterFields::from_spec(&self.grid, &self.config.base)
    }

    /// Increments of `(α, β, γ, ξ)` at nodes, from the `perturb` block.
    fn increments(&self) -> Result<[Field3; 4]> {
        let p = self
            .config
            .perturbation
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a `perturb` block".into()))?;
        let g = &self.grid;
        Ok([p.alpha.sample(g), p.beta.sample(g), p.gamma.sample(g), p.xi.sample(g)])
    }

    fn initial(&self, grid: &Grid) -> [(electroseis::field::VecField, electroseis::field::VecField); 2] {
        self.config.experiments.clone().map(|(d, b)| (d.edge_field(grid), b.face_field(grid)))
    }
}

fn report_admissibility(csv: &mut Csv, label: &str, p: &ParameterFields, threshold: f64) -> bool {
    let r = check_admissibility(p, threshold);
    for c in &r.checks {
        println!(
            "{label:>6} {:<28} margin {:>24} at {:?} {}",
            c.name,
            fmt_f64(c.margin),
            c.worst_node,
            if c.pass { "ok" } else { "FAIL" }
        );
        csv.push(vec![
            label.into(),
            c.name.into(),
            fmt_f64(c.margin),
            format!("{} {} {}", c.worst_node[0], c.worst_node[1], c.worst_node[2]),
            c.pass.to_string(),
        ]);
    }
    debug_assert_eq!(r.checks.len(), CHECK_NAMES.len());
    r.all_pass()
}

pub fn check_params(ctx: &Context) -> Result<bool> {
    let threshold = ctx.config.solver.settings.admissibility;
    let mut sets = vec![("base", ctx.base()?)];
    if ctx.config.perturbation.is_some() {
        let [a, b, g, x] = ctx.increments()?;
        sets.push(("twin", sets[0].1.with_em_increments(&a, &b, &g, &x)?));
    }
    let mut csv = Csv::new(&["set", "check", "margin", "worst_node", "pass"]);
    let mut ok = true;
    for (label, p) in &sets {
        ok &= report_admissibility(&mut csv, label, p, threshold);
    }
    let w = &ctx.config.weight;
    if ok {
        let speed_names = ["em", "shear", "biot_1", "biot_2"];
        for (label, p) in &sets {
            for (name, c) in speed_names.iter().zip(wave_speed_fields(p)?) {
                let r = check_pseudoconvexity(&ctx.grid, &c, w.x_star, w.c0)?;
                let check = format!("pseudoconvexity_{name}");
                println!(
                    "{label:>6} {check:<28} margin {:>24} at {:?} {}",
                    fmt_f64(r.min_margin),
                    r.worst_node,
                    if r.pass() { "ok" } else { "FAIL" }
                );
                csv.push(vec![
                    label.to_string(),
                    check,
                    fmt_f64(r.min_margin),
                    format!("{} {} {}", r.worst_node[0], r.worst_node[1], r.worst_node[2]),
                    r.pass().to_string(),
                ]);
                ok &= r.pass();
            }
        }
    }
    csv.write(&ctx.dir("")?.join("check_params.csv"))?;
    Ok(ok)
}

pub fn forward(ctx: &Context) -> Result<bool> {
    let p = ctx.base()?;
    let s = &ctx.config.solver;
    let grid = shared_grid(&ctx.grid, ctx.domain.final_time, &[&p], &s.settings)?;
    let policy = SnapshotPolicy::every(s.snapshot_stride);
    let mut runs = Vec::new();
    for (d0, b0) in ctx.initial(&grid) {
        // Validation happens here, before any step is taken.
        runs.push(CoupledRun::new(&grid, &p, d0, b0, &s.settings)?);
    }
    let mut csv = Csv::new(&["experiment", "level", "time", "em_energy", "max_u", "max_w"]);
    for (j, run) in runs.iter_mut().enumerate() {
        let dir = ctx.dir(&format!("forward/exp{}", j + 1))?;
        let mut emit = |run: &CoupledRun| -> Result<()> {
            let f = run.frame();
            let max = |v: &[Field3; 3]| v.iter().map(Field3::max_abs).fold(0.0, f64::max);
            csv.push(vec![
                (j + 1).to_string(),
                f.level.to_string(),
                fmt_f64(f.time),
                fmt_f64(run.em_energy()),
                fmt_f64(max(&f.u)),
                fmt_f64(max(&f.w)),
            ]);
            if policy.keeps(f.level) {
                let tag = format!("{:06}", f.level);
                Snapshot::vector(grid.n, &f.d, f.time).write(&dir.join(format!("d_{tag}.esnp")))?;
                Snapshot::vector(grid.n, &f.b, f.time).write(&dir.join(format!("b_{tag}.esnp")))?;
                Snapshot::nodes(grid.n, &f.u, f.time).write(&dir.join(format!("u_{tag}.esnp")))?;
                Snapshot::nodes(grid.n, &f.w, f.time).write(&dir.join(format!("w_{tag}.esnp")))?;
            }
            Ok(())
        };
        emit(run)?;
        for _ in 0..grid.n_t {
            run.step()?;
            emit(run)?;
        }
    }
    csv.write(&ctx.dir("forward")?.join("forward.csv"))?;
    println!("{} levels of dt = {} written to {}", grid.n_t, fmt_f64(grid.dt), ctx.out.display());
    Ok(true)
}

pub fn oracle(ctx: &Context) -> Result<bool> {
    let material = ctx
        .config
        .uniform_base()
        .ok_or_else(|| Error::Config("the oracle needs a constant base material".into()))?;
    let o = &ctx.config.oracle;
    let setup = OracleSetup {
        material,
        n: o.cells,
        m: o.modes,
        radius: o.radius,
        ..OracleSetup::default()
    };
    let r = oracle_agreement(&setup)?;
    let pass = r.rel_l2 <= 2e-2;
    println!(
        "Galerkin m = {} vs FD n = {} over {} levels to T = {}: relative L2 {} {}",
        r.m,
        r.n,
        r.levels,
        fmt_f64(r.t_end),
        fmt_f64(r.rel_l2),
        if pass { "ok" } else { "FAIL" }
    );
    let mut csv = Csv::new(&["m", "n", "t_end", "levels", "rel_l2", "pass"]);
    csv.push(vec![
        r.m.to_string(),
        r.n.to_string(),
        fmt_f64(r.t_end),
        r.levels.to_string(),
        fmt_f64(r.rel_l2),
        pass.to_string(),
    ]);
    csv.write(&ctx.dir("")?.join("oracle.csv"))?;
    Ok(pass)
}

fn probe_all(ctx: &Context, w: &CarlemanWeight) -> Result<[ProbeReport; 3]> {
    let d = &ctx.domain;
    let center: [f64; 3] = std::array::from_fn(|k| 0.5 * (d.lower[k] + d.upper[k]));
    let ext = d.extent().iter().copied().fold(f64::INFINITY, f64::min);
    let bump = ProbeBump {
        center,
        radius: 0.3 * ext,
        power: 6,
    };
    let t = d.final_time;
    let res = ctx.config.weight.resolution;
    let base = ctx.config.base.clone();
    let speed = move |x: [f64; 3]| 1.0 / (base.mu.eval(x) * base.epsilon.eval(x));
    let wave = SpaceTimeBump {
        amp: 1.0,
        space: bump.clone(),
        t_center: 0.0,
        t_radius: 0.5 * t,
    };
    let vf = BumpVectorField {
        bump: bump.clone(),
        gradient: 1.0,
        swirl: 0.7,
    };
    let k = 3.0 / t;
    let trace = move |x: [f64; 3], s: f64| {
        let (b, _, _) = bump.derivs(x);
        ([b * (k * s).cos(), 0.0, 0.0], [-k * b * (k * s).sin(), 0.0, 0.0])
    };
    let taus = default_taus();
    Ok([
        probe_wave_carleman(w, &wave, speed, &taus, res)?,
        probe_div_curl(w, &vf, &taus, res)?,
        probe_time_trace(w, trace, &taus, res)?,
    ])
}

pub fn carleman_probe(ctx: &Context) -> Result<bool> {
    let wb = &ctx.config.weight;
    let p = ctx.base()?;
    let speeds = wave_speed_fields(&p)?;
    let pairs = match wb.choice {
        WeightChoice::Fixed { varsigma, theta } => vec![(varsigma, theta)],
        WeightChoice::Scan { varsigma, theta, points } => {
            let found = scan_weights(&ctx.domain, wb.x_star, wb.c0, varsigma, theta, points);
            if found.is_empty() {
                return Err(Error::Invalid("no feasible (ς, θ) on the scan grid".into()));
            }
            found
        }
    };
    let mut summary = Csv::new(&[
        "varsigma", "theta", "phi_max", "eps", "delta", "probe", "knee_tau", "max_ratio", "pass",
    ]);
    let mut curves = Csv::new(&["varsigma", "theta", "probe", "tau", "lhs", "rhs", "ratio"]);
    let mut any = false;
    for (s, th) in pairs {
        let w = build_weight(&ctx.domain, &ctx.grid, &speeds, wb.x_star, wb.c0, s, th)?;
        let reports = probe_all(ctx, &w)?;
        let mut all = true;
        for (name, r) in ["wave", "div_curl", "time_trace"].iter().zip(&reports) {
            all &= r.pass;
            let knee = r.knee.map(|k| fmt_f64(r.taus[k])).unwrap_or_else(|| "none".into());
            println!(
                "ς = {s:<8.4} θ = {th:<8.4} {name:<10} knee τ = {knee:<24} max ratio {} {}",
                fmt_f64(r.max_ratio),
                if r.pass { "ok" } else { "FAIL" }
            );
            summary.push(vec![
                fmt_f64(s),
                fmt_f64(th),
                fmt_f64(w.phi_max),
                fmt_f64(w.eps),
                fmt_f64(w.delta),
                name.to_string(),
                knee,
                fmt_f64(r.max_ratio),
                r.pass.to_string(),
            ]);
            for i in 0..r.taus.len() {
                curves.push(vec![
                    fmt_f64(s),
                    fmt_f64(th),
                    name.to_string(),
                    fmt_f64(r.taus[i]),
                    fmt_f64(r.lhs[i]),
                    fmt_f64(r.rhs[i]),
                    fmt_f64(r.ratio[i]),
                ]);
            }
        }
        any |= all;
    }
    let dir = ctx.dir("")?;
    summary.write(&dir.join("carleman_probe.csv"))?;
    curves.write(&dir.join("carleman_curves.csv"))?;
    Ok(any)
}

pub fn reconstruct(ctx: &Context) -> Result<bool> {
    let c = &ctx.config;
    let p1 = ctx.base()?;
    let truth = ctx.increments()?;
    let p2 = p1.with_em_increments(&truth[0], &truth[1], &truth[2], &truth[3])?;
    let s = &c.solver.settings;
    let grid = shared_grid(&ctx.grid, ctx.domain.final_time, &[&p1, &p2], s)?;
    let mut m = collect_measurement(&grid, &p1, &p2, ctx.initial(&grid), c.inverse.levels, s)?;
    add_noise(&mut m, c.inverse.noise, c.seed)?;
    let derivs = estimate_initial_derivatives(&m)?;
    let sys = assemble_system(&grid, derivs, &p1, c.inverse.sigma_min)?;
    let opts = FixedPointOptions {
        tol: c.inverse.tol_fp,
        max_iter: c.inverse.max_iter,
        order: c.inverse.order,
        ..FixedPointOptions::default()
    };
    let r = electroseis::inverse::reconstruct(&sys, &opts)?;
    let errors = r.errors(&grid, [&truth[0], &truth[1], &truth[2], &truth[3]]);
    let dir = ctx.dir("reconstruct")?;
    let names = ["alpha", "beta", "gamma", "xi"];
    let fields = [&r.alpha, &r.beta, &r.gamma, &r.xi];
    let mut csv = Csv::new(&["field", "relative_l2_error", "max_abs_recovered", "max_abs_truth"]);
    for k in 0..4 {
        println!("{:<6} relative L2 error {}", names[k], fmt_f64(errors[k]));
        csv.push(vec![
            names[k].into(),
            fmt_f64(errors[k]),
            fmt_f64(fields[k].max_abs()),
            fmt_f64(truth[k].max_abs()),
        ]);
        Snapshot::nodes(grid.n, &[fields[k].clone()], 0.0).write(&dir.join(format!("{}.esnp", names[k])))?;
    }
    csv.write(&dir.join("errors.csv"))?;
    let mut diag = Csv::new(&["iterations", "worst_sigma_ratio", "ls_residual", "poisson_residual", "xi_fd_gap"]);
    diag.push(vec![
        r.iterations.to_string(),
        fmt_f64(sys.worst_sigma),
        fmt_f64(r.ls_residual),
        fmt_f64(r.poisson_residual),
        fmt_f64(r.xi_fd_gap),
    ]);
    diag.write(&dir.join("diagnostics.csv"))?;
    println!(
        "{} fixed-point iteration(s), worst σ ratio {}",
        r.iterations,
        fmt_f64(sys.worst_sigma)
    );
    Ok(true)
}

pub fn stability_sweep(ctx: &Context) -> Result<bool> {
    let c = &ctx.config;
    let base = ctx.base()?;
    let pert = ctx.increments()?;
    let s = &c.solver.settings;
    let top = c.sweep.scales.iter().copied().fold(0.0, f64::max);
    let largest = base.with_em_increments(
        &pert[0].map(|v| top * v),
        &pert[1].map(|v| top * v),
        &pert[2].map(|v| top * v),
        &pert[3].map(|v| top * v),
    )?;
    let grid = shared_grid(&ctx.grid, ctx.domain.final_time, &[&base, &largest], s)?;
    let init = ctx.initial(&grid);
    let setup = SweepSetup {
        grid: &grid,
        base: &base,
        perturbation: [&pert[0], &pert[1], &pert[2], &pert[3]],
        initial: [(&init[0].0, &init[0].1), (&init[1].0, &init[1].1)],
        stride: c.sweep.stride,
        settings: *s,
    };
    let points = holder_sweep(&setup, &c.sweep.scales)?;
    let fit = fit_holder(&points, c.sweep.safety)?;
    let pass = fit.pass(c.sweep.max_exponent, c.sweep.min_r2);
    let mut csv = Csv::new(&["s", "lambda_tilde", "lambda", "data_1", "data_2", "bound_ratio"]);
    for (p, b) in points.iter().zip(&fit.bound_ratio) {
        println!(
            "s = {} ∫Λ = {} 𝔒 = {} bound ratio {}",
            fmt_f64(p.s),
            fmt_f64(p.lambda),
            fmt_f64(p.data_sum()),
            fmt_f64(*b)
        );
        csv.push_nums(&[p.s, p.lambda_tilde, p.lambda, p.data[0], p.data[1], *b]);
    }
    let dir = ctx.dir("")?;
    csv.write(&dir.join("stability_sweep.csv"))?;
    let mut f = Csv::new(&["exponent", "constant", "r2", "safety", "bound_holds", "pass"]);
    f.push(vec![
        fmt_f64(fit.exponent),
        fmt_f64(fit.constant),
        fmt_f64(fit.r2),
        fmt_f64(fit.safety),
        fit.bound_holds().to_string(),
        pass.to_string(),
    ]);
    f.write(&dir.join("stability_fit.csv"))?;
    println!(
        "fitted exponent {} constant {} R² {} {}",
        fmt_f64(fit.exponent),
        fmt_f64(fit.constant),
        fmt_f64(fit.r2),
        if pass { "ok" } else { "FAIL" }
    );
    Ok(pass)
}
