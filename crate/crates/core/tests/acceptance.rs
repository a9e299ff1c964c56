//! End-to-end acceptance run. Each test prints one `[PASS]`/`[FAIL]` line.

mod common;

use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use common::{admissibility, biot, carleman, em, sweep, twin};
use electroseis::biot::BiotState;
use electroseis::carleman::{default_taus, probe_div_curl, probe_time_trace, probe_wave_carleman, ProbeReport, Resolution};
use electroseis::field::Field3;
use electroseis::galerkin::{oracle_agreement, OracleSetup};
use electroseis::inverse::{
    assemble_system, collect_measurement, estimate_initial_derivatives, recover_xi, reconstruct, FixedPointOptions,
    MIN_LEVELS,
};
use electroseis::io::Snapshot;
use electroseis::params::{ParameterFields, UniformParams};
use electroseis::pipeline::{shared_grid, CoupledRun, SolverSettings};
use electroseis::stability::{default_scales, fit_holder, holder_sweep, DEFAULT_SAFETY};
use electroseis::Error;

/// Criteria run one at a time so that each runtime budget is measured alone.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: usize, name: &str, pass: bool, start: Instant, detail: String) {
    println!(
        "[{}] criterion {id} {name}: {detail} ({:.1} s)",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    assert!(pass, "criterion {id} failed: {detail}");
}

#[test]
fn criterion_1_admissibility() {
    let _guard = serial();
    let t = Instant::now();
    let s = admissibility::admissibility_suite(2024, 100);
    let fast = t.elapsed().as_secs_f64() < 10.0;
    report(
        1,
        "admissibility suite",
        s.pass() && fast,
        t,
        format!(
            "{} sets ({} admissible), {} flag mismatches, det ã rel err {:.1e}, eigenvalue rel err {:.1e}",
            s.sets, s.admissible_sets, s.flag_mismatches, s.worst_det_rel, s.worst_eig_rel
        ),
    );
}

#[test]
fn criterion_2_em_convergence() {
    let _guard = serial();
    let t = Instant::now();
    let (e16, e32) = (em::cavity_error(16), em::cavity_error(32));
    let order = (e16 / e32).log2();
    let drift = em::div_b_drift(32);
    let (plain, scheme) = em::cavity_energy_deviation(32);
    let pass = order >= 1.9 && drift <= 1e-12 && scheme <= 1e-3 && t.elapsed().as_secs_f64() < 120.0;
    report(
        2,
        "EM convergence",
        pass,
        t,
        format!(
            "order {order:.3}, div B drift {drift:.1e}, scheme energy drift {scheme:.1e} (plain |D|²+|B|² {plain:.1e})"
        ),
    );
}

#[test]
fn criterion_3_biot_convergence() {
    let _guard = serial();
    let t = Instant::now();
    let (e16, e32) = (biot::mms_error(16), biot::mms_error(32));
    let order = (e16 / e32).log2();

    let (g, _, solver) = biot::uniform_solver(32, 0.5, &UniformParams::default());
    let mut s = BiotState::zero(&g);
    for _ in 0..g.n_t {
        solver.step(&mut s, None, None).unwrap();
    }
    let zero = s.max_abs();

    let e = biot::energy_history(&UniformParams::default());
    let rise = e.windows(2).map(|w| (w[1] - w[0]) / e[0]).fold(0.0f64, f64::max);
    let pass = order >= 1.9 && zero == 0.0 && rise <= 1e-3 && t.elapsed().as_secs_f64() < 300.0;
    report(
        3,
        "Biot convergence",
        pass,
        t,
        format!("order {order:.3}, zero run max {zero:e}, largest energy rise {rise:.1e}"),
    );
}

#[test]
fn criterion_4_oracle_agreement() {
    let _guard = serial();
    let t = Instant::now();
    let setup = OracleSetup::default();
    let r = oracle_agreement(&setup).unwrap();
    report(
        4,
        "Galerkin oracle",
        r.m == 32 && r.n == 32 && r.rel_l2 <= 2e-2,
        t,
        format!("m = {} vs n = {}, relative L2 {:.3e}", r.m, r.n, r.rel_l2),
    );
}

fn invariant(a: &ProbeReport, b: &ProbeReport) -> f64 {
    a.ratio
        .iter()
        .zip(&b.ratio)
        .map(|(x, y)| if *x == 0.0 { (x - y).abs() } else { ((x - y) / x).abs() })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_5_carleman_probes() {
    let _guard = serial();
    let t = Instant::now();
    let (_, w) = carleman::setup(0.1);
    let taus = default_taus();
    let res = Resolution::default();
    let speed = carleman::speed;
    let wave = probe_wave_carleman(&w, &carleman::wave_field(), speed, &taus, res).unwrap();
    let dc = probe_div_curl(&w, &carleman::vector_field(), &taus, res).unwrap();
    let tt = probe_time_trace(&w, carleman::oscillating, &taus, res).unwrap();

    let mut gap = 0.0f64;
    for k in [1e-3, 37.0, 1e3] {
        let a = probe_wave_carleman(&w, &carleman::wave_field().scaled(k), speed, &taus, res).unwrap();
        let b = probe_div_curl(&w, &carleman::vector_field().scaled(k), &taus, res).unwrap();
        let c = probe_time_trace(
            &w,
            |x, s| {
                let (v, dv) = carleman::oscillating(x, s);
                (v.map(|e| k * e), dv.map(|e| k * e))
            },
            &taus,
            res,
        )
        .unwrap();
        gap = gap.max(invariant(&wave, &a)).max(invariant(&dc, &b)).max(invariant(&tt, &c));
    }
    let range = taus[0] == 1.0 && (taus[taus.len() - 1] - 64.0).abs() < 1e-12;
    let pass = wave.pass && dc.pass && tt.pass && gap <= 1e-12 && range && t.elapsed().as_secs_f64() < 120.0;
    let knee = |r: &ProbeReport| r.knee.map_or(f64::NAN, |k| r.taus[k]);
    report(
        5,
        "Carleman probes",
        pass,
        t,
        format!(
            "θ = 0.1; knees τ = {:.2}, {:.2}, {:.2}; max/knee ratios {:.2}, {:.2}, {:.2}; rescaling gap {gap:.1e}",
            knee(&wave),
            knee(&dc),
            knee(&tt),
            wave.max_ratio / wave.knee.map_or(f64::NAN, |k| wave.ratio[k]),
            dc.max_ratio / dc.knee.map_or(f64::NAN, |k| dc.ratio[k]),
            tt.max_ratio / tt.knee.map_or(f64::NAN, |k| tt.ratio[k]),
        ),
    );
}

#[test]
fn criterion_6_reconstruction() {
    let _guard = serial();
    let t = Instant::now();
    let tw = twin::twin(32, 1.0, twin::canonical_data);
    let der = estimate_initial_derivatives(&tw.measurement).unwrap();
    let sys = assemble_system(&tw.grid, der, &tw.p1, 1e-6).unwrap();
    let r = reconstruct(&sys, &FixedPointOptions::default()).unwrap();
    let e = r.errors(&tw.grid, [&tw.truth[0], &tw.truth[1], &tw.truth[2], &tw.truth[3]]);

    let g = twin::grid(32);
    let p = twin::base(&g);
    let set = SolverSettings::default();
    let g = shared_grid(&g, 1.0, &[&p], &set).unwrap();
    let m = collect_measurement(&g, &p, &p, twin::canonical_data(&g), MIN_LEVELS, &set).unwrap();
    let sys = assemble_system(&g, estimate_initial_derivatives(&m).unwrap(), &p, 1e-6).unwrap();
    let same = reconstruct(&sys, &FixedPointOptions::default()).unwrap();
    let identical_zero = [&same.alpha, &same.beta, &same.gamma, &same.xi].iter().all(|f| f.max_abs() == 0.0);

    let g = twin::grid(8);
    let p = ParameterFields::uniform(g.node_dims(), &UniformParams::default()).unwrap();
    let der = [
        twin::derivs_from(&g, [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, -0.2, 0.0]),
        twin::derivs_from(&g, [0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [0.0, 0.0, -0.2]),
    ];
    let sys = assemble_system(&g, der, &p, 1e-6).unwrap();
    let x = recover_xi(&sys).unwrap();
    let xi_err = sys.nodes.iter().map(|s| (x.xi.data()[s.node] - 1.0).abs()).fold(0.0, f64::max);

    let pass = e.iter().all(|&v| v <= 0.05) && identical_zero && xi_err <= 1e-12 && t.elapsed().as_secs_f64() < 900.0;
    report(
        6,
        "twin reconstruction",
        pass,
        t,
        format!(
            "n = 32 errors α {:.2}%, β {:.2}%, γ {:.2}%, ξ {:.2}%; identical twins zero: {identical_zero}; analytic ξ error {xi_err:.1e}",
            100.0 * e[0],
            100.0 * e[1],
            100.0 * e[2],
            100.0 * e[3]
        ),
    );
}

#[test]
fn criterion_7_holder_sweep() {
    let _guard = serial();
    let t = Instant::now();
    let c = sweep::case(24, 1.0);
    let scales = default_scales();
    let pts = holder_sweep(&c.setup(), &scales).unwrap();
    let fit = fit_holder(&pts, DEFAULT_SAFETY).unwrap();
    let pass = fit.exponent > 0.0 && fit.pass(1.2, 0.95) && t.elapsed().as_secs_f64() < 3600.0;
    report(
        7,
        "Hölder sweep",
        pass,
        t,
        format!(
            "n = 24, s = 2^-6..2^-1: exponent {:.4}, constant {:.3e}, R² {:.6}, max bound ratio {:.3}",
            fit.exponent, fit.constant, fit.r2, fit.bound_ratio.iter().copied().fold(0.0, f64::max)
        ),
    );
}

fn forward_bytes(threads: usize) -> Vec<Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let g = twin::grid(10);
        let p = twin::base(&g);
        let set = SolverSettings::default();
        let g = shared_grid(&g, 0.5, &[&p], &set).unwrap();
        let mut out = Vec::new();
        for (d0, b0) in twin::canonical_data(&g) {
            let mut run = CoupledRun::new(&g, &p, d0, b0, &set).unwrap();
            for _ in 0..g.n_t {
                run.step().unwrap();
                let f = run.frame();
                out.push(Snapshot::vector(g.n, &f.d, f.time).to_bytes().unwrap());
                out.push(Snapshot::vector(g.n, &f.b, f.time).to_bytes().unwrap());
                out.push(Snapshot::nodes(g.n, &f.u, f.time).to_bytes().unwrap());
                out.push(Snapshot::nodes(g.n, &f.w, f.time).to_bytes().unwrap());
            }
        }
        out
    })
}

#[test]
fn criterion_8_io_determinism() {
    let _guard = serial();
    let t = Instant::now();
    let a = forward_bytes(1);
    let b = forward_bytes(4);
    let c = forward_bytes(4);
    let repeat = a == b && b == c;

    let dir = tempfile::tempdir().unwrap();
    let mut round_trip = true;
    let mut corrupt_rejected = true;
    for (i, bytes) in a.iter().enumerate().step_by(7) {
        let path = dir.path().join(format!("s{i}.esnp"));
        let s = Snapshot::from_bytes(bytes, None).unwrap();
        s.write(&path).unwrap();
        round_trip &= std::fs::read(&path).unwrap() == *bytes;
        let back = Snapshot::read(&path, Some(s.n)).unwrap();
        round_trip &= back.comps.iter().zip(&s.comps).all(|(x, y)| {
            x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits())
        });
        let mut bad = bytes.clone();
        let k = 48 + (i * 131) % (bad.len() - 56);
        bad[k] ^= 0x01;
        corrupt_rejected &= matches!(Snapshot::from_bytes(&bad, None), Err(Error::Snapshot(m)) if m.contains("checksum"));
    }
    let nonzero = a.iter().any(|s| Snapshot::from_bytes(s, None).unwrap().comps.iter().any(|f: &Field3| f.max_abs() > 0.0));
    report(
        8,
        "I/O determinism",
        repeat && round_trip && corrupt_rejected && nonzero,
        t,
        format!(
            "{} snapshots identical across 1 and 4 threads: {repeat}; round trip bit-exact: {round_trip}; corruption rejected: {corrupt_rejected}",
            a.len()
        ),
    );
}
