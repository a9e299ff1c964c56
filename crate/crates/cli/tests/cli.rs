use std::path::{Path, PathBuf};
use std::process::Command;

const BASE: &str = "\
domain.final_time = 0.5
grid.n1 = 8
grid.n2 = 8
grid.n3 = 8
base.sigma = 0.2
base.electrokinetic = 0.5
solver.snapshot_stride = 4
";

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_electroseis"))
        .args([cmd, config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("ELECTROSEIS_THREADS", "2")
        .output()
        .unwrap();
    (
        o.status.code().unwrap(),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn check_params_passes_on_the_uniform_medium() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "a.cfg", BASE);
    let (code, stdout, _) = run("check-params", &cfg, &t.path().join("out"));
    assert_eq!(code, 0, "{stdout}");
    assert!(!stdout.contains("FAIL"));
    let csv = std::fs::read_to_string(t.path().join("out/check_params.csv")).unwrap();
    assert!(csv.lines().count() > 8);
}

#[test]
fn inadmissible_parameters_stop_before_any_step() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "bad.cfg", &format!("{BASE}base.rho = 1.0\nbase.rho_f = 2.0\n"));
    let out = t.path().join("out");
    let (code, _, stderr) = run("forward", &cfg, &out);
    assert_eq!(code, 1);
    assert!(stderr.contains("inadmissible"), "{stderr}");
    assert!(!out.join("forward").exists());

    let (code, stdout, _) = run("check-params", &cfg, &out);
    assert_eq!(code, 1);
    assert!(stdout.contains("FAIL"));
}

#[test]
fn malformed_config_exits_with_one() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "bad.cfg", &BASE.replace("grid.n2 = 8", "grid.n2 = 0"));
    let (code, _, stderr) = run("forward", &cfg, &t.path().join("out"));
    assert_eq!(code, 1);
    assert!(stderr.contains("grid.n2"), "{stderr}");
}

#[test]
fn forward_snapshots_are_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "a.cfg", BASE);
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    assert_eq!(run("forward", &cfg, &a).0, 0);
    assert_eq!(run("forward", &cfg, &b).0, 0);
    for exp in ["exp1", "exp2"] {
        let fa = files(&a.join("forward").join(exp));
        let fb = files(&b.join("forward").join(exp));
        assert!(fa.len() >= 8);
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(x.file_name(), y.file_name());
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
        }
    }
}

#[test]
fn identical_twins_reconstruct_zero() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "a.cfg", &format!("{BASE}perturb.alpha = 0\n"));
    let out = t.path().join("out");
    let (code, stdout, stderr) = run("reconstruct", &cfg, &out);
    assert_eq!(code, 0, "{stdout}{stderr}");
    let csv = std::fs::read_to_string(out.join("reconstruct/errors.csv")).unwrap();
    let mut rows = csv.lines().skip(1).peekable();
    assert!(rows.peek().is_some());
    for row in rows {
        for v in row.split(',').skip(1) {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{row}");
        }
    }
}

#[test]
fn degenerate_measurements_exit_with_two() {
    let t = tempfile::tempdir().unwrap();
    let body = format!(
        "{BASE}perturb.alpha = compact 0.05 0.5,0.5,0.5 0.2\n\
         experiment1.d0 = vortex 0.3 0.5,0.5,0.5 0.4 2\n\
         experiment2.b0 = vortex 0.3 0.5,0.5,0.5 0.4 0\n"
    );
    let cfg = write_config(t.path(), "a.cfg", &body);
    let (code, _, stderr) = run("reconstruct", &cfg, &t.path().join("out"));
    assert_eq!(code, 2, "{stderr}");
}
