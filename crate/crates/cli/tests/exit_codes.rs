//! Golden configurations run through the binary: exit codes and artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/configs")
        .join(name)
}

fn cns1d(sub: &str, cfg: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cns1d"))
        .args([sub, "--config"])
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a variant of a golden config with one substitution applied.
fn variant(dir: &Path, name: &str, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(config(name)).unwrap();
    assert!(text.contains(from), "{from} not in {name}");
    let p = dir.join(format!("variant_{name}"));
    fs::write(&p, text.replacen(from, to, 1)).unwrap();
    p
}

#[test]
fn flagship_run_passes_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cns1d("run", &config("flagship.cfg"), tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["timeseries.csv", "final_state.csv", "euler_final.csv", "audit.txt", "run_meta.txt"] {
        assert!(tmp.path().join(f).is_file(), "{f} missing");
    }
    let audit = fs::read_to_string(tmp.path().join("audit.txt")).unwrap();
    for check in ["jacobian_floor", "entropy_floor", "momentum", "energy"] {
        let line = audit.lines().find(|l| l.starts_with(check)).unwrap();
        assert!(line.contains("PASS"), "{line}");
    }
    let ts = fs::read_to_string(tmp.path().join("timeseries.csv")).unwrap();
    assert_eq!(
        ts.lines().next().unwrap(),
        "t,E,m,minJ,c0_ref,s_min,s_max,G_w_l2,Gy_w_l2_cum,G_l2,G_sup,vy_l2,picard_iters,picard_res,dt_used"
    );
    // samples at step 0, every 100 steps, and the last step
    assert_eq!(ts.lines().count(), 1 + 51);
    let meta = fs::read_to_string(tmp.path().join("run_meta.txt")).unwrap();
    assert!(meta.contains("c0 = 2.9"), "{meta}");
    assert!(meta.contains("GLOBAL_delta_gamma = true"));
    let fs_csv = fs::read_to_string(tmp.path().join("final_state.csv")).unwrap();
    assert_eq!(fs_csv.lines().count(), 2 + 2001);
}

#[test]
fn stationary_mms_is_at_floor() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cns1d("mms", &config("mms_stationary.cfg"), tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rep = fs::read_to_string(tmp.path().join("orders.txt")).unwrap();
    assert_eq!(rep.matches("at_floor = true").count(), 2, "{rep}");
    let csv = fs::read_to_string(tmp.path().join("orders.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn steep_decay_fails_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cns1d("validate", &config("validate_ell3.cfg"), tmp.path());
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let rep = fs::read_to_string(tmp.path().join("hypotheses.txt")).unwrap();
    let h3 = rep.lines().find(|l| l.starts_with("H3")).unwrap();
    assert!(h3.contains("FAIL") && h3.contains("K0 = inf"), "{h3}");
    let ok = variant(tmp.path(), "validate_ell3.cfg", "ell_rho = 3", "ell_rho = 1.5");
    assert_eq!(code(&cns1d("validate", &ok, tmp.path())), 0);
}

#[test]
fn config_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let p = variant(tmp.path(), "small.cfg", "gamma = 1.4", "gamma = 0.9");
    let o = cns1d("run", &p, tmp.path());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("γ must exceed 1"), "{}", stderr(&o));

    let p = variant(tmp.path(), "small.cfg", "mu = 1", "viscocity = 1");
    let o = cns1d("run", &p, tmp.path());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("gas.viscocity: unknown key"), "{}", stderr(&o));

    let o = cns1d("validate", &config("small.cfg"), tmp.path());
    assert_eq!(code(&o), 3, "subcommand must match scenario.kind");
    let o = cns1d("run", &tmp.path().join("absent.cfg"), tmp.path());
    assert_eq!(code(&o), 3);

    let p = variant(tmp.path(), "small.cfg", "[stepper]", "[raw]\nv0 = missing.txt\n[stepper]");
    assert_eq!(code(&cns1d("run", &p, tmp.path())), 3);
}

#[test]
fn audit_failure_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let p = variant(
        tmp.path(),
        "small.cfg",
        "[run]",
        "[audit]\nenergy_rel_tol = 1e-15\n[run]",
    );
    let out = tmp.path().join("out");
    let o = cns1d("run", &p, &out);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let audit = fs::read_to_string(out.join("audit.txt")).unwrap();
    assert!(audit.lines().any(|l| l.starts_with("energy") && l.contains("FAIL")));
}

#[test]
fn dt_underflow_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let p = variant(
        tmp.path(),
        "small.cfg",
        "dt = 5e-3",
        "dt = 5e-3\npicard_max = 1\ndt_min = 5e-3",
    );
    let out = tmp.path().join("out");
    let o = cns1d("run", &p, &out);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let audit = fs::read_to_string(out.join("audit.txt")).unwrap();
    assert!(audit.contains("aborted"));
    assert!(out.join("timeseries.csv").is_file());
}

#[test]
fn identical_configs_give_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&cns1d("run", &config("small.cfg"), &a)), 0);
    assert_eq!(code(&cns1d("run", &config("small.cfg"), &b)), 0);
    for f in ["timeseries.csv", "final_state.csv", "euler_final.csv", "audit.txt", "run_meta.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let ts = fs::read_to_string(a.join("timeseries.csv")).unwrap();
    let row = ts.lines().nth(1).unwrap();
    // 17 significant digits
    assert!(row.split(',').next().unwrap().starts_with("0.0000000000000000e0"), "{row}");
}

#[test]
fn raw_velocity_overrides_family() {
    let tmp = tempfile::tempdir().unwrap();
    let field: String = (0..=200).map(|_| "0\n").collect();
    fs::write(tmp.path().join("v0.txt"), field).unwrap();
    let p = variant(tmp.path(), "small.cfg", "[stepper]", "[raw]\nv0 = v0.txt\n[stepper]");
    let (raw, bump) = (tmp.path().join("raw"), tmp.path().join("bump"));
    assert_eq!(code(&cns1d("run", &p, &raw)), 0);
    assert_eq!(code(&cns1d("run", &config("small.cfg"), &bump)), 0);
    let meta = fs::read_to_string(raw.join("run_meta.txt")).unwrap();
    assert!(meta.contains("raw.v0 = "), "{meta}");
    let a = fs::read_to_string(raw.join("final_state.csv")).unwrap();
    let b = fs::read_to_string(bump.join("final_state.csv")).unwrap();
    assert_ne!(a, b);

    fs::write(tmp.path().join("v0.txt"), "0\n0\n").unwrap();
    let o = cns1d("run", &p, &raw);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("initial data"), "{}", stderr(&o));
}

#[test]
fn epsilon_sweep_writes_points_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cns1d"))
        .args(["sweep", "--config"])
        .arg(config("sweep_epsilon.cfg"))
        .arg("--out")
        .arg(tmp.path())
        .env("CNS_WORKERS", "2")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].ends_with("dv_prev"));
    let dv: Vec<f64> = rows[2..]
        .iter()
        .map(|r| r.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(dv[0] > dv[1] && dv[1] > 0.0, "{dv:?}");
    assert!(rows[1].ends_with(','));
    let points = fs::read_dir(tmp.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().is_dir())
        .count();
    assert_eq!(points, 3);
    assert!(tmp.path().join("point_00_epsilon_0.001/timeseries.csv").is_file());
}
