use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mfg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfg"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

const DECOUPLED: &str = r#"
[problem]
sigma = 0.0
alpha = 2.0
[grid]
nx = 129
nt = 200
[output]
snapshots = 3
"#;

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["", "fields", "reports"] {
        let d = dir.join(sub);
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_file() {
                out.push((
                    format!("{sub}/{}", path.file_name().unwrap().to_string_lossy()),
                    fs::read(&path).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn decoupled_solve_writes_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", DECOUPLED);
    let out_dir = tmp.path().join("run");
    let out = mfg(&["solve", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["outcome"]["verdict"], "converged");
    assert!(meta["energy_drift"].as_f64().unwrap() <= 1e-10);
    for f in [
        "fields/m_000000.csv",
        "fields/u_000200.csv",
        "reports/energy.csv",
        "reports/moments.csv",
    ] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
    let header = fs::read_to_string(out_dir.join("fields/m_000100.csv")).unwrap();
    assert!(header.starts_with("x,value\n"));
}

#[test]
fn repeated_runs_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &DECOUPLED.replace("sigma = 0.0", "sigma = 5.0"),
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(mfg(&["solve", &cfg, "--out", a.to_str().unwrap()])
        .status
        .success());
    assert!(mfg(&["solve", &cfg, "--out", b.to_str().unwrap()])
        .status
        .success());
    assert_eq!(files(&a), files(&b));
}

#[test]
fn negative_alpha_is_a_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &DECOUPLED.replace("alpha = 2.0", "alpha = -1.0"),
    );
    let out = mfg(&[
        "solve",
        &cfg,
        "--out",
        tmp.path().join("run").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("alpha"), "{stderr}");
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn unknown_key_and_missing_file_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &format!("{DECOUPLED}\n[solver]\nrelax = 0.5\n"),
    );
    let out = mfg(&["solve", &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("relax"));
    let missing = tmp.path().join("absent.toml");
    assert!(!mfg(&["solve", missing.to_str().unwrap()]).status.success());
}

#[test]
fn sweep_writes_phase_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.toml",
        r#"
[problem]
sigma = 0.0
alpha = 2.0
[grid]
nx = 65
[sweep]
sigma = [0.0, 40.0]
horizons = [0.5, 4.0]
dt = 0.02
workers = 1
"#,
    );
    let dir = tmp.path().join("sweep");
    let out = mfg(&["sweep", &cfg, "--out", dir.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = fs::read_to_string(dir.join("table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next(),
        Some("sigma,T,verdict,T_star,D_final,iterations")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][2], "converged");
    assert_eq!(rows[3][2], "certified_nonexistent_and_non_convergent");
    assert!(!rows[3][3].is_empty());
    assert!(dir.join("boundary.csv").is_file());
}

#[test]
fn certify_and_kernelcheck_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &DECOUPLED.replace("sigma = 0.0", "sigma = 30.0"),
    );
    let dir = tmp.path().join("cert");
    assert!(mfg(&["certify", &cfg, "--out", dir.to_str().unwrap()])
        .status
        .success());
    let cert: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("certificate.json")).unwrap()).unwrap();
    assert!(cert["nonexistence"]["t_star"].as_f64().unwrap() > 1.0);

    let dir = tmp.path().join("kernel");
    assert!(mfg(&["kernelcheck", "--out", dir.to_str().unwrap()])
        .status
        .success());
    let table = fs::read_to_string(dir.join("kernelcheck.csv")).unwrap();
    assert_eq!(table.lines().count(), 21);
}
