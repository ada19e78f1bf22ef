use std::path::Path;
use std::process::{Command, Output};

fn vortmix(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vortmix"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn misaligned_step_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"integrator": {"dt": 0.003}}"#);
    let out = vortmix(&["simulate"], &cfg, &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integrator.dt"));
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"integrator": {"dt": 0.01, "stepsize": 2}}"#);
    let out = vortmix(&["couple"], &cfg, &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stepsize"));
}

#[test]
fn blow_up_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"grid": {"kmax": 6}, "integrator": {"dt": 0.5, "t_end": 20},
            "initial": {"kind": "gaussian", "norm": 1e4}}"#,
    );
    let out = vortmix(&["simulate"], &cfg, &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blow-up"));
}

#[test]
fn zero_horizon_writes_manifest_and_one_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"grid": {"kmax": 4}, "integrator": {"dt": 0.01, "t_end": 0}}"#);
    let dir = tmp.path().join("o");
    let out = vortmix(&["simulate"], &cfg, &dir);
    assert!(out.status.success());
    let manifest = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
    assert!(manifest.starts_with("subcommand=simulate\n"));
    assert!(manifest.contains("config_sha256="));
    let snapshots: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "vort"))
        .collect();
    assert_eq!(snapshots.len(), 1);
    let rows = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2);
}

#[test]
fn zero_classes_partition_is_all_small() {
    let tmp = tempfile::tempdir().unwrap();
    let kv = write(tmp.path(), "k.txt", "0 0 0 0 0 0 0 0\n");
    let dir = tmp.path().join("o");
    let out = Command::new(env!("CARGO_BIN_EXE_vortmix"))
        .args(["partition", "--kvector"])
        .arg(&kv)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.join("partition.txt")).unwrap();
    assert_eq!(text, "0 2 small\n2 4 small\n4 6 small\n6 8 small\n");
}

#[test]
fn seed_override_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"grid": {"kmax": 4}, "integrator": {"dt": 0.01, "t_end": 1}, "master_seed": 1}"#,
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(vortmix(&["simulate"], &cfg, &a).status.success());
    assert!(vortmix(&["simulate", "--seed", "2"], &cfg, &b).status.success());
    let read = |d: &Path| std::fs::read(d.join("trajectory.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
}
