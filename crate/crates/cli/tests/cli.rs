use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dsii_core::field_io;

fn dsii(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsii"))
        .args(args)
        .env_remove("DSII_THREADS")
        .output()
        .expect("binary runs")
}

fn sample_data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/genus2_sample.theta")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn evolve_writes_a_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = dsii(&[
        "evolve",
        "--initial",
        "gaussian",
        "--nx",
        "32",
        "--lx",
        "1.65",
        "--tmax",
        "0.1",
        "--nt",
        "50",
        "--rho",
        "defocusing",
        "--method",
        "regularized",
        "--taylor-order",
        "10",
        "--snapshots",
        "0.05,0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["status"]["kind"], "completed");
    assert_eq!(meta["steps_taken"], 50);
    assert_eq!(meta["config"]["nx"], 32);
    assert_eq!(meta["transforms"]["per_step"], 16);
    assert_eq!(meta["snapshots"].as_array().unwrap().len(), 2);
    let norms = std::fs::read_to_string(out.join("norms.csv")).unwrap();
    assert!(norms.starts_with("t,l2_norm\n"));
    assert_eq!(norms.lines().count(), 52);
    let (field, t) = field_io::load(out.join("final.bin")).unwrap();
    assert_eq!(field.grid().nx(), 32);
    assert!((t - 0.1).abs() < 1e-15);
    assert!(out.join("snapshot_0001.bin").exists());
}

#[test]
fn transform_counts_match_between_methods() {
    let dir = tempfile::tempdir().unwrap();
    let mut counts = Vec::new();
    for method in ["classical", "regularized"] {
        let out = dir.path().join(method);
        let o = dsii(&[
            "evolve",
            "--nx",
            "32",
            "--lx",
            "1.65",
            "--tmax",
            "0.02",
            "--nt",
            "4",
            "--method",
            method,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
        counts.push(meta["transforms"].clone());
    }
    assert_eq!(counts[0], counts[1]);
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = dsii(&[
            "evolve",
            "--initial",
            "asymmetric",
            "--nx",
            "32",
            "--lx",
            "1.41",
            "--tmax",
            "0.05",
            "--nt",
            "20",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        std::fs::read(out.join("final.bin")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"nx": 64, "lx": 2.0, "tmax": 0.02, "nt": 4, "method": "classical", "rho": "focusing"}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = dsii(&[
        "evolve",
        "--config",
        cfg.to_str().unwrap(),
        "--nx",
        "32",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["nx"], 32);
    assert_eq!(meta["config"]["lx"], 2.0);
    assert_eq!(meta["config"]["method"], "classical");
    assert_eq!(meta["config"]["rho"], -1.0);
}

#[test]
fn invalid_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = dsii(&["evolve", "--nx", "30", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let o = dsii(&[
        "evolve",
        "--taylor-order",
        "13",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = dsii(&["evolve", "--rho", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dsii(&[
        "evolve",
        "--initial",
        "/no/such/file.bin",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn blow_up_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    // strongly focusing data with a huge step: the explicit nonlinear stages diverge
    let field = dir.path().join("big.bin");
    let grid = dsii_core::Grid::square(16, 0.5).unwrap();
    let psi = dsii_core::Field::from_real_fn(grid, |x, y| 4.0 * (-(x * x + y * y)).exp());
    field_io::save(&field, &psi, 0.0).unwrap();
    std::fs::write(
        &cfg,
        format!(
            r#"{{"initial": "{}", "nx": 16, "lx": 0.5, "tmax": 50.0, "nt": 50, "method": "classical", "rho": -1}}"#,
            field.display()
        ),
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = dsii(&[
        "evolve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_ne!(meta["status"]["kind"], "completed");
    assert!(out.join("final.bin").exists());
}

#[test]
fn sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = dsii(&[
        "sweep",
        "--initial",
        "gaussian",
        "--tmax",
        "0.05",
        "--nt",
        "20",
        "--levels",
        "3:4",
        "--l-list",
        "1.0,1.3",
        "--method",
        "both",
        "--jobs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for m in ["regularized", "classical"] {
        let text = std::fs::read_to_string(out.join(format!("sweep_{m}.csv"))).unwrap();
        assert!(text.starts_with("n,l,error,norm_drift,seconds\n"));
        assert_eq!(text.lines().count(), 3);
    }
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["reference"][0], 32);
    assert_eq!(meta["tables"].as_array().unwrap().len(), 2);
}

#[test]
fn theta_commands() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_data();
    let out = dir.path().join("theta");
    let o = dsii(&[
        "theta-eval",
        "--data",
        data.to_str().unwrap(),
        "--nx",
        "32",
        "--lx",
        "0.5",
        "--t",
        "0.3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (field, _) = field_io::load(out.join("theta.bin")).unwrap();
    assert_eq!(field.grid().len(), 32 * 32);

    let o = dsii(&[
        "theta-check",
        "--data",
        data.to_str().unwrap(),
        "--n",
        "1,1",
        "--m",
        "1,-1",
        "--lx",
        "3.141592653589793",
        "--ly",
        "-3.141592653589793",
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
    let rep: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rep["pass"], true);

    let o = dsii(&[
        "theta-check",
        "--data",
        data.to_str().unwrap(),
        "--n",
        "1,2",
        "--m",
        "3,1",
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn oracle_and_selftest_pass() {
    let o = dsii(&["oracle-1d", "--nx", "128", "--tmax", "0.2", "--nt", "200"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let o = dsii(&["selftest"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("[PASS]").count(), 9);
}
