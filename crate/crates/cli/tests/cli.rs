use std::path::Path;
use std::process::{Command, Output};

fn scatterlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scatterlab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn exponent_table_has_the_documented_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = scatterlab(dir.path(), &["exponents", "--dim", "1", "--p", "3", "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["d", "p", "p0", "r", "q", "qbar", "s_c", "eps0", "rho0", "a", "b", "alpha", "beta"] {
        assert!(v.get(key).is_some(), "missing {key} in {v}");
    }
}

#[test]
fn missing_input_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = scatterlab(dir.path(), &["evolve", "--in", "nope.json", "--t", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}

#[test]
fn runs_are_reproducible_from_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["stnorm", "--profile", "gaussian", "--n", "256", "--half-width", "20", "--T", "1", "--q", "4", "--r", "6"];
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = dir.path().join("c.json");
    for path in [&a, &b] {
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", path.to_str().unwrap()]);
        let out = scatterlab(dir.path(), &full);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());

    let out = scatterlab(dir.path(), &["stnorm", "--config", a.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(first, std::fs::read(&c).unwrap());

    let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn config_for_another_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    std::fs::write(&path, "experiment = \"exponents\"\n").unwrap();
    let out = scatterlab(dir.path(), &["stnorm", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reproduce_single_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = scatterlab(dir.path(), &["reproduce", "--only", "exponents"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
    assert!(dir.path().join("reproduce.json").exists());
}

#[test]
fn corrupted_calibration_table_fails_acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("bad.toml");
    std::fs::write(&table, "[[entry]]\ndim = 1\n").unwrap();
    let out = scatterlab(
        dir.path(),
        &["reproduce", "--only", "eta-calibration", "--calibration", table.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(4));
}
