use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rbce::simbench::{Case, StudyConfig};

fn rbce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbce")).args(args).env_remove("RBCE_THREADS").output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a small simulated data set and returns its path.
fn data_file(dir: &Path) -> PathBuf {
    let cfg = StudyConfig::new(Case::C2a, vec![8], 1, 5);
    let (data, _) = cfg.generate(8, 0).unwrap();
    let path = dir.join("data.csv");
    data.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    path
}

const QUICK: [&str; 6] = ["--burn-in", "50", "--samples", "100", "--grid", "3"];

#[test]
fn fit_dss_refit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path());
    let fit = dir.path().join("fit.json");
    let draws = dir.path().join("draws");
    let out = rbce(&[&["fit", "--data", s(&data), "--out", s(&fit), "--draws", s(&draws), "--seed", "7"][..], &QUICK].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&fit).unwrap()).unwrap();
    assert_eq!(json["predictors"].as_array().unwrap().len(), 8);
    assert_eq!(std::fs::read_dir(&draws).unwrap().count(), 3);
    let header = std::fs::read_to_string(draws.join("draws_q00.csv")).unwrap().lines().next().unwrap().to_string();
    assert!(header.starts_with("beta_T,beta_1") && header.ends_with("pi_8,sigma2"), "{header}");

    let dss = dir.path().join("dss.csv");
    let out = rbce(&["dss", "--fit", s(&fit), "--data", s(&data), "--out", s(&dss)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(&dss).unwrap().starts_with("q,side,predictor,coef,selected"));

    let refit = dir.path().join("refit.csv");
    let out = rbce(&[&["refit", "--data", s(&data), "--keep-beta", "x1,3", "--keep-gamma", "2", "--out", s(&refit)][..], &QUICK[..4]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header = std::fs::read_to_string(&refit).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "beta_T,beta_1,beta_3,gamma_2,gamma_0,sigma2");
}

#[test]
fn same_command_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path());
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = rbce(&[&["--threads", "2", "fit", "--data", s(&data), "--out", s(&path), "--seed", "3"][..], &QUICK].concat());
        assert!(out.status.success());
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"burn_in": 20, "samples": 40, "grid": 2, "seed": 1}"#).unwrap();
    let fit = dir.path().join("fit.json");
    let out = rbce(&["--config", s(&cfg), "fit", "--data", s(&data), "--out", s(&fit), "--grid", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&fit).unwrap()).unwrap();
    assert_eq!(json["grid"].as_array().unwrap().len(), 4);
    assert_eq!(json["per_q"][0]["draws"], 40);
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.lines().last().unwrap()).unwrap()
}

#[test]
fn missing_data_is_bad_data_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let fit = dir.path().join("fit.json");
    let out = rbce(&["fit", "--data", s(&dir.path().join("nope.csv")), "--out", s(&fit)]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_line(&out)["error"], "BadData");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn bad_configuration_has_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path());
    let fit = dir.path().join("fit.json");
    let out = rbce(&["fit", "--data", s(&data), "--out", s(&fit), "--c-low", "0.5", "--c-high", "0.1"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_line(&out)["error"], "BadConfig");
    assert!(!fit.exists());

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"sampels": 10}"#).unwrap();
    let out = rbce(&["--config", s(&cfg), "fit", "--data", s(&data), "--out", s(&fit)]);
    assert_eq!(out.status.code(), Some(2));

    let out = rbce(&["simulate", "--case", "3c", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn constant_predictor_is_bad_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "y,t,a,b\n1,1,0.5,2\n0.2,0,0.5,1\n-1,1,0.5,3\n").unwrap();
    let out = rbce(&["fit", "--data", s(&data), "--out", s(&dir.path().join("f.json"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let study = dir.path().join("study");
    let out = rbce(&[
        "simulate", "--case", "2a", "--grid", "20,25", "--replicates", "2", "--seed", "1", "--burn-in", "30", "--samples", "60", "--out-dir",
        s(&study),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sel = std::fs::read_to_string(study.join("selection.csv")).unwrap();
    assert_eq!(sel.lines().next().unwrap(), "p,fp,fn,id,loss");
    assert_eq!(sel.lines().count(), 3);
    assert_eq!(std::fs::read_to_string(study.join("estimation.csv")).unwrap().lines().next().unwrap(), "p,mean_lo,mean_hi,median_lo,median_hi");
    assert_eq!(
        std::fs::read_to_string(study.join("dispersion.csv")).unwrap().lines().next().unwrap(),
        "p,sd_lo,sd_hi,mse_lo,mse_hi,ci_pct"
    );

    let long = dir.path().join("long.csv");
    let out = rbce(&["report", "--study-dir", s(&study), "--out", s(&long)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&long).unwrap();
    assert_eq!(text.lines().next().unwrap(), "table,grid_label,grid_value,quantity,value");
    // Two grid values times (4 + 5 + 4) table columns.
    assert_eq!(text.lines().count(), 1 + 2 * 13);
}
