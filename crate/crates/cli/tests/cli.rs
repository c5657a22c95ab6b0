use std::fs;
use std::process::{Command, Output};

fn cmab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmab")).args(args).output().unwrap()
}

const CONFIG: &str = r#"{
  "n_players": 2,
  "n_arms": 4,
  "horizon": 40,
  "rho": 0.9,
  "true_means": [0.8, 0.6, 0.4, 0.2],
  "priors": {"uniform": 0.5},
  "policy": ["selfish", "cisp"],
  "replications": 2,
  "base_seed": 5
}"#;

#[test]
fn lists_every_preset() {
    let out = cmab(&["list-presets"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = stdout.lines().collect();
    assert_eq!(names, ["fig2", "fig3", "fig4a", "fig4b", "worst_case_poa"]);
}

#[test]
fn run_writes_results_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, CONFIG).unwrap();
    let out_dir = dir.path().join("out");
    let out = cmab(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "100",
        "--replications",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["base_seed"], 100);
    assert_eq!(summary["runs"][0]["seeds"], serde_json::json!([100, 101, 102]));
    let metrics = fs::read_to_string(out_dir.join("selfish_n2/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 3 * 40);
    assert!(out_dir.join("cisp_n2/ledger.csv").exists());
}

#[test]
fn bad_inputs_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, CONFIG.replace("\"rho\": 0.9", "\"rho\": 1.0")).unwrap();
    let out = cmab(&["run", "--config", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("rho"));

    let out = cmab(&["run", "--preset", "fig9"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("worst_case_poa"));

    let out = cmab(&["run", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    assert!(!cmab(&["run"]).status.success());
}
