use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use biokg::model::GroundTruthConfig;
use serde_json::{json, Value};

fn biokg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biokg"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = biokg(args, cwd);
    assert!(
        out.status.success(),
        "biokg {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    path
}

/// Directory contents; manifests drop their `io` paths, which name the
/// output directory itself.
fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let mut bytes = std::fs::read(&p).unwrap();
            if name.starts_with("manifest-") {
                let mut v: Value = serde_json::from_slice(&bytes).unwrap();
                v["config"].as_object_mut().unwrap().remove("io");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            (name, bytes)
        })
        .collect();
    out.sort();
    out
}

fn quick_abc() -> Value {
    json!({"n_particles": 40, "replications": 4, "max_generations": 3})
}

#[test]
fn simulate_writes_batches_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["--seed", "3", "--out", "a", "simulate", "--m", "3"], tmp.path());
    let names: Vec<String> = files(&tmp.path().join("a")).into_iter().map(|f| f.0).collect();
    assert_eq!(names, ["batch_000.csv", "batch_001.csv", "batch_002.csv", "manifest-simulate.json"]);
    let manifest: Value = serde_json::from_slice(&std::fs::read(tmp.path().join("a/manifest-simulate.json")).unwrap()).unwrap();
    assert_eq!(manifest["provenance"]["seed"], 3);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["--seed", "5", "--out", "a", "simulate"], tmp.path());
    ok(&["--seed", "5", "--out", "b", "--jobs", "1", "simulate"], tmp.path());
    assert_eq!(files(&tmp.path().join("a")), files(&tmp.path().join("b")));
    ok(&["--seed", "6", "--out", "c", "simulate"], tmp.path());
    assert_ne!(files(&tmp.path().join("a")), files(&tmp.path().join("c")));
}

#[test]
fn config_hash_tracks_every_parameter() {
    let tmp = tempfile::tempdir().unwrap();
    let hash = |config: &Value, tag: &str| {
        let path = write_config(tmp.path(), &format!("{tag}.json"), config);
        ok(&["--config", path.to_str().unwrap(), "--out", tag, "simulate", "--m", "1"], tmp.path());
        let m: Value = serde_json::from_slice(&std::fs::read(tmp.path().join(tag).join("manifest-simulate.json")).unwrap()).unwrap();
        m["provenance"]["config_hash"].as_str().unwrap().to_string()
    };
    let base = hash(&json!({}), "base");
    assert_eq!(base, hash(&json!({"seed": 0}), "same"));
    let changes = [
        json!({"seed": 1}),
        json!({"abc": {"kernel_scale": 2.5}}),
        json!({"planner": {"b": 3}}),
        json!({"simulate": {"hours": 27.0}}),
        json!({"experiment": {"n_test": 11}}),
        json!({"problem": {"kind": "medium_exchange", "horizon_steps": 10, "dt": 3.0,
            "costs": {"c_time": 150.0, "c_medium": 10.0}, "unit_scale": 1000.0,
            "interventions_enabled": true, "culture_liters": 100.0, "initial_medium_liters": 100.0,
            "exchange_medium_liters": 100.0, "max_exchanges": 1, "expansion_factor": 4.0,
            "cell_price": 2e-6, "initial_volume_liters": 1.0, "first_decision_step": 1}}),
    ];
    for (i, c) in changes.iter().enumerate() {
        assert_ne!(base, hash(c, &format!("c{i}")), "change {c}");
    }
}

#[test]
fn unknown_config_keys_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "bad.json", &json!({"abc": {"n_particle": 10}}));
    let out = biokg(&["--config", path.to_str().unwrap(), "simulate"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_particle"));
}

#[test]
fn flags_override_file() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "c.json", &json!({"seed": 9, "simulate": {"m": 2}, "io": {"out_dir": "fromfile"}}));
    ok(&["--config", path.to_str().unwrap(), "simulate"], tmp.path());
    assert_eq!(files(&tmp.path().join("fromfile")).len(), 3);
    ok(&["--config", path.to_str().unwrap(), "--seed", "4", "--out", "fromflag", "simulate", "--m", "1"], tmp.path());
    let m: Value = serde_json::from_slice(&std::fs::read(tmp.path().join("fromflag/manifest-simulate.json")).unwrap()).unwrap();
    assert_eq!(m["provenance"]["seed"], 4);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 1);
}

#[test]
fn ls_fit_recovers_noiseless_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let truth = GroundTruthConfig::default().noiseless();
    let config = json!({
        "ground_truth": serde_json::to_value(truth).unwrap(),
        "simulate": {"m": 2},
        "experiment": {"ls": {"restarts": 20, "max_evals": 1000, "dt_fine": 0.01}},
    });
    let path = write_config(tmp.path(), "c.json", &config);
    let cfg = path.to_str().unwrap();
    ok(&["--config", cfg, "--out", "data", "simulate"], tmp.path());
    ok(&["--config", cfg, "--out", "fit", "fit", "--method", "ls", "--data", "data"], tmp.path());
    let model: Value = serde_json::from_slice(&std::fs::read(tmp.path().join("fit/model.json")).unwrap()).unwrap();
    assert_eq!(model["method"], "ls");
    let mu = model["theta"]["phases"][0]["mu_g"].as_f64().unwrap();
    assert!((mu - truth.theta.phases[0].mu_g).abs() < 1e-3, "mu_g {mu}");
    assert_eq!(model["theta"]["phases"][0]["sigma_g"], 0.0);
    assert_eq!(model["theta"]["phases"][1]["v_rho"], 0.0);
}

#[test]
fn abc_fit_is_reproducible_with_monotone_tolerances() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "c.json", &json!({"seed": 2, "abc": quick_abc()}));
    let cfg = path.to_str().unwrap();
    ok(&["--config", cfg, "--out", "data", "simulate"], tmp.path());
    ok(&["--config", cfg, "--out", "f1", "fit", "--method", "abc", "--data", "data"], tmp.path());
    ok(&["--config", cfg, "--out", "f2", "fit", "--method", "abc", "--data", "data"], tmp.path());
    assert_eq!(files(&tmp.path().join("f1")), files(&tmp.path().join("f2")));
    let model: Value = serde_json::from_slice(&std::fs::read(tmp.path().join("f1/model.json")).unwrap()).unwrap();
    let tol: Vec<f64> = model["ensemble"]["tolerance_history"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(!tol.is_empty());
    assert!(tol.windows(2).all(|w| w[1] <= w[0]), "{tol:?}");
}

#[test]
fn fit_without_data_fails() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    let out = biokg(&["fit", "--method", "ls", "--data", "empty"], tmp.path());
    assert!(!out.status.success());
}

#[test]
fn plan_with_fitted_hybrid_and_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let config = json!({"seed": 8, "abc": quick_abc(), "planner": {"b": 1, "j": 1, "open_loop_reps": 20}});
    let path = write_config(tmp.path(), "c.json", &config);
    let cfg = path.to_str().unwrap();
    ok(&["--config", cfg, "--out", "data", "simulate"], tmp.path());
    ok(&["--config", cfg, "--out", "fit", "fit", "--method", "abc", "--data", "data"], tmp.path());
    for dir in ["p1", "p2"] {
        ok(&["--config", cfg, "--out", dir, "plan", "--model", "fit/model.json"], tmp.path());
    }
    assert_eq!(files(&tmp.path().join("p1")), files(&tmp.path().join("p2")));
    let ranking = std::fs::read_to_string(tmp.path().join("p1/ranking.csv")).unwrap();
    assert_eq!(ranking.lines().count(), 12);
    let trace = std::fs::read_to_string(tmp.path().join("p1/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 11);
    let exchanges = trace.lines().filter(|l| l.contains(",exchange,")).count();
    assert!(exchanges <= 1);
    ok(&["verify", "p1"], tmp.path());
}

#[test]
fn plan_with_disabled_actions_is_a_no_op_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let mut problem = serde_json::to_value(biokg::planner::DecisionProblem::expansion()).unwrap();
    problem["interventions_enabled"] = json!(false);
    let path = write_config(tmp.path(), "c.json", &json!({"problem": problem, "planner": {"open_loop_reps": 10}}));
    ok(&["--config", path.to_str().unwrap(), "--out", "p", "plan", "--model", "truth"], tmp.path());
    let trace = std::fs::read_to_string(tmp.path().join("p/trace.csv")).unwrap();
    assert!(trace.lines().skip(1).all(|l| l.split(',').nth(4) == Some("none")));
    let ranking = std::fs::read_to_string(tmp.path().join("p/ranking.csv")).unwrap();
    assert_eq!(ranking.lines().count(), 2);
}

#[test]
fn plan_rejects_mismatched_model() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bogus.json"), br#"{"method": "abc", "t_star": 18.0, "posterior_mean": null}"#).unwrap();
    let out = biokg(&["plan", "--model", "bogus.json"], tmp.path());
    assert!(!out.status.success());
}

#[test]
fn verify_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&["--out", "a", "--verify", "simulate", "--m", "2"], tmp.path());
    assert!(String::from_utf8_lossy(&out.stdout).contains("verified 2 files"));
    let file = tmp.path().join("a/batch_001.csv");
    let text = std::fs::read_to_string(&file).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[2] = format!("9{}", &lines[2][1..]);
    std::fs::write(&file, lines.join("\n") + "\n").unwrap();
    assert!(!biokg(&["verify", "a"], tmp.path()).status.success());
}

#[test]
fn tiny_experiment_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let config = json!({
        "seed": 1,
        "abc": quick_abc(),
        "planner": {"b": 1, "j": 1},
        "experiment": {
            "sizes": [2], "b2b": ["low"], "noise": ["low"], "problems": ["medium_exchange"],
            "replications": 2, "n_test": 3, "n_mc": 3, "decision_batches": 1, "curve_reps": 3,
            "bootstrap_resamples": 20, "ls": {"restarts": 1, "max_evals": 100, "dt_fine": 0.1}
        }
    });
    let path = write_config(tmp.path(), "c.json", &config);
    for dir in ["e1", "e2"] {
        ok(&["--config", path.to_str().unwrap(), "--out", dir, "experiment"], tmp.path());
    }
    let a = files(&tmp.path().join("e1"));
    assert_eq!(a, files(&tmp.path().join("e2")));
    let names: Vec<&str> = a.iter().map(|f| f.0.as_str()).collect();
    for want in ["prediction.csv", "prediction.json", "decision_exchange.csv", "curves_exchange.csv", "manifest-experiment.json"] {
        assert!(names.contains(&want), "{names:?}");
    }
    ok(&["verify", "e1"], tmp.path());
}
