mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::scenario_path;

const SMALL: &str = r#"schema_version = 1
mode = "almost"
r_c = 8.0

[mission]
L = 20.0
T = 20.0

[optimizer]
max_iters = 5

[[targets]]
x = 5.0
A = 1.0
B = 1.8
R0 = 4.0

[[targets]]
x = 14.0
A = 0.8
B = 1.5
R0 = 6.0

[[agents]]
s0 = 2.0
u0 = 1
r = 3.0
theta0 = [16.0, 4.0, 12.0]
w0 = [0.5, 1.0, 0.3]

[[agents]]
s0 = 18.0
u0 = -1
r = 2.5
theta0 = [9.0, 17.0, 6.0]
w0 = [0.4, 0.2, 0.8]
"#;

fn persimon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persimon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn out_dir(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_all_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(tmp.path(), "s.toml", SMALL);
    let out = out_dir(tmp.path(), "sim");
    let o = persimon(&[
        "simulate",
        "--scenario",
        &scenario,
        "--out",
        &out,
        "--audit-events",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "trajectory.csv",
        "events.csv",
        "summary.json",
        "audit/agent_1.csv",
        "audit/agent_2.csv",
    ] {
        assert!(Path::new(&out).join(f).exists(), "missing {f}");
    }
    let trajectory = fs::read_to_string(Path::new(&out).join("trajectory.csv")).unwrap();
    assert_eq!(
        trajectory.lines().next().unwrap(),
        "t,s_1,s_2,u_1,u_2,R_1,R_2,P_1,P_2"
    );
    let events = fs::read_to_string(Path::new(&out).join("events.csv")).unwrap();
    assert_eq!(
        events.lines().next().unwrap(),
        "time,kind,agent,target,payload"
    );
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(Path::new(&out).join("summary.json")).unwrap()).unwrap();
    assert!(summary["J"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["num_agents"], 2);
}

#[test]
fn invalid_target_exits_with_validation_code_and_names_target() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = SMALL.replacen("B = 1.5", "B = 0.5", 1);
    let scenario = write(tmp.path(), "bad.toml", &bad);
    let o = persimon(&[
        "simulate",
        "--scenario",
        &scenario,
        "--out",
        &out_dir(tmp.path(), "o"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("target 2"), "{err}");
    assert!(err.contains("line 18"), "{err}");
}

#[test]
fn unknown_key_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = SMALL.replacen("r_c = 8.0", "r_c = 8.0\nspeed = 2.0", 1);
    let scenario = write(tmp.path(), "bad.toml", &bad);
    let o = persimon(&[
        "simulate",
        "--scenario",
        &scenario,
        "--out",
        &out_dir(tmp.path(), "o"),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_scenario_file_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = persimon(&[
        "simulate",
        "--scenario",
        &out_dir(tmp.path(), "absent.toml"),
        "--out",
        &out_dir(tmp.path(), "o"),
    ]);
    assert!(!o.status.success());
}

#[test]
fn no_agents_cost_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "schema_version = 1\nr_c = 1.0\n[mission]\nL = 10.0\nT = 4.0\n\
                [[targets]]\nx = 2.0\nA = 1.5\nB = 3.0\nR0 = 1.0\n";
    let scenario = write(tmp.path(), "empty.toml", text);
    let out = out_dir(tmp.path(), "o");
    let o = persimon(&["simulate", "--scenario", &scenario, "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(Path::new(&out).join("summary.json")).unwrap()).unwrap();
    // (1/T) ∫ (R0 + A t) dt = R0 + A T / 2
    approx::assert_relative_eq!(
        summary["J"].as_f64().unwrap(),
        1.0 + 1.5 * 2.0,
        max_relative = 1e-12
    );
}

#[test]
fn centralized_and_almost_histories_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(tmp.path(), "s.toml", SMALL);
    let mut histories = Vec::new();
    for mode in ["centralized", "almost"] {
        let out = out_dir(tmp.path(), mode);
        let o = persimon(&[
            "optimize",
            "--scenario",
            &scenario,
            "--out",
            &out,
            "--mode",
            mode,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        histories.push(fs::read(Path::new(&out).join("cost_history.csv")).unwrap());
    }
    assert_eq!(histories[0], histories[1]);
}

#[test]
fn zero_iterations_keep_initial_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(tmp.path(), "s.toml", SMALL);
    let out = out_dir(tmp.path(), "o");
    let o = persimon(&[
        "optimize",
        "--scenario",
        &scenario,
        "--out",
        &out,
        "--iters",
        "0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let spec = persimon::cli::load_scenario(Path::new(&scenario)).unwrap();
    let scenario_spec = spec.scenario;
    let final_params =
        persimon::cli::load_params(&Path::new(&out).join("params_final.json"), &scenario_spec)
            .unwrap();
    assert_eq!(final_params, spec.params);
    let history = fs::read_to_string(Path::new(&out).join("cost_history.csv")).unwrap();
    assert_eq!(history.lines().count(), 2);
}

#[test]
fn optimize_writes_checkpoints_and_reloadable_params() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(
        tmp.path(),
        "s.toml",
        &SMALL.replace("max_iters = 5", "max_iters = 12"),
    );
    let out = out_dir(tmp.path(), "o");
    let o = persimon(&["optimize", "--scenario", &scenario, "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let base = Path::new(&out);
    assert!(base.join("checkpoints/params_0000.json").exists());
    assert!(base.join("checkpoints/params_0010.json").exists());
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(base.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["sensitivity_audit"]["violations"], 0);

    // simulating the final parameters reproduces the last recorded cost
    let again = out_dir(tmp.path(), "again");
    let params = base.join("params_final.json");
    let o = persimon(&[
        "simulate",
        "--scenario",
        &scenario,
        "--out",
        &again,
        "--params",
        params.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sim: serde_json::Value =
        serde_json::from_slice(&fs::read(Path::new(&again).join("summary.json")).unwrap()).unwrap();
    assert_eq!(sim["J"], summary["final_cost"]);
}

#[test]
fn gradcheck_passes_and_corrupted_ipa_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write(tmp.path(), "s.toml", SMALL);
    let good = out_dir(tmp.path(), "good");
    let o = persimon(&["gradcheck", "--scenario", &scenario, "--out", &good]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(Path::new(&good).join("gradcheck.json").exists());

    let bad = out_dir(tmp.path(), "bad");
    let o = persimon(&[
        "gradcheck",
        "--scenario",
        &scenario,
        "--out",
        &bad,
        "--corrupt-ipa",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gradcheck_without_parameters_passes_vacuously() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL
        .replace("theta0 = [16.0, 4.0, 12.0]\n", "")
        .replace("theta0 = [9.0, 17.0, 6.0]\n", "")
        .replace("w0 = [0.5, 1.0, 0.3]\n", "")
        .replace("w0 = [0.4, 0.2, 0.8]\n", "");
    let scenario = write(tmp.path(), "s.toml", &text);
    let o = persimon(&[
        "gradcheck",
        "--scenario",
        &scenario,
        "--out",
        &out_dir(tmp.path(), "o"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bundled_scenarios_load() {
    for name in ["example1.toml", "example2.toml"] {
        let spec = persimon::cli::load_scenario(&scenario_path(name)).unwrap();
        assert_eq!(spec.scenario.num_agents(), 3);
        assert_eq!(spec.scenario.num_targets(), 7);
    }
}
