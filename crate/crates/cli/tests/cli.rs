use std::process::{Command, Output};

use qbrst_core::qla;
use qbrst_core::Scalar;

fn qbrst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbrst"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(o: &Output) -> i32 {
    o.status.code().expect("no signal")
}

#[test]
fn height_of_the_n2_braiding_is_four() {
    let out = qbrst(&["height", "--model", "glq", "--N", "2"]);
    assert_eq!(exit_code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("height: 4"), "{text}");
    let json_part = &text[text.find('{').unwrap()..];
    let v: serde_json::Value = serde_json::from_str(json_part).unwrap();
    assert_eq!(v["artifacts"]["height"], 4);
}

#[test]
fn axiom_suite_passes_for_all_library_models() {
    for model in ["sl2", "gl11", "glq"] {
        let out = qbrst(&["check-axioms", "--model", model, "--N", "2"]);
        assert_eq!(exit_code(&out), 0, "model {model}");
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(v["checks"].as_array().unwrap().len() >= 6);
    }
}

#[test]
fn corrupted_structure_constants_fail_with_exit_one() {
    let mut bad = qla::sl2();
    bad.c.set(vec![0, 0, 0], Scalar::q());
    let dir = std::env::temp_dir().join("qbrst-cli-test-corrupt");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, serde_json::to_string(&bad).unwrap()).unwrap();
    let out = qbrst(&["check-axioms", "--in", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("FAIL"), "{err}");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(exit_code(&qbrst(&["no-such-command"])), 2);
    assert_eq!(exit_code(&qbrst(&["check-axioms", "--model", "so5"])), 2);
    assert_eq!(exit_code(&qbrst(&["verify-glq", "--N", "9"])), 2);
    assert_eq!(exit_code(&qbrst(&["verify-glq", "--model", "sl2"])), 2);
    assert_eq!(exit_code(&qbrst(&["hodge", "--q0", "pi"])), 2);
}

#[test]
fn manifests_are_deterministic_modulo_timings() {
    let strip = |bytes: &[u8]| {
        let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
        for c in v["checks"].as_array_mut().unwrap() {
            c["millis"] = 0.into();
        }
        v
    };
    let a = qbrst(&["cohomology", "--N", "1"]);
    let b = qbrst(&["cohomology", "--N", "1"]);
    assert_eq!(exit_code(&a), 0);
    assert_eq!(strip(&a.stdout), strip(&b.stdout));
}

#[test]
fn full_n1_pipeline_passes() {
    for cmd in [
        "build-q",
        "verify-glq",
        "verify-qstar",
        "laplacian",
        "cohomology",
        "classical-limit",
        "solve-x",
    ] {
        let out = qbrst(&[cmd, "--N", "1"]);
        assert_eq!(exit_code(&out), 0, "{cmd}");
    }
}

#[test]
fn hodge_splits_and_decomposes_a_sampled_state() {
    let out = qbrst(&["hodge", "--N", "1", "--max-degree", "1"]);
    assert_eq!(exit_code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let comps = v["artifacts"]["components"].as_array().unwrap();
    assert_eq!(comps.len(), 4);

    // polynomial JSON uses 1-based indices: the state T^1_1 om^1_1
    let state = serde_json::json!([
        { "coeff": "(1)/(1)", "word": [["T", [1, 1]], ["om", [1, 1]]] }
    ]);
    let dir = std::env::temp_dir().join("qbrst-cli-test-hodge");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("state.json");
    std::fs::write(&path, state.to_string()).unwrap();
    let out = qbrst(&["hodge", "--N", "1", "--in", path.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(exit_code(&out), 0, "{v}");
    assert!(v["artifacts"]["decomposition"].is_object());
}
