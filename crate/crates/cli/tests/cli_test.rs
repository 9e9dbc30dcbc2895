//! End-to-end tests of the `qobs` binary: exit-code contract, byte
//! determinism, and file round trips.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qobs"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("qobs-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn generate_validate_certify_flow() {
    let trine = tmp("trine.json");
    let out = run(&[
        "generate",
        "trine",
        "--no-timestamp",
        "-o",
        trine.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = run(&["validate", trine.to_str().unwrap(), "--no-timestamp"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["valid"], serde_json::json!(true));
    assert!(
        report["tolerances"]["herm_tol"].is_number(),
        "tolerances echoed"
    );

    let out = run(&[
        "certify",
        trine.to_str().unwrap(),
        "--no-timestamp",
        "--seed",
        "9",
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["rank1"], serde_json::json!(true));
    assert_eq!(report["extreme"], serde_json::json!(true));
    assert_eq!(report["norm1"], serde_json::json!(false));
    assert_eq!(report["seed"], serde_json::json!(9));
    assert_eq!(report["consistency_violations"], serde_json::json!([]));
}

#[test]
fn outputs_are_byte_identical_without_timestamp() {
    let a = run(&[
        "generate",
        "frame",
        "--dim",
        "2",
        "--grid",
        "full",
        "--no-timestamp",
    ]);
    let b = run(&[
        "generate",
        "frame",
        "--dim",
        "2",
        "--grid",
        "full",
        "--no-timestamp",
    ]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(
        a.stdout, b.stdout,
        "identical inputs must produce identical bytes"
    );

    let c = run(&[
        "generate",
        "random-povm",
        "--dim",
        "3",
        "--ranks",
        "1,2,1",
        "--seed",
        "5",
        "--no-timestamp",
    ]);
    let d = run(&[
        "generate",
        "random-povm",
        "--dim",
        "3",
        "--ranks",
        "1,2,1",
        "--seed",
        "5",
        "--no-timestamp",
    ]);
    assert_eq!(c.stdout, d.stdout, "seeded generation must be reproducible");

    let e = run(&[
        "generate",
        "random-povm",
        "--dim",
        "3",
        "--ranks",
        "1,2,1",
        "--seed",
        "6",
        "--no-timestamp",
    ]);
    assert_ne!(c.stdout, e.stdout, "different seeds must differ");
}

#[test]
fn exit_code_contract() {
    // 3: malformed JSON.
    let bad = tmp("bad.json");
    write(&bad, "{\"this is not json");
    let out = run(&["certify", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    // 3: unknown schema version.
    let v9 = tmp("v9.json");
    write(
        &v9,
        r#"{"schema_version": 9, "dim": 1, "outcomes": ["1"], "effects": [[[[1.0, 0.0]]]]}"#,
    );
    let out = run(&["certify", v9.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    // 2: parseable but invalid POVM.
    let invalid = tmp("invalid.json");
    write(
        &invalid,
        r#"{"schema_version": 1, "dim": 1, "outcomes": ["1"], "effects": [[[[0.5, 0.0]]]]}"#,
    );
    let out = run(&["validate", invalid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // 4: infeasible generation request.
    let out = run(&[
        "generate",
        "random-povm",
        "--dim",
        "4",
        "--ranks",
        "1",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(4));

    // 0: success.
    let out = run(&["generate", "trine"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn smear_and_extract_kernel_flow() {
    let trine = tmp("trine2.json");
    run(&[
        "generate",
        "trine",
        "-o",
        trine.to_str().unwrap(),
        "--no-timestamp",
    ]);

    let kernel = tmp("kernel.json");
    write(
        &kernel,
        r#"{"schema_version": 1, "rows": 3, "cols": 2,
            "entries": [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]}"#,
    );
    let smeared = tmp("smeared.json");
    let out = run(&[
        "smear",
        trine.to_str().unwrap(),
        kernel.to_str().unwrap(),
        "--no-timestamp",
        "-o",
        smeared.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = run(&[
        "extract-kernel",
        trine.to_str().unwrap(),
        smeared.to_str().unwrap(),
        "--no-timestamp",
    ]);
    assert!(out.status.success());
    let extraction: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(extraction["is_smearing"], serde_json::json!(true));
    let entries = extraction["entries"].as_array().unwrap();
    let expected = [1.0, 0.0, 0.0, 1.0, 0.5, 0.5];
    for (value, want) in entries.iter().zip(expected) {
        assert!((value.as_f64().unwrap() - want).abs() < 1e-6);
    }
}

#[test]
fn dilate_refine_and_preprocess_flow() {
    let c3 = tmp("c3.json");
    run(&[
        "generate",
        "norm1-c3",
        "-o",
        c3.to_str().unwrap(),
        "--no-timestamp",
    ]);

    let out = run(&["dilate", c3.to_str().unwrap(), "--no-timestamp"]);
    assert!(out.status.success());
    let dilation: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(dilation["total_dim"], serde_json::json!(4));
    assert_eq!(dilation["multiplicities"], serde_json::json!([2, 2]));
    assert!(dilation["verification_residual"].as_f64().unwrap() < 1e-9);

    let out = run(&["refine", c3.to_str().unwrap(), "--no-timestamp"]);
    assert!(out.status.success());
    let refined: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(refined["outcomes"].as_array().unwrap().len(), 4);

    // Preprocess needs an aligned PVM; use the basis PVM written by hand.
    let pvm = tmp("pvm2.json");
    write(
        &pvm,
        r#"{"schema_version": 1, "dim": 2, "outcomes": ["1", "2"],
            "effects": [
              [[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[0.0,0.0]]],
              [[[0.0,0.0],[0.0,0.0]],[[0.0,0.0],[1.0,0.0]]]
            ]}"#,
    );
    let target = tmp("target2.json");
    run(&[
        "generate",
        "random-povm",
        "--dim",
        "2",
        "--ranks",
        "1,1",
        "--seed",
        "3",
        "--no-timestamp",
        "-o",
        target.to_str().unwrap(),
    ]);
    let out = run(&[
        "preprocess",
        pvm.to_str().unwrap(),
        target.to_str().unwrap(),
        "--no-timestamp",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let channel: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(channel["input_dim"], serde_json::json!(2));
    assert!(!channel["kraus"].as_array().unwrap().is_empty());
}

#[test]
fn witness_command_on_a_pvm() {
    let pvm = tmp("pvm.json");
    run(&[
        "generate",
        "random-pvm",
        "--dim",
        "3",
        "--multiplicities",
        "1,1,1",
        "--seed",
        "2",
        "--no-timestamp",
        "-o",
        pvm.to_str().unwrap(),
    ]);
    let out = run(&[
        "witness",
        pvm.to_str().unwrap(),
        "--no-timestamp",
        "--seed",
        "4",
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let searches = report["searches"].as_array().unwrap();
    assert!(searches[0]["proves_not_ic_pure"].as_bool().unwrap());
}

#[test]
fn sequential_simulation_flow() {
    let trine = tmp("trine3.json");
    run(&[
        "generate",
        "trine",
        "-o",
        trine.to_str().unwrap(),
        "--no-timestamp",
    ]);
    let instrument = tmp("luders.json");
    let out = run(&[
        "generate",
        "luders",
        "--povm",
        trine.to_str().unwrap(),
        "--no-timestamp",
        "-o",
        instrument.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let state = tmp("state3.json");
    run(&[
        "generate",
        "random-state",
        "--dim",
        "2",
        "--seed",
        "11",
        "--no-timestamp",
        "-o",
        state.to_str().unwrap(),
    ]);

    let out = run(&[
        "sequential",
        instrument.to_str().unwrap(),
        trine.to_str().unwrap(),
        state.to_str().unwrap(),
        "--shots",
        "20000",
        "--seed",
        "8",
        "--no-timestamp",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let result: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result["n_shots"], serde_json::json!(20000));
    assert!(result["max_abs_deviation"].as_f64().unwrap() < 0.02);

    // The trivial second observable reproduces the first-margin statistics.
    let trivial = tmp("trivial.json");
    write(
        &trivial,
        r#"{"schema_version": 1, "dim": 2, "outcomes": ["only"],
            "effects": [[[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[1.0,0.0]]]]}"#,
    );
    let pair = run(&[
        "sequential",
        instrument.to_str().unwrap(),
        trivial.to_str().unwrap(),
        state.to_str().unwrap(),
        "--shots",
        "20000",
        "--seed",
        "8",
        "--no-timestamp",
    ]);
    let single = run(&[
        "simulate",
        trine.to_str().unwrap(),
        state.to_str().unwrap(),
        "--shots",
        "20000",
        "--seed",
        "8",
        "--no-timestamp",
    ]);
    assert!(pair.status.success() && single.status.success());
    let pair: serde_json::Value = serde_json::from_slice(&pair.stdout).unwrap();
    let single: serde_json::Value = serde_json::from_slice(&single.stdout).unwrap();
    // Same seed, same first-stage draws: the marginal counts coincide.
    let marginal: Vec<u64> = pair["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| row.as_array().unwrap()[0].as_u64().unwrap())
        .collect();
    let direct: Vec<u64> = single["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(marginal, direct);
}

#[test]
fn tolerance_overrides_are_applied_and_echoed() {
    let trine = tmp("trine4.json");
    run(&[
        "generate",
        "trine",
        "-o",
        trine.to_str().unwrap(),
        "--no-timestamp",
    ]);
    let out = run(&[
        "certify",
        trine.to_str().unwrap(),
        "--tol-eigval1",
        "1e-3",
        "--no-timestamp",
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["tolerances"]["eigval1_tol"], serde_json::json!(1e-3));

    // Nonpositive tolerances are rejected as infeasible configuration.
    let out = run(&["certify", trine.to_str().unwrap(), "--tol-herm", "-1.0"]);
    assert_eq!(out.status.code(), Some(2));
}
