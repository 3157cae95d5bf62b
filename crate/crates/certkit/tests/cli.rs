//! End-to-end checks of the command-line surface: flag parsing, file
//! formats, report fields, the exit-code contract, and byte-level
//! determinism of repeated runs.

use std::path::Path;
use std::process::{Command, Output};

use certkit::bab::sawtooth_network;
use certkit::network::{random_network, write_network};

fn certkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_certkit"))
        .args(args)
        .env_remove("CERTKIT_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf8 stdout")
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

#[test]
fn w1_of_identical_files_is_zero_with_success_exit() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    write(&a, "x\n0.1\n0.5\n0.9\n");
    write(&b, "x\n0.9\n0.1\n0.5\n");
    let out = certkit(&["w1", "--source", a.to_str().unwrap(), "--target", b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("command w1"));
    assert!(text.contains("distance 0\n"), "got:\n{text}");
}

#[test]
fn verify_emits_nine_margin_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let net_path = dir.path().join("wide.net");
    write_network(&random_network(&[50, 200, 10], 7), &net_path).unwrap();
    let center = dir.path().join("x0.csv");
    let mut center_text = String::from("x\n");
    for _ in 0..50 {
        center_text.push_str("0.0\n");
    }
    write(&center, &center_text);
    let json = dir.path().join("report.json");
    let out = certkit(&[
        "verify",
        "--net",
        net_path.to_str().unwrap(),
        "--center",
        center.to_str().unwrap(),
        "--radius",
        "0.01",
        "--target-class",
        "3",
        "--json",
        json.to_str().unwrap(),
    ]);
    let text = stdout(&out);
    assert_eq!(text.matches("spec margin").count(), 9, "got:\n{text}");
    assert_eq!(text.matches("method BackwardLinear").count(), 9);
    assert!(text.contains("\nK 2\n"));
    // Exit code follows the verdicts.
    let all_safe = text.matches("verdict Safe").count() == 9;
    let any_unsafe = text.contains("verdict Unsafe");
    let expected = if all_safe { 0 } else if any_unsafe { 1 } else { 2 };
    assert_eq!(out.status.code(), Some(expected));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(parsed["command"], "verify");
}

#[test]
fn verify_complete_exit_codes_follow_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let net_path = dir.path().join("saw.net");
    write_network(&sawtooth_network(3).unwrap(), &net_path).unwrap();
    let center = dir.path().join("c.csv");
    write(&center, "x\n0.5\n");

    // Maximum of the level-3 sawtooth is 1: beta above it proves safety.
    let out = certkit(&[
        "verify-complete",
        "--net",
        net_path.to_str().unwrap(),
        "--center",
        center.to_str().unwrap(),
        "--radius",
        "0.5",
        "--spec-a",
        "1",
        "--beta",
        "1.25",
    ]);
    assert_eq!(out.status.code(), Some(0), "stdout:\n{}", stdout(&out));
    assert!(stdout(&out).contains("verdict Safe"));

    let out = certkit(&[
        "verify-complete",
        "--net",
        net_path.to_str().unwrap(),
        "--center",
        center.to_str().unwrap(),
        "--radius",
        "0.5",
        "--spec-a",
        "1",
        "--beta",
        "0.75",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("verdict Unsafe") && text.contains("witness "), "got:\n{text}");

    // A one-node budget cannot decide this instance.
    let out = certkit(&[
        "verify-complete",
        "--net",
        net_path.to_str().unwrap(),
        "--center",
        center.to_str().unwrap(),
        "--radius",
        "0.5",
        "--spec-a",
        "1",
        "--beta",
        "0.75",
        "--budget",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("verdict Budget"));
}

#[test]
fn shift_cert_refuses_to_stamp_without_the_assumption() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    write(&train, "x,y\n0.1,1\n0.4,-1\n0.8,1\n");
    let target = dir.path().join("target.csv");
    write(&target, "x\n0.2\n0.5\n0.9\n");
    let base = [
        "shift-cert",
        "--train",
        train.to_str().unwrap(),
        "--target",
        target.to_str().unwrap(),
        "--w",
        "2.0",
        "--b",
        "-0.5",
    ];

    let out = certkit(&base);
    assert_eq!(out.status.code(), Some(2), "unstamped certificate exits 2");
    let text = stdout(&out);
    assert!(text.contains("covariate_shift_assumed false"));
    assert!(text.contains("stamped false"));

    let mut stamped_args = base.to_vec();
    stamped_args.push("--assume-covariate-shift");
    let out = certkit(&stamped_args);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("covariate_shift_assumed true"));
    assert!(text.contains("stamped true"));
    assert!(text.contains("sensitivity 2\n"), "|w| = 2 with the hinge loss:\n{text}");
}

#[test]
fn additive_reports_constants_and_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.add");
    write(
        &model,
        "additive v1\ndim 5\nconst 0\nref 0 -1 1\nref 1 -1 1\nref 2 -1 1\nref 3 -1 1\nref 4 -1 1\npoly 0 1 0 1\npoly 2 2 0 0 0.5\n",
    );
    let out = certkit(&["additive", "--model", model.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("component_lipschitz.0 1\n"), "got:\n{text}");
    assert!(text.contains("component_lipschitz.2 1\n"));
    assert!(text.contains("lipschitz_l1 2\n"));

    let out = certkit(&[
        "additive",
        "--model",
        model.to_str().unwrap(),
        "--compare",
        model.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("const_diff 0\n"));
    assert!(text.contains("max_component_diff 0\n"));

    // Decomposed shift certificate through the same command.
    let out = certkit(&[
        "additive",
        "--model",
        model.to_str().unwrap(),
        "--rho",
        "0.25",
        "--assume-covariate-shift",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("certified_shift_risk 0.5\n"), "0 + 0.25 * 2:\n{text}");
}

#[test]
fn demo_commands_complete_with_success() {
    let out = certkit(&["attack-demo", "--epsilon", "0.02", "--samples", "5", "--trials", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("predicted_miss_prob 0.903920"), "got:\n{text}");
    assert!(text.contains("empirical_miss_rate "));

    let out = certkit(&["shift-flip-demo", "--rho", "0.05", "--n", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("risk_train 0\n"));
    assert!(text.contains("risk_target 1\n"));
    assert!(text.contains("stamped false"));

    let out = certkit(&["sawtooth-demo", "--kmax", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.matches("row ").count(), 4);
    assert!(text.contains("columns k pieces_expected pieces bab_nodes"), "got:\n{text}");
}

#[test]
fn identical_runs_are_byte_identical() {
    let args =
        ["attack-demo", "--epsilon", "0.01", "--samples", "10", "--trials", "500", "--seed", "9"];
    let first = certkit(&args);
    let second = certkit(&args);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(first.status.code(), second.status.code());
}

#[test]
fn environment_seed_overrides_the_flag() {
    let args = ["attack-demo", "--epsilon", "0.05", "--samples", "8", "--trials", "300"];
    let via_env = Command::new(env!("CARGO_BIN_EXE_certkit"))
        .args(args)
        .env("CERTKIT_SEED", "42")
        .output()
        .unwrap();
    let mut flag_args = args.to_vec();
    flag_args.extend(["--seed", "42"]);
    let via_flag = certkit(&flag_args);
    assert_eq!(stdout(&via_env), stdout(&via_flag));
}

#[test]
fn errors_exit_above_two_with_a_single_line_record() {
    let out = certkit(&["w1", "--source", "/nonexistent.csv", "--target", "/nonexistent.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let text = stdout(&out);
    assert!(text.starts_with("error "), "got:\n{text}");
    assert_eq!(text.trim_end().lines().count(), 1);

    // Unknown method surfaces as an error, not a crash.
    let dir = tempfile::tempdir().unwrap();
    let net_path = dir.path().join("n.net");
    write_network(&sawtooth_network(1).unwrap(), &net_path).unwrap();
    let center = dir.path().join("c.csv");
    write(&center, "x\n0.5\n");
    let out = certkit(&[
        "verify",
        "--net",
        net_path.to_str().unwrap(),
        "--center",
        center.to_str().unwrap(),
        "--radius",
        "0.1",
        "--spec-a",
        "1",
        "--method",
        "simplex",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("error unknown verifier method"));

    // Bad flags exit 3 as well (the 0..2 band encodes verdicts only).
    let out = certkit(&["verify", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_network_files_are_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let net_path = dir.path().join("broken.net");
    write(&net_path, "relu-net v1\ndims 1 2 1\nlayer 1 relu\n1.0\n-1.0\n0.0 0.0\nlayer 2 identity\n1.0 1.0 1.0\n0.0\n");
    let center = dir.path().join("c.csv");
    write(&center, "x\n0.0\n");
    let out = certkit(&[
        "verify",
        "--net",
        net_path.to_str().unwrap(),
        "--center",
        center.to_str().unwrap(),
        "--radius",
        "0.1",
        "--spec-a",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).starts_with("error "));
}
