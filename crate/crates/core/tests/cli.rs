use std::process::{Command, Output};

use clap::Parser;
use mcqt::cli::RunSpec;
use mcqt::{MessageState, StateVector};
use serde_json::Value;

fn mcqt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcqt"))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn enumerate_example_with_derived_table() {
    let out = mcqt(&[
        "--mode",
        "enumerate",
        "--n",
        "3",
        "--m",
        "2",
        "--epr",
        "phi+",
        "--table",
        "derived",
        "--message",
        "example3x2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let branches = doc["branches"].as_array().unwrap();
    assert_eq!(branches.len(), 256);
    for b in branches {
        assert!(b["fidelity_derived"].as_f64().unwrap() >= 1.0 - 1e-10);
        assert!((b["probability"].as_f64().unwrap() - 1.0 / 256.0).abs() < 1e-10);
    }
    assert_eq!(doc["checks"]["passed"], true);
}

#[test]
fn enumerate_with_printed_table_exits_2() {
    let out = mcqt(&[
        "--mode",
        "enumerate",
        "--n",
        "3",
        "--m",
        "2",
        "--table",
        "paper",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let doc = json(&out);
    assert!(doc["checks"]["failing_branches"].as_u64().unwrap() > 0);
    let fidelity_zero = doc["branches"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|b| b["fidelity_paper"].as_f64().unwrap() < 1.0 - 1e-10)
        .count();
    assert!(fidelity_zero > 0);
}

#[test]
fn single_qubit_run() {
    let out = mcqt(&[
        "--mode",
        "run",
        "--n",
        "1",
        "--m",
        "0",
        "--seed",
        "7",
        "--message",
        "random",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert!(doc["transcript"]["fidelity"].as_f64().unwrap() >= 1.0 - 1e-10);
    assert_eq!(doc["header"]["schema_version"], 1);
}

#[test]
fn reports_are_byte_identical() {
    for args in [
        &["--mode", "run", "--n", "3", "--m", "3", "--seed", "11"][..],
        &[
            "--mode",
            "enumerate",
            "--n",
            "2",
            "--m",
            "2",
            "--epr",
            "psi-",
        ][..],
        &[
            "--mode",
            "montecarlo",
            "--n",
            "2",
            "--m",
            "1",
            "--trials",
            "500",
            "--seed",
            "3",
        ][..],
        &["--mode", "reconcile", "--epr", "phi-"][..],
    ] {
        let a = mcqt(args);
        let b = mcqt(args);
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn header_args_reparse_to_the_same_run_spec() {
    let args = [
        "mcqt",
        "--mode",
        "montecarlo",
        "--n",
        "2",
        "--m",
        "2",
        "--epr",
        "psi+",
        "--trials",
        "200",
        "--seed",
        "9",
    ];
    let spec = RunSpec::try_parse_from(args).unwrap();
    let doc = json(&mcqt(&args[1..]));
    let echoed: Vec<String> = doc["header"]["args"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a.as_str().unwrap().to_string())
        .collect();
    assert_eq!(RunSpec::try_parse_from(echoed).unwrap(), spec);
}

#[test]
fn montecarlo_reports_uniform_frequencies() {
    let doc = json(&mcqt(&[
        "--mode",
        "montecarlo",
        "--n",
        "2",
        "--m",
        "2",
        "--trials",
        "2000",
        "--seed",
        "1",
    ]));
    let mc = &doc["montecarlo"];
    assert_eq!(mc["branch_count"], 64);
    assert_eq!(mc["passed"], true);
    let total: u64 = mc["frequencies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["count"].as_u64().unwrap())
        .sum();
    assert_eq!(total, 2000);
}

#[test]
fn message_file_is_loaded() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("msg.txt");
    let msg = MessageState::seeded(2, 8);
    std::fs::write(&path, msg.state().to_text()).unwrap();
    let out = mcqt(&[
        "--mode",
        "run",
        "--n",
        "2",
        "--m",
        "1",
        "--message",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let amps = json(&out)["message"].as_array().unwrap().clone();
    let got: Vec<_> = amps
        .iter()
        .map(|a| num_complex::Complex64::new(a[0].as_f64().unwrap(), a[1].as_f64().unwrap()))
        .collect();
    let got = StateVector::from_amplitudes(got).unwrap();
    assert!(got.phase_aligned_distance(msg.state()).unwrap() < 1e-12);
}

#[test]
fn bad_message_files_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let unnormalized = dir.path().join("a.txt");
    std::fs::write(&unnormalized, "1 0\n0.01 0\n").unwrap();
    let wrong_len = dir.path().join("b.txt");
    std::fs::write(&wrong_len, "1 0\n0 0\n0 0\n").unwrap();
    let wrong_n = dir.path().join("c.txt");
    std::fs::write(&wrong_n, "1 0\n0 0\n").unwrap();
    for p in [&unnormalized, &wrong_len, &wrong_n] {
        let out = mcqt(&["--n", "2", "--message", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{p:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(mcqt(&["--message", "/no/such/file"]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(mcqt(&["--bogus"]).status.code(), Some(1));
    assert_eq!(mcqt(&["--epr", "chi"]).status.code(), Some(1));
    assert_eq!(mcqt(&["--n", "0"]).status.code(), Some(1));
    assert_eq!(mcqt(&["--n", "7", "--m", "2"]).status.code(), Some(1));
    assert_eq!(
        mcqt(&["--mode", "montecarlo", "--trials", "0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(mcqt(&["--help"]).status.code(), Some(0));
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = mcqt(&["--mode", "reconcile", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["reconciliation"]["cells"].as_array().unwrap().len(), 28);
}

#[test]
fn reconcile_text_diff() {
    let out = mcqt(&["--mode", "reconcile", "--epr", "psi-", "--format", "text"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Table VI"));
    assert!(text.contains("typo"));
}
