//! Drives the installed binary the way a user would: real process spawns,
//! real files, assertions on exit codes and emitted artifacts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_discomax");

fn run_cli(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("binary spawns")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small regression table: four features, response driven by the first one.
fn write_toy_csv(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut body = String::from("f1,f2,f3,f4,target\n");
    for _ in 0..n {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = 1.5 * x[0] + 0.1 * rng.random_range(-1.0..1.0);
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            x[0], x[1], x[2], x[3], y
        ));
    }
    fs::write(path, body).unwrap();
}

#[test]
fn run_emits_report_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    write_toy_csv(&data, 40, 11);

    let common = |out_dir: &Path| -> Output {
        run_cli(&[
            "run",
            "--data",
            data.to_str().unwrap(),
            "--methods",
            "discomax,baseline",
            "--dims",
            "2",
            "--folds",
            "4",
            "--seed",
            "7",
            "--max-outer",
            "4",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
    };

    let out1_dir = dir.path().join("out1");
    let out1 = common(&out1_dir);
    assert_eq!(
        out1.status.code(),
        Some(0),
        "stderr: {}",
        stderr_of(&out1)
    );
    let stdout = stdout_of(&out1);
    assert!(stdout.contains("wrote "), "stdout: {stdout}");
    assert!(stdout.contains("discomax"), "table missing: {stdout}");

    for name in ["results.json", "table.txt", "timings.tsv"] {
        assert!(out1_dir.join(name).exists(), "{name} missing");
    }
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1_dir.join("results.json")).unwrap())
            .unwrap();
    assert_eq!(doc["n_rows"], 40);
    assert_eq!(doc["n_features"], 4);
    assert_eq!(doc["seed"], 7);
    assert!(doc["cells"].as_array().map(|c| c.len()) == Some(2));

    // Same configuration, different target directory: the results document
    // must come out byte for byte identical (timings are wall-clock and are
    // kept out of it).
    let out2_dir = dir.path().join("out2");
    let out2 = common(&out2_dir);
    assert_eq!(out2.status.code(), Some(0));
    let doc1 = fs::read(out1_dir.join("results.json")).unwrap();
    let doc2 = fs::read(out2_dir.join("results.json")).unwrap();
    assert_eq!(doc1, doc2, "rerun changed the results document");
    assert_eq!(
        fs::read(out1_dir.join("table.txt")).unwrap(),
        fs::read(out2_dir.join("table.txt")).unwrap()
    );
}

#[test]
fn run_counts_malformed_rows_in_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("dirty.csv");
    write_toy_csv(&data, 20, 13);
    let mut body = fs::read_to_string(&data).unwrap();
    body.push_str("oops,not,a,number,row\n");
    body.push_str("1.0,2.0,,3.0,4.0\n");
    fs::write(&data, body).unwrap();

    let out_dir = dir.path().join("out");
    let out = run_cli(&[
        "run",
        "--data",
        data.to_str().unwrap(),
        "--methods",
        "baseline",
        "--folds",
        "3",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("results.json")).unwrap())
            .unwrap();
    assert_eq!(doc["dropped_rows"], 2);
    assert_eq!(doc["n_rows"], 20);
}

#[test]
fn user_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    write_toy_csv(&data, 25, 17);

    let missing = run_cli(&["run", "--data", "/no/such/file.csv"]);
    assert_eq!(missing.status.code(), Some(2), "{}", stderr_of(&missing));
    assert!(stderr_of(&missing).starts_with("error: "));

    let bad_dim = run_cli(&[
        "run",
        "--data",
        data.to_str().unwrap(),
        "--dims",
        "1",
        "--out-dir",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(bad_dim.status.code(), Some(2), "{}", stderr_of(&bad_dim));

    let bad_scale = run_cli(&[
        "run",
        "--data",
        data.to_str().unwrap(),
        "--scale-response",
        "bogus",
        "--out-dir",
        dir.path().join("y").to_str().unwrap(),
    ]);
    assert_eq!(bad_scale.status.code(), Some(2), "{}", stderr_of(&bad_scale));
}

#[test]
fn computation_failures_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, "u,v\n1,2\n3,4\n5,6\n").unwrap();
    fs::write(&b, "u,v\n1,2\n3,4\n").unwrap();
    let out = run_cli(&["dcorr", "--x", a.to_str().unwrap(), "--y", b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr_of(&out));
}

#[test]
fn dcorr_of_a_matrix_with_itself_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    write_toy_csv(&path, 30, 19);
    let out = run_cli(&[
        "dcorr",
        "--x",
        path.to_str().unwrap(),
        "--y",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let value: f64 = stdout_of(&out).trim().parse().expect("bare number");
    assert!((value - 1.0).abs() < 1e-9, "self dcorr2 {value}");
}

#[test]
fn embed_writes_embedding_trace_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    write_toy_csv(&data, 30, 23);
    let out_dir = dir.path().join("embedding");

    let out = run_cli(&[
        "embed",
        "--data",
        data.to_str().unwrap(),
        "--dim",
        "2",
        "--max-outer",
        "4",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("embedded 30 rows into 2 dimensions"));

    let z = fs::read_to_string(out_dir.join("z.tsv")).unwrap();
    let mut lines = z.lines();
    assert_eq!(lines.next(), Some("z1\tz2"));
    assert_eq!(lines.count(), 30);

    let trace = fs::read_to_string(out_dir.join("trace.tsv")).unwrap();
    assert!(trace.starts_with("k\tf\t"), "trace header: {trace}");

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("model.json")).unwrap()).unwrap();
    assert_eq!(meta["dim"], 2);
    assert_eq!(meta["n_rows"], 30);
    assert!(meta["f_final"].as_f64().unwrap() > 0.0);
}

#[test]
fn trace_plot_data_validates_and_reemits_run_traces() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    write_toy_csv(&data, 36, 29);
    let out_dir = dir.path().join("out");

    let run = run_cli(&[
        "run",
        "--data",
        data.to_str().unwrap(),
        "--methods",
        "discomax",
        "--dims",
        "2",
        "--folds",
        "3",
        "--max-outer",
        "3",
        "--verbose-trace",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0), "stderr: {}", stderr_of(&run));

    let replot = dir.path().join("replot");
    let out = run_cli(&[
        "trace-plot-data",
        "--results",
        out_dir.join("results.json").to_str().unwrap(),
        "--out-dir",
        replot.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let stdout = stdout_of(&out);
    assert!(
        stdout.contains("re-emitted 3 trace file(s)"),
        "stdout: {stdout}"
    );

    // Re-emitted bodies must match the originals byte for byte.
    for f in 0..3 {
        let name = format!("trace_discomax_d2_fold{f}.tsv");
        let original = fs::read(out_dir.join(&name)).unwrap();
        let copy = fs::read(replot.join(&name)).unwrap();
        assert!(!original.is_empty());
        assert_eq!(original, copy, "{name} drifted");
    }
}
