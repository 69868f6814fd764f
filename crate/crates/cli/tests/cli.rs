use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hrmf_core::{read_matrix, Matrix};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hrmf"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn init_bundle(dir: &Path) -> PathBuf {
    let out = dir.join("bundle.json");
    let o = run(&[
        "init-weights",
        "--seed",
        "42",
        "--d-w",
        "4",
        "--d-h",
        "8",
        "-o",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn fuse(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let bundle = init_bundle(dir);
    let out = dir.join(out);
    let defaults = [
        ("--embeddings", data("toy_embeddings.txt")),
        ("--weights", bundle),
        ("--hidden", data("hidden.txt")),
        ("--segmentation", data("segmentation.jsonl")),
        ("-o", out),
    ];
    let mut cmd = bin();
    cmd.arg("fuse");
    for (flag, path) in &defaults {
        if !extra.contains(flag) {
            cmd.arg(flag).arg(path);
        }
    }
    cmd.args(extra).output().unwrap()
}

fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.max_abs_diff(b).expect("shape mismatch")
}

#[test]
fn vote_chongqing() {
    let o = run(&["vote", "-i", s(&data("vote_chongqing.jsonl"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(line["words"], serde_json::json!(["重庆", "人和中学"]));
    assert_eq!(line["spans"], serde_json::json!([[0, 1], [2, 5]]));
}

#[test]
fn vote_reads_stdin_and_skips_blank_lines() {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = bin()
        .args(["vote", "-i", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(
            b"\n{\"sentence\":\"ab\",\"tokenizations\":[[\"ab\"],[\"a\",\"b\"],[\"ab\"]]}\n\n",
        )
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        "{\"sentence\":\"ab\",\"words\":[\"ab\"],\"spans\":[[0,1]]}\n"
    );
}

#[test]
fn vote_empty_input_gives_empty_output() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("empty.jsonl");
    fs::write(&input, "").unwrap();
    let o = run(&["vote", "-i", s(&input)]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
}

#[test]
fn vote_bad_record_names_line_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("bad.jsonl");
    let output = dir.path().join("out.jsonl");
    fs::write(
        &input,
        "{\"sentence\":\"ab\",\"tokenizations\":[[\"a\",\"b\"]]}\n{\"sentence\":\"ab\",\"tokenizations\":[[\"a\",\"c\"]]}\n",
    )
    .unwrap();
    let o = run(&["vote", "-i", s(&input), "-o", s(&output)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert!(!output.exists());
}

#[test]
fn init_weights_is_deterministic_and_pinned() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let x = fs::read(init_bundle(a.path())).unwrap();
    let y = fs::read(init_bundle(b.path())).unwrap();
    assert_eq!(x, y);
    assert_eq!(
        hex::encode(Sha256::digest(&x)),
        "b7da5fe6c872c3c91b61a0d8e703e1664e0fda30d20a00759d44f016187f8e19"
    );
}

#[test]
fn init_weights_rejects_indivisible_heads() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("b.json");
    let o = run(&[
        "init-weights",
        "--d-w",
        "4",
        "--d-h",
        "7",
        "--heads",
        "2",
        "-o",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn unknown_flag_exits_one() {
    assert_eq!(run(&["vote", "--nope"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn fuse_matches_golden_for_both_head_counts() {
    let dir = TempDir::new().unwrap();
    for heads in ["1", "2"] {
        let o = fuse(dir.path(), "out.txt", &["--heads", heads]);
        assert!(o.status.success(), "{}", stderr(&o));
        let got = read_matrix(dir.path().join("out.txt")).unwrap();
        let want = read_matrix(data(&format!("golden_output_heads{heads}.txt"))).unwrap();
        assert!(max_diff(&got, &want) <= 1e-12);
    }
}

#[test]
fn fuse_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    assert!(fuse(dir.path(), "a.txt", &[]).status.success());
    assert!(fuse(dir.path(), "b.txt", &[]).status.success());
    assert_eq!(
        fs::read(dir.path().join("a.txt")).unwrap(),
        fs::read(dir.path().join("b.txt")).unwrap()
    );
}

#[test]
fn fuse_mu_endpoints_select_branches() {
    let dir = TempDir::new().unwrap();
    assert!(fuse(dir.path(), "dbg.txt", &["--debug-intermediates"])
        .status
        .success());
    let h1 = read_matrix(dir.path().join("dbg.h1.txt")).unwrap();
    let h2 = read_matrix(dir.path().join("dbg.h2.txt")).unwrap();
    let omega = fs::read_to_string(dir.path().join("dbg.omega.json")).unwrap();
    assert_eq!(omega.trim(), "[0,2]");
    assert!(fuse(dir.path(), "one.txt", &["--mu", "1"]).status.success());
    assert!(fuse(dir.path(), "zero.txt", &["--mu", "0"])
        .status
        .success());
    assert_eq!(read_matrix(dir.path().join("one.txt")).unwrap(), h1);
    assert_eq!(read_matrix(dir.path().join("zero.txt")).unwrap(), h2);
}

#[test]
fn fuse_config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let bundle = init_bundle(dir.path());
    fs::copy(data("hidden.txt"), dir.path().join("hidden.txt")).unwrap();
    let cfg = serde_json::json!({
        "embeddings": data("toy_embeddings.txt"),
        "weights": "bundle.json",
        "hidden": "hidden.txt",
        "segmentation": data("segmentation.jsonl"),
        "output": "cfg_out.txt",
        "mu": 1.0,
    });
    assert!(bundle.exists());
    let cfg_path = dir.path().join("run.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    let o = run(&["fuse", "--config", s(&cfg_path), "--mu", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let got = read_matrix(dir.path().join("cfg_out.txt")).unwrap();
    let want = read_matrix(data("golden_output_heads1.txt")).unwrap();
    assert!(max_diff(&got, &want) <= 1e-12);
}

#[test]
fn fuse_identity_configuration_leaves_attention_input_untouched() {
    // lambda = 1 and zero word vectors: fusion is the identity
    let dir = TempDir::new().unwrap();
    let emb = dir.path().join("zero.txt");
    fs::write(&emb, "1 4\n<unk> 0 0 0 0\n").unwrap();
    let o = fuse(
        dir.path(),
        "id.txt",
        &[
            "--lambda",
            "1",
            "--debug-intermediates",
            "--embeddings",
            s(&emb),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let mixed = read_matrix(dir.path().join("id.mixed.txt")).unwrap();
    let h = read_matrix(data("hidden.txt")).unwrap();
    assert!(max_diff(&mixed, &h) <= 1e-12);
}

#[test]
fn fuse_errors_name_the_artifact() {
    let dir = TempDir::new().unwrap();
    let missing = fuse(dir.path(), "x.txt", &["--hidden", "/nonexistent/h.txt"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("hidden"), "{}", stderr(&missing));

    let wide = dir.path().join("wide.txt");
    fs::write(&wide, "6 5\n".to_string() + &"0 0 0 0 0\n".repeat(6)).unwrap();
    let o = fuse(dir.path(), "y.txt", &["--hidden", s(&wide)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("y.txt").exists());

    let bad_mu = fuse(dir.path(), "z.txt", &["--mu", "1.5"]);
    assert_eq!(bad_mu.status.code(), Some(1));
    assert!(stderr(&bad_mu).contains("mu"), "{}", stderr(&bad_mu));
}

#[test]
fn fuse_refuses_to_overwrite_inputs() {
    let dir = TempDir::new().unwrap();
    let hidden = dir.path().join("h.txt");
    fs::copy(data("hidden.txt"), &hidden).unwrap();
    let before = fs::read(&hidden).unwrap();
    let o = fuse(dir.path(), "h.txt", &["--hidden", s(&hidden)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read(&hidden).unwrap(), before);
}

#[test]
fn check_passes_and_detects_corruption() {
    let ok = run(&["check", "--cases", "100"]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stdout)
    );
    assert!(String::from_utf8_lossy(&ok.stdout).contains("0 failed"));
    let bad = run(&["check", "--cases", "20", "--corrupt-softmax"]);
    assert_eq!(bad.status.code(), Some(1));
}
