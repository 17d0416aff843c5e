use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bathyedit"));
    cmd.env_remove("RUST_LOG").arg("--log-level").arg("warn");
    cmd
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = run(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const SPEC: &str = r#"{
  "region_count": 2,
  "cruises_per_region": 3,
  "cruise_length": 700,
  "bad_fraction_per_region": [0.15, 0.1],
  "mean_bad_run_length": 25,
  "noise_scale_per_region": [1.0, 1.5],
  "seed": 17
}"#;

/// Runs every batch stage in `dir` and returns the produced files.
fn pipeline(dir: &Path) -> Vec<PathBuf> {
    std::fs::write(dir.join("spec.json"), SPEC).unwrap();
    std::fs::write(dir.join("train.json"), r#"{"num_rounds": 15, "max_leaves": 8}"#).unwrap();
    ok(&["generate", "--spec", "spec.json", "--out", "corpus.csv"], dir);
    ok(
        &["split", "--corpus", "corpus.csv", "--strategy", "chunk", "--chunk-length", "100", "--test-fraction", "0.3", "--seed", "4", "--out", "split.csv"],
        dir,
    );
    ok(
        &["train", "--corpus", "corpus.csv", "--split", "split.csv", "--config", "train.json", "--out", "model.txt"],
        dir,
    );
    ok(&["score", "--model", "model.txt", "--corpus", "corpus.csv", "--out", "scores.csv"], dir);
    let roc = ok(
        &["roc", "--scores", "scores.csv", "--corpus", "corpus.csv", "--split", "split.csv", "--out", "roc.csv"],
        dir,
    );
    let stdout = String::from_utf8(roc.stdout).unwrap();
    let auroc: f64 = stdout.trim().strip_prefix("auroc=").unwrap().parse().unwrap();
    assert!((0.5..=1.0).contains(&auroc), "auroc {auroc}");
    ok(
        &["matrix", "--corpus", "corpus.csv", "--strategy", "chunk", "--chunk-length", "100", "--num-rounds", "10", "--out", "matrix.csv"],
        dir,
    );
    ok(&["improvement", "--matrix", "matrix.csv", "--out", "improvement.csv"], dir);
    ok(
        &["seq-report", "--corpus", "corpus.csv", "--chunk-length", "100", "--num-rounds", "10", "--out", "seq.csv"],
        dir,
    );
    ["corpus.csv", "split.csv", "model.txt", "scores.csv", "roc.csv", "matrix.csv", "improvement.csv", "seq.csv"]
        .iter()
        .map(|f| dir.join(f))
        .collect()
}

#[test]
fn pipeline_is_byte_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let first = pipeline(a.path());
    let second = pipeline(b.path());
    for (x, y) in first.iter().zip(&second) {
        let (bx, by) = (std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        assert!(!bx.is_empty(), "{} is empty", x.display());
        assert!(bx == by, "{} differs between runs", x.file_name().unwrap().to_string_lossy());
    }

    let matrix = std::fs::read_to_string(a.path().join("matrix.csv")).unwrap();
    assert_eq!(matrix.lines().count(), 4, "header, two regions and ALL:\n{matrix}");
    let improvement = std::fs::read_to_string(a.path().join("improvement.csv")).unwrap();
    assert_eq!(improvement.lines().count(), 3, "{improvement}");
    let seq = std::fs::read_to_string(a.path().join("seq.csv")).unwrap();
    assert_eq!(seq.lines().count(), 4, "{seq}");
}

#[test]
fn chunk_units_never_straddle_boundaries() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("spec.json"), SPEC).unwrap();
    ok(&["generate", "--spec", "spec.json", "--out", "corpus.csv"], d);
    ok(
        &["split", "--corpus", "corpus.csv", "--strategy", "chunk", "--chunk-length", "128", "--out", "split.csv"],
        d,
    );
    let text = std::fs::read_to_string(d.join("split.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("cruise_id,seq_start,seq_end,side"));
    let mut count = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let (start, end): (u64, u64) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        assert_eq!(start % 128, 0, "{line}");
        assert_eq!(start / 128, end / 128, "{line} crosses a chunk boundary");
        assert!(end < 700);
        assert!(f[3] == "train" || f[3] == "test");
        count += 1;
    }
    assert_eq!(count, 6 * 700usize.div_ceil(128));
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(run(&["generate", "--bogus"], d).status.code(), Some(2));
    assert_eq!(run(&[], d).status.code(), Some(2));

    let missing = run(&["generate", "--spec", "nope.json", "--out", "c.csv"], d);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.json"));

    std::fs::write(d.join("bad.json"), "{ not json").unwrap();
    assert_eq!(run(&["generate", "--spec", "bad.json", "--out", "c.csv"], d).status.code(), Some(4));
    std::fs::write(d.join("corpus.csv"), "cruise_id,seq\nx,y\n").unwrap();
    assert_eq!(
        run(&["split", "--corpus", "corpus.csv", "--strategy", "per-cruise", "--out", "s.csv"], d).status.code(),
        Some(4)
    );

    let invalid = SPEC.replace("\"cruise_length\": 700", "\"cruise_length\": 0");
    std::fs::write(d.join("invalid.json"), invalid).unwrap();
    assert_eq!(run(&["generate", "--spec", "invalid.json", "--out", "c.csv"], d).status.code(), Some(5));
    std::fs::write(d.join("spec.json"), SPEC).unwrap();
    ok(&["generate", "--spec", "spec.json", "--out", "corpus.csv"], d);
    assert_eq!(
        run(&["split", "--corpus", "corpus.csv", "--strategy", "per-cruise", "--test-fraction", "1.5", "--out", "s.csv"], d)
            .status
            .code(),
        Some(5)
    );
    assert!(!d.join("s.csv").exists());
}

#[test]
fn serve_answers_http() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("spec.json"), SPEC).unwrap();
    ok(&["generate", "--spec", "spec.json", "--out", "corpus.csv"], d);
    ok(&["split", "--corpus", "corpus.csv", "--strategy", "per-cruise", "--out", "split.csv"], d);
    ok(
        &["train", "--corpus", "corpus.csv", "--split", "split.csv", "--num-rounds", "5", "--out", "model.txt"],
        d,
    );
    let mut child = bin()
        .args(["serve", "--corpus", "corpus.csv", "--model", "model.txt", "--edit-log", "edits.log", "--addr", "127.0.0.1:0"])
        .current_dir(d)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").unwrap_or_else(|| panic!("{line}"));

    let mut stream = TcpStream::connect(addr).unwrap();
    write!(stream, "GET /cruises HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();

    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("\"score_version\""));
    assert!(response.contains("r01-c0002"));
    assert!(d.join("edits.log").exists());
}
