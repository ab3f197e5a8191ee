//! End-to-end checks of the ctprog binary: determinism of output trees,
//! error reporting, and exit codes.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn ctprog(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctprog"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn ctprog")
}

fn tree_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                // the config echo records --threads and --out; it is
                // provenance, not computed output
                if rel != "run-config.json" {
                    out.insert(rel, std::fs::read(&path).unwrap());
                }
            }
        }
    }
    out
}

#[test]
fn phantom_same_seed_byte_identical_tree() {
    let dir = tempfile::tempdir().unwrap();
    for (out, threads) in [("a", "1"), ("b", "4")] {
        let r = ctprog(
            &[
                "phantom", "--n-pairs", "3", "--dims", "20x20x5", "--seed", "11", "--threads",
                threads, "--out", out,
            ],
            dir.path(),
        );
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(tree_bytes(&dir.path().join("a")), tree_bytes(&dir.path().join("b")));
}

#[test]
fn extract_rerun_identical_and_has_all_rows() {
    let dir = tempfile::tempdir().unwrap();
    let r = ctprog(
        &["phantom", "--n-pairs", "2", "--dims", "20x20x5", "--seed", "3", "--out", "c"],
        dir.path(),
    );
    assert!(r.status.success());
    for out in ["f1.csv", "f2.csv"] {
        let r = ctprog(
            &["extract", "--manifest", "c/manifest.json", "--out", out],
            dir.path(),
        );
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let f1 = std::fs::read(dir.path().join("f1.csv")).unwrap();
    let f2 = std::fs::read(dir.path().join("f2.csv")).unwrap();
    assert_eq!(f1, f2);
    let text = String::from_utf8(f1).unwrap();
    assert_eq!(text.lines().count(), 5, "header + 4 studies");
    assert!(text.starts_with("study_id,"));
}

#[test]
fn corrupt_volume_fails_naming_study() {
    let dir = tempfile::tempdir().unwrap();
    let r = ctprog(
        &["phantom", "--n-pairs", "2", "--dims", "20x20x5", "--seed", "4", "--out", "c"],
        dir.path(),
    );
    assert!(r.status.success());
    let victim = dir.path().join("c/case-001.vol");
    let bytes = std::fs::read(&victim).unwrap();
    std::fs::write(&victim, &bytes[..bytes.len() / 2]).unwrap();
    let r = ctprog(
        &["extract", "--manifest", "c/manifest.json", "--out", "f.csv"],
        dir.path(),
    );
    assert_eq!(r.status.code(), Some(1));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("case-001"), "stderr: {err}");
}

#[test]
fn unknown_pipeline_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = ctprog(
        &["crossval", "--manifest", "x.json", "--pipeline", "boost", "--out-dir", "o"],
        dir.path(),
    );
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn missing_subcommand_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = ctprog(&["--seed", "1"], dir.path());
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn crossval_emits_report_files_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let r = ctprog(
        &["phantom", "--n-pairs", "6", "--dims", "20x20x5", "--seed", "8", "--out", "c"],
        dir.path(),
    );
    assert!(r.status.success());
    let r = ctprog(
        &[
            "crossval", "--manifest", "c/manifest.json", "--reduction", "identity",
            "--classifier", "lsvm", "--seed", "2", "--out-dir", "cv",
        ],
        dir.path(),
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let cv = dir.path().join("cv");
    for file in ["metrics.csv", "roc.csv", "summary.txt", "report.json", "run-config.json"] {
        assert!(cv.join(file).exists(), "missing {file}");
    }
    let metrics = std::fs::read_to_string(cv.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 7, "header + 6 fold rows");
    let echo = std::fs::read_to_string(cv.join("run-config.json")).unwrap();
    assert!(echo.contains("\"seed\": 2"));
    assert!(echo.contains("\"classifier\": \"lsvm\""));

    // report re-render without recomputation matches
    let r = ctprog(
        &["report", "--report", "cv/report.json", "--out-dir", "rr"],
        dir.path(),
    );
    assert!(r.status.success());
    assert_eq!(
        std::fs::read(cv.join("summary.txt")).unwrap(),
        std::fs::read(dir.path().join("rr/summary.txt")).unwrap()
    );
}
